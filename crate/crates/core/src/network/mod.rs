//! The patch network: tensors, layers, spatial transformers, forward and
//! backward passes, output mapping, and checkpoints.

pub mod checkpoint;
mod config;
mod layers;
mod model;
mod output;
mod quaternion;
mod tensor;

pub use config::{ModelConfig, OutputSpec};
pub use layers::{Linear, Mlp, MlpTrace};
pub use model::{FeatureStn, ForwardCache, OutputGrad, PatchInput, PcpModel, QuaternionStn, SampleCache};
pub use output::{estimate_cloud, patch_frame_backward, patch_frame_outputs, predict, predict_patches, PatchFrameOutput};
pub use quaternion::{quaternion_to_matrix, Mat3};
pub use tensor::{Real, Tensor};
