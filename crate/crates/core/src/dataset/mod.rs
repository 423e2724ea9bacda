//! Labelled point clouds from meshes and analytic surfaces.

pub mod analytic;
pub mod curvature;
pub mod mesh;
pub mod sampling;
pub mod shapes;
pub mod store;
pub mod variants;

pub use analytic::{analytic_shape, AnalyticShape, SHEET_GAP_FRACTION};
pub use curvature::vertex_curvatures_rusinkiewicz;
pub use mesh::TriMesh;
pub use sampling::{interpolate_curvature, sample_mesh_uniform, SampleProvenance};
pub use store::{
    generate_dataset, read_dataset, read_stem_list, write_dataset, write_stem_list, DatasetManifest, GenerateOptions,
    ShapeSource, ShapeSpec, VariantKind, VariantRecord, MANIFEST_FILE, STEM_LIST_FILE,
};
pub use variants::{add_gaussian_noise, density_variant, keep_probabilities, DensityScheme, NOISE_LEVELS};
