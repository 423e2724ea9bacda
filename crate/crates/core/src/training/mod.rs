//! Losses, optimizer, training loop, and gradient verification.

pub mod desk;
pub mod gradcheck;
pub mod loss;
mod objective;
mod sgd;
mod trainer;

pub use objective::{batch_objective, partial_objective, BatchObjective, Target};
pub use sgd::{sgd_step, OptimizerState};
pub use trainer::{
    check_ground_truth, train, training_target, EpochStats, TrainConfig, TrainOutcome, Trainer, BEST_CHECKPOINT,
    FINAL_CHECKPOINT, PROGRESS_FILE,
};
