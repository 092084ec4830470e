//! Adam, the warmup/step-decay learning-rate schedule, and the two-stage
//! training loop.

mod adam;
mod schedule;
mod train;

pub use adam::{AdamConfig, AdamState};
pub use schedule::Schedule;
pub use train::{
    batch_losses, pretrain_vae, train, train_full, EpochRecord, Stage, TrainHistory, TrainRunConfig,
};
