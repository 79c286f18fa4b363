//! Dataset preparation, the MSE/Adam training loop and LUT-aware finetuning.

mod config;
mod dataset;
mod finetune;
mod optim;
mod train;

pub use config::TrainConfig;
pub use dataset::{prepare_pairs, sample_batch, DatasetSpec, Pair, PrepareStats};
pub use finetune::{lut_aware_finetune, pipeline_mse, FinetuneReport};
pub use optim::{adam_step, adam_update, AdamHyper};
pub use train::{mse_loss, train, train_step, LossRecord, TrainState};
