use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Optimisation settings. [`Default`] is the desk-scale profile; see
/// [`TrainConfig::full_scale`] for the long schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub iterations: u64,
    pub batch_size: usize,
    pub lr: f64,
    /// Side of the low-resolution crop, in pixels.
    pub lr_patch: usize,
    pub seed: u64,
    /// Random choice among the eight flips/rotations per sample.
    pub augment: bool,
    /// 0 disables periodic checkpoints.
    pub checkpoint_every: u64,
    pub log_every: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            iterations: 5_000,
            batch_size: 8,
            lr: 1e-3,
            lr_patch: 12,
            seed: 0,
            augment: true,
            checkpoint_every: 0,
            log_every: 100,
        }
    }
}

impl TrainConfig {
    /// 200k iterations, batch 32, lr 1e-4, 24-pixel crops.
    pub fn full_scale() -> Self {
        TrainConfig {
            iterations: 200_000,
            batch_size: 32,
            lr: 1e-4,
            lr_patch: 24,
            log_every: 1_000,
            checkpoint_every: 10_000,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.lr_patch == 0 {
            return Err(Error::InvalidConfig("batch_size and lr_patch must be positive".into()));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::InvalidConfig(format!("learning rate {} is not positive", self.lr)));
        }
        Ok(())
    }
}
