use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::optim::{AdamParams, ClipMode};

/// Optimizer, schedule and loop settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr_init: f64,
    pub plateau_patience: usize,
    pub lr_factor: f64,
    /// A validation loss must beat the best by more than this to count as progress.
    pub plateau_min_delta: f64,
    pub clip_max_norm: f64,
    pub clip_mode: ClipMode,
    pub max_epochs: usize,
    pub adam_betas: (f64, f64),
    pub adam_eps: f64,
    /// Utterances per optimizer step; gradients are averaged over the batch.
    pub batch_size: usize,
    pub seed: u64,
    /// Epochs on the pretraining corpus before finetuning (0 skips it).
    pub pretrain_epochs: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr_init: 5e-4,
            plateau_patience: 5,
            lr_factor: 0.5,
            plateau_min_delta: 1e-4,
            clip_max_norm: 5.0,
            clip_mode: ClipMode::GlobalNorm,
            max_epochs: 80,
            adam_betas: (0.9, 0.999),
            adam_eps: 1e-8,
            batch_size: 1,
            seed: 0,
            pretrain_epochs: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let (b1, b2) = self.adam_betas;
        let checks = [
            (self.lr_init > 0.0 && self.lr_init.is_finite(), "lr_init must be positive"),
            (self.lr_factor > 0.0 && self.lr_factor < 1.0, "lr_factor must lie in (0,1)"),
            (self.plateau_patience > 0, "plateau_patience must be positive"),
            (self.plateau_min_delta >= 0.0, "plateau_min_delta must be non-negative"),
            (self.clip_max_norm > 0.0, "clip_max_norm must be positive"),
            (self.max_epochs > 0, "max_epochs must be positive"),
            ((0.0..1.0).contains(&b1) && (0.0..1.0).contains(&b2), "adam_betas must lie in [0,1)"),
            (self.adam_eps > 0.0, "adam_eps must be positive"),
            (self.batch_size > 0, "batch_size must be positive"),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, msg)) => Err(Error::Config((*msg).into())),
            None => Ok(()),
        }
    }

    pub fn adam(&self, lr: f64) -> AdamParams {
        AdamParams {
            lr,
            beta1: self.adam_betas.0,
            beta2: self.adam_betas.1,
            eps: self.adam_eps,
        }
    }
}
