use serde::{Deserialize, Serialize};

/// Linear warmup from `base_lr` to `peak_lr`, a plateau, then two step
/// decays. Indexed by epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub base_lr: f64,
    pub peak_lr: f64,
    pub warmup_epochs: usize,
    pub decay1_epoch: usize,
    pub decay1_lr: f64,
    pub decay2_epoch: usize,
    pub decay2_lr: f64,
}

impl Default for Schedule {
    fn default() -> Self {
        Self {
            base_lr: 3.5e-5,
            peak_lr: 3.5e-4,
            warmup_epochs: 10,
            decay1_epoch: 40,
            decay1_lr: 3.5e-5,
            decay2_epoch: 70,
            decay2_lr: 3.5e-6,
        }
    }
}

impl Schedule {
    /// A schedule that returns `lr` at every epoch.
    pub fn constant(lr: f64) -> Self {
        Self {
            base_lr: lr,
            peak_lr: lr,
            warmup_epochs: 0,
            decay1_epoch: usize::MAX,
            decay1_lr: lr,
            decay2_epoch: usize::MAX,
            decay2_lr: lr,
        }
    }

    pub fn lr_at(&self, epoch: usize) -> f64 {
        if epoch >= self.decay2_epoch {
            self.decay2_lr
        } else if epoch >= self.decay1_epoch {
            self.decay1_lr
        } else if epoch >= self.warmup_epochs {
            self.peak_lr
        } else {
            let frac = epoch as f64 / self.warmup_epochs as f64;
            self.base_lr + (self.peak_lr - self.base_lr) * frac
        }
    }

    /// Every rate multiplied by `factor`; epoch boundaries unchanged.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            base_lr: self.base_lr * factor,
            peak_lr: self.peak_lr * factor,
            decay1_lr: self.decay1_lr * factor,
            decay2_lr: self.decay2_lr * factor,
            ..*self
        }
    }
}
