use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Linear warmup to `base`, then `base·cos(7π(t−W) / (16(T−W)))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    pub base: f64,
    pub total: usize,
    pub warmup: usize,
}

impl LrSchedule {
    pub fn new(base: f64, total: usize, warmup: usize) -> Result<Self> {
        if !(base > 0.0) || warmup >= total {
            return Err(Error::Config(format!(
                "learning-rate schedule needs base > 0 and 0 <= warmup < total (got base={base}, warmup={warmup}, total={total})"
            )));
        }
        Ok(Self { base, total, warmup })
    }

    pub fn lr_at(&self, t: usize) -> Result<f64> {
        if t > self.total {
            return Err(Error::Range {
                step: t,
                horizon: self.total,
            });
        }
        if t < self.warmup {
            return Ok(self.base * t as f64 / self.warmup as f64);
        }
        let progress = (t - self.warmup) as f64 / (self.total - self.warmup) as f64;
        Ok(self.base * (7.0 * PI * progress / 16.0).cos())
    }
}

/// Coefficient on the auxiliary distillation loss.
///
/// With annealing it ramps linearly from 0 at the first stage-2 step to 1 at
/// the last; without annealing it is held at 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnealSchedule {
    pub anneal: bool,
    pub total: usize,
}

impl AnnealSchedule {
    pub fn alpha_at(&self, t: usize) -> Result<f64> {
        if t > self.total {
            return Err(Error::Range {
                step: t,
                horizon: self.total,
            });
        }
        if !self.anneal || self.total == 0 {
            return Ok(1.0);
        }
        Ok(t as f64 / self.total as f64)
    }
}
