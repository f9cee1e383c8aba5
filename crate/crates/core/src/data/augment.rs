use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum View {
    Weak,
    Strong,
}

/// Vector-space weak/strong augmentation: additive Gaussian noise, plus
/// independent per-coordinate zeroing for the strong view.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentorPair {
    pub weak_sigma: f64,
    pub strong_sigma: f64,
    pub mask_rate: f64,
}

impl Default for AugmentorPair {
    fn default() -> Self {
        Self {
            weak_sigma: 0.05,
            strong_sigma: 0.5,
            mask_rate: 0.2,
        }
    }
}

impl AugmentorPair {
    pub fn is_valid(&self) -> bool {
        self.weak_sigma >= 0.0 && self.weak_sigma <= self.strong_sigma && (0.0..=1.0).contains(&self.mask_rate)
    }

    pub fn augment<R: Rng + ?Sized>(&self, x: &[f64], view: View, rng: &mut R) -> Vec<f64> {
        match view {
            View::Weak => x
                .iter()
                .map(|&v| v + self.weak_sigma * rng.sample::<f64, _>(StandardNormal))
                .collect(),
            View::Strong => x
                .iter()
                .map(|&v| {
                    let noisy = v + self.strong_sigma * rng.sample::<f64, _>(StandardNormal);
                    if rng.gen::<f64>() < self.mask_rate {
                        0.0
                    } else {
                        noisy
                    }
                })
                .collect(),
        }
    }

    pub fn augment_rows<R: Rng + ?Sized>(&self, rows: &[Vec<f64>], view: View, rng: &mut R) -> Vec<Vec<f64>> {
        rows.iter().map(|r| self.augment(r, view, rng)).collect()
    }
}
