//! Simulated foundation-model teacher and the pseudo-label interchange format.

mod file;
mod generate;
mod presets;

pub use file::{load, parse, save, serialize};
pub use generate::{generate, zero_shot_accuracy};
pub use presets::{preset, PRESETS};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How a wrong pseudo-label is chosen once the teacher misses.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Confusion {
    /// Uniformly among the other K−1 classes.
    UniformWrong,
    /// Always the next class, `(y + 1) mod K`.
    AdjacentClass,
    /// Row-stochastic `P(ŷ | y)`; row `y` gives the hit rate on its diagonal
    /// and the miss distribution off it.
    Custom(Vec<Vec<f64>>),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingSpec {
    pub dim: usize,
    pub noise: f64,
    /// Norm of the per-class prototype vectors.
    pub scale: f64,
}

impl EmbeddingSpec {
    pub fn new(dim: usize, noise: f64) -> Self {
        Self { dim, noise, scale: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleSpec {
    pub name: String,
    pub num_classes: usize,
    pub accuracy: f64,
    pub confusion: Confusion,
    pub fallback_rate: f64,
    pub default_class: usize,
    pub embedding: Option<EmbeddingSpec>,
    /// Emit soft distributions `(1−s)·onehot(ŷ) + s/K`.
    pub soft_smoothing: Option<f64>,
    pub seed: u64,
}

impl OracleSpec {
    pub fn new(num_classes: usize, accuracy: f64, seed: u64) -> Self {
        Self {
            name: format!("sim-a{accuracy}"),
            num_classes,
            accuracy,
            confusion: Confusion::UniformWrong,
            fallback_rate: 0.0,
            default_class: 0,
            embedding: None,
            soft_smoothing: None,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.num_classes;
        let bad = |m: String| Err(Error::Config(m));
        if k < 2 {
            return bad(format!("oracle needs at least 2 classes, got {k}"));
        }
        if !(0.0..=1.0).contains(&self.accuracy) || !(0.0..=1.0).contains(&self.fallback_rate) {
            return bad("oracle accuracy and fallback rate must lie in [0,1]".into());
        }
        if self.default_class >= k {
            return bad(format!("default class {} outside 0..{k}", self.default_class));
        }
        if let Some(s) = self.soft_smoothing {
            if !(0.0..1.0).contains(&s) {
                return bad(format!("soft smoothing {s} outside [0,1)"));
            }
        }
        if let Confusion::Custom(m) = &self.confusion {
            if m.len() != k || m.iter().any(|r| r.len() != k) {
                return bad(format!("custom confusion matrix must be {k}x{k}"));
            }
            for (i, row) in m.iter().enumerate() {
                if row.iter().any(|&p| p < 0.0) || (row.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                    return bad(format!("custom confusion row {i} is not a distribution"));
                }
            }
            let diag = (0..k).map(|i| m[i][i]).sum::<f64>() / k as f64;
            if (diag - self.accuracy).abs() > 1e-9 {
                return bad(format!("custom confusion diagonal mean {diag} disagrees with accuracy {}", self.accuracy));
            }
        }
        Ok(())
    }

    pub fn descriptor(&self) -> String {
        self.name.clone()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PseudoRecord {
    pub hard: usize,
    pub soft: Option<Vec<f64>>,
    pub embedding: Option<Vec<f64>>,
}

/// Per-sample teacher outputs keyed by global sample index.
#[derive(Clone, Debug, PartialEq)]
pub struct PseudoLabelSet {
    pub num_classes: usize,
    pub embed_dim: usize,
    pub source: String,
    pub seed: u64,
    pub records: BTreeMap<usize, PseudoRecord>,
}

impl PseudoLabelSet {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<&PseudoRecord> {
        self.records.get(&index)
    }

    pub fn has_embeddings(&self) -> bool {
        self.embed_dim > 0 && self.records.values().all(|r| r.embedding.is_some())
    }

    fn missing(&self, indices: &[usize]) -> Vec<usize> {
        indices.iter().copied().filter(|i| !self.records.contains_key(i)).collect()
    }

    pub fn ensure_covers(&self, indices: &[usize]) -> Result<()> {
        let missing = self.missing(indices);
        if missing.is_empty() {
            Ok(())
        } else {
            Err(Error::Coverage { missing })
        }
    }

    pub fn hard_labels(&self, indices: &[usize]) -> Result<Vec<usize>> {
        self.ensure_covers(indices)?;
        Ok(indices.iter().map(|i| self.records[i].hard).collect())
    }

    pub fn embeddings(&self, indices: &[usize]) -> Result<Vec<Vec<f64>>> {
        self.ensure_covers(indices)?;
        indices
            .iter()
            .map(|i| {
                self.records[i]
                    .embedding
                    .clone()
                    .ok_or_else(|| Error::Config(format!("pseudo-label {i} carries no embedding")))
            })
            .collect()
    }

    /// Check the structural invariants on every record.
    pub fn validate(&self) -> Result<()> {
        for (&index, r) in &self.records {
            if r.hard >= self.num_classes {
                return Err(Error::Validation {
                    index,
                    message: format!("label {} outside 0..{}", r.hard, self.num_classes),
                });
            }
            if let Some(p) = &r.soft {
                if p.len() != self.num_classes {
                    return Err(Error::Validation {
                        index,
                        message: format!("soft distribution has {} entries, expected {}", p.len(), self.num_classes),
                    });
                }
                let sum: f64 = p.iter().sum();
                if (sum - 1.0).abs() > 1e-9 || p.iter().any(|&v| v < 0.0) {
                    return Err(Error::Validation {
                        index,
                        message: format!("soft distribution sums to {sum}"),
                    });
                }
                if crate::tensor::argmax(p) != r.hard {
                    return Err(Error::Validation {
                        index,
                        message: "soft distribution argmax differs from hard label".into(),
                    });
                }
            }
            if let Some(e) = &r.embedding {
                if e.len() != self.embed_dim {
                    return Err(Error::Validation {
                        index,
                        message: format!("embedding has {} entries, expected {}", e.len(), self.embed_dim),
                    });
                }
            }
        }
        Ok(())
    }
}
