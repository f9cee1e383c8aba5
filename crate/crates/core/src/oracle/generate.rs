use std::collections::BTreeMap;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{Confusion, OracleSpec, PseudoLabelSet, PseudoRecord};
use crate::data::{SemiDataset, Split};
use crate::error::{Error, Result};

fn draw_label<R: Rng>(spec: &OracleSpec, truth: usize, rng: &mut R) -> usize {
    let k = spec.num_classes;
    if rng.gen::<f64>() < spec.fallback_rate {
        return spec.default_class;
    }
    let hit = match &spec.confusion {
        Confusion::Custom(m) => m[truth][truth],
        _ => spec.accuracy,
    };
    if rng.gen::<f64>() < hit {
        return truth;
    }
    match &spec.confusion {
        Confusion::UniformWrong => {
            let j = rng.gen_range(0..k - 1);
            if j >= truth {
                j + 1
            } else {
                j
            }
        }
        Confusion::AdjacentClass => (truth + 1) % k,
        Confusion::Custom(m) => {
            let weights: Vec<f64> = (0..k).map(|j| if j == truth { 0.0 } else { m[truth][j] }).collect();
            match WeightedIndex::new(&weights) {
                Ok(dist) => dist.sample(rng),
                // Diagonal row of 1: the miss branch has zero probability.
                Err(_) => truth,
            }
        }
    }
}

/// Simulate one teacher query per sample.
///
/// Labels, soft outputs and embeddings draw from separate seeded streams, so
/// switching embeddings on does not change any hard label.
pub fn generate(spec: &OracleSpec, ds: &SemiDataset, include_test: bool) -> Result<PseudoLabelSet> {
    spec.validate()?;
    if spec.num_classes != ds.num_classes {
        return Err(Error::Config(format!(
            "oracle built for {} classes, dataset has {}",
            spec.num_classes, ds.num_classes
        )));
    }
    let k = spec.num_classes;
    let mut label_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut embed_rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x9e37_79b9_7f4a_7c15);
    let prototypes: Option<Vec<Vec<f64>>> = spec.embedding.map(|e| {
        (0..k)
            .map(|_| {
                let v: Vec<f64> = (0..e.dim).map(|_| embed_rng.sample(StandardNormal)).collect();
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
                v.into_iter().map(|x| x * e.scale / norm).collect()
            })
            .collect()
    });
    let mut splits = vec![Split::Train];
    if include_test {
        splits.push(Split::Test);
    }
    let mut records = BTreeMap::new();
    for split in splits {
        for (row, &truth) in ds.labels(split).iter().enumerate() {
            let hard = draw_label(spec, truth, &mut label_rng);
            let soft = spec.soft_smoothing.map(|s| {
                (0..k)
                    .map(|j| if j == hard { 1.0 - s + s / k as f64 } else { s / k as f64 })
                    .collect()
            });
            let embedding = match (&prototypes, spec.embedding) {
                (Some(protos), Some(e)) => Some(
                    protos[hard]
                        .iter()
                        .map(|&p| p + e.noise * embed_rng.sample::<f64, _>(StandardNormal))
                        .collect(),
                ),
                _ => None,
            };
            records.insert(ds.global_index(split, row), PseudoRecord { hard, soft, embedding });
        }
    }
    Ok(PseudoLabelSet {
        num_classes: k,
        embed_dim: spec.embedding.map_or(0, |e| e.dim),
        source: spec.descriptor(),
        seed: spec.seed,
        records,
    })
}

/// Fraction of the split whose pseudo-label equals the ground truth.
pub fn zero_shot_accuracy(pls: &PseudoLabelSet, ds: &SemiDataset, split: Split) -> Result<f64> {
    let labels = ds.labels(split);
    let indices: Vec<usize> = (0..labels.len()).map(|r| ds.global_index(split, r)).collect();
    let hard = pls.hard_labels(&indices)?;
    if labels.is_empty() {
        return Ok(0.0);
    }
    let hits = hard.iter().zip(labels).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / labels.len() as f64)
}
