use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::SemiDataset;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

const MAX_REJECTIONS: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlobSpec {
    pub classes: usize,
    pub dim: usize,
    pub n_per_class: usize,
    pub separation: f64,
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for BlobSpec {
    fn default() -> Self {
        Self {
            classes: 4,
            dim: 16,
            n_per_class: 250,
            separation: 4.0,
            test_fraction: 0.2,
            seed: 0,
        }
    }
}

impl BlobSpec {
    fn validate(&self) -> Result<()> {
        if self.classes < 2 || self.dim < 2 || !(self.separation > 0.0) || !(0.0..1.0).contains(&self.test_fraction) {
            return Err(Error::Config(format!(
                "blobs need K >= 2, d >= 2, separation > 0 and test fraction in [0,1): {self:?}"
            )));
        }
        Ok(())
    }

    /// Class means at `separation` times random unit directions, any two at
    /// least 60 degrees apart.
    pub fn class_means<R: Rng>(&self, rng: &mut R) -> Result<Vec<Vec<f64>>> {
        let mut dirs: Vec<Vec<f64>> = Vec::with_capacity(self.classes);
        let mut rejections = 0;
        while dirs.len() < self.classes {
            let mut v: Vec<f64> = (0..self.dim).map(|_| rng.sample(StandardNormal)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.iter_mut().for_each(|x| *x /= norm);
            let ok = dirs
                .iter()
                .all(|d| d.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>() <= 0.5);
            if ok {
                dirs.push(v);
            } else {
                rejections += 1;
                if rejections >= MAX_REJECTIONS {
                    return Err(Error::Generation {
                        classes: self.classes,
                        dim: self.dim,
                    });
                }
            }
        }
        Ok(dirs
            .into_iter()
            .map(|d| d.into_iter().map(|x| x * self.separation).collect())
            .collect())
    }
}

/// Draw a unit-variance isotropic sample around `mean`.
pub(crate) fn sample_around<R: Rng>(mean: &[f64], rng: &mut R) -> Vec<f64> {
    mean.iter().map(|m| m + rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Balanced isotropic Gaussian blobs with a stratified held-out test split.
pub fn gen_blobs(spec: &BlobSpec) -> Result<SemiDataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let means = spec.class_means(&mut rng)?;
    let n_test_per_class = (spec.n_per_class as f64 * spec.test_fraction).round() as usize;
    let mut train: Vec<(Vec<f64>, usize)> = Vec::new();
    let mut test: Vec<(Vec<f64>, usize)> = Vec::new();
    for (class, mean) in means.iter().enumerate() {
        for i in 0..spec.n_per_class {
            let x = sample_around(mean, &mut rng);
            if i < n_test_per_class {
                test.push((x, class));
            } else {
                train.push((x, class));
            }
        }
    }
    train.shuffle(&mut rng);
    test.shuffle(&mut rng);
    let pack = |rows: Vec<(Vec<f64>, usize)>| -> Result<(Tensor<f64>, Vec<usize>)> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * spec.dim);
        let mut labels = Vec::with_capacity(n);
        for (x, y) in rows {
            data.extend(x);
            labels.push(y);
        }
        Ok((Tensor::new(vec![n, spec.dim], data)?, labels))
    };
    let (train_features, train_labels) = pack(train)?;
    let (test_features, test_labels) = pack(test)?;
    Ok(SemiDataset {
        num_classes: spec.classes,
        train_features,
        train_labels,
        test_features,
        test_labels,
        labeled_indices: Vec::new(),
        seed: spec.seed,
        generator: Some(*spec),
        class_means: Some(means),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_arithmetic() {
        let ds = gen_blobs(&BlobSpec {
            n_per_class: 100,
            ..Default::default()
        })
        .unwrap();
        assert_eq!(ds.n_train(), 320);
        assert_eq!(ds.n_test(), 80);
        let mut counts = [0usize; 4];
        ds.train_labels.iter().for_each(|&y| counts[y] += 1);
        assert_eq!(counts, [80; 4]);
        ds.test_labels.iter().for_each(|&y| counts[y] += 1);
        assert_eq!(counts, [100; 4]);
    }

    #[test]
    fn regeneration_is_bit_identical() {
        let spec = BlobSpec::default();
        assert_eq!(gen_blobs(&spec).unwrap(), gen_blobs(&spec).unwrap());
    }

    #[test]
    fn means_respect_angle() {
        let ds = gen_blobs(&BlobSpec::default()).unwrap();
        let means = ds.class_means.unwrap();
        for i in 0..means.len() {
            for j in 0..i {
                let dot: f64 = means[i].iter().zip(&means[j]).map(|(a, b)| a * b).sum();
                assert!(dot / 16.0 <= 0.5 + 1e-12);
            }
        }
    }

    #[test]
    fn infeasible_angle_is_reported() {
        let spec = BlobSpec {
            classes: 12,
            dim: 2,
            ..Default::default()
        };
        assert!(matches!(gen_blobs(&spec), Err(Error::Generation { classes: 12, dim: 2 })));
    }
}
