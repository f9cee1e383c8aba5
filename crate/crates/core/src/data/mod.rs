//! Synthetic Gaussian-blob classification data and the semi-supervised split.
//!
//! Samples are addressed by a stable global index: train rows are
//! `0..n_train`, test rows follow at `n_train..n_train + n_test`.

mod augment;
mod batch;
mod blobs;
mod io;

pub use augment::{AugmentorPair, View};
pub use batch::{BatchIter, Cycler};
pub use blobs::{gen_blobs, BlobSpec};
pub use io::{export_dataset, import_dataset, DatasetMeta};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SemiDataset {
    pub num_classes: usize,
    pub train_features: Tensor<f64>,
    pub train_labels: Vec<usize>,
    pub test_features: Tensor<f64>,
    pub test_labels: Vec<usize>,
    /// Train rows whose labels are revealed; sorted ascending.
    pub labeled_indices: Vec<usize>,
    pub seed: u64,
    /// Generator that produced the data, when synthetic.
    pub generator: Option<BlobSpec>,
    /// True class means, when known.
    pub class_means: Option<Vec<Vec<f64>>>,
}

impl SemiDataset {
    pub fn dim(&self) -> usize {
        self.train_features.dims2().1
    }

    pub fn n_train(&self) -> usize {
        self.train_labels.len()
    }

    pub fn n_test(&self) -> usize {
        self.test_labels.len()
    }

    /// Every train input, labeled ones included.
    pub fn unlabeled_pool(&self) -> Vec<usize> {
        (0..self.n_train()).collect()
    }

    pub fn global_index(&self, split: Split, row: usize) -> usize {
        match split {
            Split::Train => row,
            Split::Test => self.n_train() + row,
        }
    }

    pub fn features(&self, split: Split) -> &Tensor<f64> {
        match split {
            Split::Train => &self.train_features,
            Split::Test => &self.test_features,
        }
    }

    pub fn labels(&self, split: Split) -> &[usize] {
        match split {
            Split::Train => &self.train_labels,
            Split::Test => &self.test_labels,
        }
    }

    pub fn labeled_labels(&self) -> Vec<usize> {
        self.labeled_indices.iter().map(|&i| self.train_labels[i]).collect()
    }

    /// Gather train rows into a `[len×d]` matrix.
    pub fn gather(&self, split: Split, rows: &[usize]) -> Vec<Vec<f64>> {
        let feats = self.features(split);
        rows.iter().map(|&r| feats.row(r).to_vec()).collect()
    }

    pub fn class_counts(&self, indices: &[usize]) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &i in indices {
            counts[self.train_labels[i]] += 1;
        }
        counts
    }
}

/// Reveal exactly `k_per_class` labels per class, sampled without replacement.
pub fn split_semisupervised(ds: &SemiDataset, k_per_class: usize, seed: u64) -> Result<SemiDataset> {
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); ds.num_classes];
    for (i, &y) in ds.train_labels.iter().enumerate() {
        by_class[y].push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labeled = Vec::with_capacity(k_per_class * ds.num_classes);
    for (class, members) in by_class.iter_mut().enumerate() {
        if members.len() < k_per_class {
            return Err(Error::Split {
                class,
                available: members.len(),
                requested: k_per_class,
            });
        }
        members.shuffle(&mut rng);
        labeled.extend_from_slice(&members[..k_per_class]);
    }
    labeled.sort_unstable();
    Ok(SemiDataset {
        labeled_indices: labeled,
        ..ds.clone()
    })
}
