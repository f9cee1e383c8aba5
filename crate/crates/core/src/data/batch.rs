use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::SemiDataset;
use crate::error::{Error, Result};

/// Shuffled cycling over a fixed index set; reshuffles at every epoch boundary.
#[derive(Clone, Debug)]
pub struct Cycler {
    items: Vec<usize>,
    order: Vec<usize>,
    pos: usize,
    rng: ChaCha8Rng,
}

impl Cycler {
    pub fn new(items: Vec<usize>, seed: u64) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::Config("cannot draw batches from an empty index set".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order = items.clone();
        order.shuffle(&mut rng);
        Ok(Self {
            items,
            order,
            pos: 0,
            rng,
        })
    }

    pub fn next_batch(&mut self, size: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(size);
        while out.len() < size {
            if self.pos == self.order.len() {
                self.order.clone_from(&self.items);
                self.order.shuffle(&mut self.rng);
                self.pos = 0;
            }
            out.push(self.order[self.pos]);
            self.pos += 1;
        }
        out
    }
}

/// Paired labeled/unlabeled batch stream with independent RNG streams.
#[derive(Clone, Debug)]
pub struct BatchIter {
    labeled: Cycler,
    unlabeled: Cycler,
    batch_labeled: usize,
    batch_unlabeled: usize,
}

impl BatchIter {
    pub fn new(ds: &SemiDataset, batch_labeled: usize, batch_unlabeled: usize, seed: u64) -> Result<Self> {
        if ds.labeled_indices.is_empty() {
            return Err(Error::Config("labeled set is empty".into()));
        }
        Ok(Self {
            labeled: Cycler::new(ds.labeled_indices.clone(), seed ^ 0x4c41_4245_4c45_4400)?,
            unlabeled: Cycler::new(ds.unlabeled_pool(), seed ^ 0x554e_4c41_4245_4c00)?,
            batch_labeled,
            batch_unlabeled,
        })
    }
}

impl Iterator for BatchIter {
    type Item = (Vec<usize>, Vec<usize>);

    fn next(&mut self) -> Option<Self::Item> {
        Some((
            self.labeled.next_batch(self.batch_labeled),
            self.unlabeled.next_batch(self.batch_unlabeled),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_blobs, split_semisupervised, BlobSpec};

    fn ds() -> SemiDataset {
        let base = gen_blobs(&BlobSpec {
            n_per_class: 10,
            dim: 4,
            ..Default::default()
        })
        .unwrap();
        split_semisupervised(&base, 1, 3).unwrap()
    }

    #[test]
    fn full_labeled_batch_is_permutation() {
        let ds = ds();
        let it = BatchIter::new(&ds, 4, 8, 0).unwrap();
        for (lab, _) in it.take(10) {
            let mut sorted = lab.clone();
            sorted.sort_unstable();
            assert_eq!(sorted, ds.labeled_indices);
        }
    }

    #[test]
    fn one_unlabeled_cycle_covers_each_index_once() {
        let ds = ds();
        let n = ds.n_train();
        let mut c = Cycler::new(ds.unlabeled_pool(), 7).unwrap();
        let mut seen = c.next_batch(n);
        seen.sort_unstable();
        assert_eq!(seen, ds.unlabeled_pool());
    }

    #[test]
    fn same_seed_same_stream() {
        let ds = ds();
        let a: Vec<_> = BatchIter::new(&ds, 3, 5, 9).unwrap().take(20).collect();
        let b: Vec<_> = BatchIter::new(&ds, 3, 5, 9).unwrap().take(20).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_labeled_set_is_config_error() {
        let mut d = ds();
        d.labeled_indices.clear();
        assert!(matches!(BatchIter::new(&d, 1, 1, 0), Err(Error::Config(_))));
    }
}
