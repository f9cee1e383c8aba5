use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Running class-marginal estimates used to rescale weak-view predictions
/// on unlabeled data toward the labeled-data marginal.
#[derive(Clone, Debug, PartialEq)]
pub struct DistributionAligner<S> {
    pub labeled: Vec<S>,
    pub unlabeled: Vec<S>,
    pub momentum: S,
}

fn normalize<S: Scalar>(v: &mut [S]) {
    let total: S = v.iter().copied().sum();
    if total > S::zero() {
        v.iter_mut().for_each(|x| *x /= total);
    }
}

fn batch_mean<S: Scalar>(probs: &Tensor<S>) -> Vec<S> {
    let (m, k) = probs.dims2();
    let mut mean = vec![S::zero(); k];
    for i in 0..m {
        for (acc, &p) in mean.iter_mut().zip(probs.row(i)) {
            *acc += p;
        }
    }
    let n = S::from_usize(m.max(1)).unwrap();
    mean.iter_mut().for_each(|x| *x /= n);
    mean
}

impl<S: Scalar> DistributionAligner<S> {
    /// Both estimates start uniform.
    pub fn new(num_classes: usize, momentum: f64) -> Self {
        let u = S::one() / S::from_usize(num_classes).unwrap();
        Self {
            labeled: vec![u; num_classes],
            unlabeled: vec![u; num_classes],
            momentum: S::lit(momentum),
        }
    }

    /// `normalize(p ⊙ labeled / (unlabeled + ε))`, row by row.
    pub fn align(&self, probs: &Tensor<S>) -> Tensor<S> {
        let (_, k) = probs.dims2();
        let eps = S::log_floor();
        let ratio: Vec<S> = self
            .labeled
            .iter()
            .zip(&self.unlabeled)
            .map(|(&l, &u)| l / (u + eps))
            .collect();
        let mut out = probs.data().to_vec();
        for row in out.chunks_mut(k) {
            for (p, &r) in row.iter_mut().zip(&ratio) {
                *p *= r;
            }
            normalize(row);
        }
        Tensor::new(probs.shape().to_vec(), out).expect("same shape")
    }

    /// EMA update from weak-view predictions on a labeled and an unlabeled batch.
    pub fn update(&mut self, labeled_probs: &Tensor<S>, unlabeled_probs: &Tensor<S>) {
        let m = self.momentum;
        let one = S::one();
        for (ema, probs) in [(&mut self.labeled, labeled_probs), (&mut self.unlabeled, unlabeled_probs)] {
            for (e, b) in ema.iter_mut().zip(batch_mean(probs)) {
                *e = m * *e + (one - m) * b;
            }
            normalize(ema);
        }
    }
}
