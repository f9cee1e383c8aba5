//! Training objectives, expressed over probability nodes already on a tape.

use crate::autodiff::{Graph, Target, Var};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{argmax, Tensor};

use super::align::DistributionAligner;

fn count<S: Scalar>(n: usize) -> S {
    S::from_usize(n).unwrap()
}

fn summed_ce<S: Scalar>(g: &mut Graph<S>, probs: Var, labels: &[usize]) -> Result<Var> {
    let ce = g.cross_entropy(probs, Target::Hard(labels.to_vec()))?;
    Ok(g.sum(ce))
}

fn nonempty(n: usize, what: &str) -> Result<()> {
    if n == 0 {
        return Err(Error::Config(format!("{what} batch is empty")));
    }
    Ok(())
}

/// `(1/B_L) Σ H(y_i, p(y|x_i))`.
pub fn supervised<S: Scalar>(g: &mut Graph<S>, probs: Var, labels: &[usize]) -> Result<Var> {
    nonempty(labels.len(), "labeled")?;
    let ce = g.cross_entropy(probs, Target::Hard(labels.to_vec()))?;
    Ok(g.mean(ce))
}

/// Stage-1 distillation: mean cross-entropy of the main head against teacher
/// labels over a pooled batch.
pub fn distillation<S: Scalar>(g: &mut Graph<S>, probs: Var, teacher: &[usize]) -> Result<Var> {
    nonempty(teacher.len(), "distillation")?;
    let ce = g.cross_entropy(probs, Target::Hard(teacher.to_vec()))?;
    Ok(g.mean(ce))
}

/// Soft-target variant of [`distillation`].
pub fn distillation_soft<S: Scalar>(g: &mut Graph<S>, probs: Var, teacher: Tensor<S>) -> Result<Var> {
    nonempty(teacher.dims2().0, "distillation")?;
    let ce = g.cross_entropy(probs, Target::Soft(teacher))?;
    Ok(g.mean(ce))
}

/// Result of the confidence-masked consistency loss.
#[derive(Clone, Debug)]
pub struct Unsupervised {
    pub loss: Var,
    pub mask_rate: f64,
    /// Hardened targets, one per sample (including masked ones).
    pub targets: Vec<usize>,
    pub mask: Vec<bool>,
}

/// Hard targets and confidence mask from aligned weak-view predictions.
/// A sample passes iff its top aligned probability is strictly above `tau`.
pub fn confidence_mask<S: Scalar>(aligned: &Tensor<S>, tau: f64) -> (Vec<usize>, Vec<bool>) {
    let (m, _) = aligned.dims2();
    let tau = S::lit(tau);
    (0..m)
        .map(|i| {
            let row = aligned.row(i);
            let t = argmax(row);
            (t, row[t] > tau)
        })
        .unzip()
}

/// `(1/B_U) Σ 1(max p̂^w_i > τ) H(argmax p̂^w_i, p^s_i)`.
///
/// `weak` holds detached weak-view probabilities; `strong` is the strong-view
/// node that receives the gradient.
pub fn unsupervised<S: Scalar>(
    g: &mut Graph<S>,
    weak: &Tensor<S>,
    aligner: &DistributionAligner<S>,
    tau: f64,
    strong: Var,
) -> Result<Unsupervised> {
    let (b, _) = weak.dims2();
    nonempty(b, "unlabeled")?;
    let aligned = aligner.align(weak);
    let (targets, mask) = confidence_mask(&aligned, tau);
    let inv_b = S::one() / count::<S>(b);
    let weights: Vec<S> = mask.iter().map(|&keep| if keep { inv_b } else { S::zero() }).collect();
    let ce = g.cross_entropy(strong, Target::Hard(targets.clone()))?;
    let loss = g.weighted_sum(ce, weights)?;
    let passed = mask.iter().filter(|&&k| k).count();
    Ok(Unsupervised {
        loss,
        mask_rate: passed as f64 / b as f64,
        targets,
        mask,
    })
}

/// `(1/B)(Σ_L H(ŷ^L, q) + Σ_U H(ŷ^U, q))` with `B = B_L + B_U`.
pub fn aux_distillation<S: Scalar>(
    g: &mut Graph<S>,
    q_labeled: Var,
    teacher_labeled: &[usize],
    q_unlabeled: Var,
    teacher_unlabeled: &[usize],
) -> Result<Var> {
    pooled(g, q_labeled, teacher_labeled, q_unlabeled, teacher_unlabeled)
}

fn pooled<S: Scalar>(g: &mut Graph<S>, pa: Var, ya: &[usize], pb: Var, yb: &[usize]) -> Result<Var> {
    let total = ya.len() + yb.len();
    nonempty(total, "pooled")?;
    let sa = summed_ce(g, pa, ya)?;
    let sb = summed_ce(g, pb, yb)?;
    let s = g.add(sa, sb)?;
    Ok(g.scale(s, S::one() / count::<S>(total)))
}

/// Components of the stage-2 objective.
#[derive(Clone, Debug)]
pub struct Stage2 {
    pub total: Var,
    pub supervised: f64,
    pub unsupervised: f64,
    pub alpha: f64,
    pub aux: f64,
}

/// `L_s + L_u + α_t·λ_p·L_KD₂`.
pub fn stage2_total<S: Scalar>(
    g: &mut Graph<S>,
    supervised: Var,
    unsupervised: Var,
    aux: Var,
    alpha: f64,
    lambda: f64,
) -> Result<Stage2> {
    let base = g.add(supervised, unsupervised)?;
    let weighted = g.scale(aux, S::lit(alpha * lambda));
    let total = g.add(base, weighted)?;
    Ok(Stage2 {
        total,
        supervised: g.value(supervised).item().as_f64(),
        unsupervised: g.value(unsupervised).item().as_f64(),
        alpha,
        aux: g.value(aux).item().as_f64(),
    })
}

/// Pseudo-supervision: `(1/B)(Σ_L H(y, p) + Σ_U H(ŷ^U, p))`.
pub fn pseudo_supervise<S: Scalar>(
    g: &mut Graph<S>,
    p_labeled: Var,
    labels: &[usize],
    p_unlabeled: Var,
    teacher_unlabeled: &[usize],
) -> Result<Var> {
    pooled(g, p_labeled, labels, p_unlabeled, teacher_unlabeled)
}

/// Doubly-robust self-training objective:
/// `(α/B_L)Σ H(y,p) − (α/B_L)Σ H(ŷ^L,p) + (1/B)(Σ_L H(ŷ^L,p) + Σ_U H(ŷ^U,p))`.
pub fn doubly_robust<S: Scalar>(
    g: &mut Graph<S>,
    p_labeled: Var,
    labels: &[usize],
    teacher_labeled: &[usize],
    p_unlabeled: Var,
    teacher_unlabeled: &[usize],
    alpha: f64,
) -> Result<Var> {
    nonempty(labels.len(), "labeled")?;
    let w = S::lit(alpha) / count::<S>(labels.len());
    let truth = summed_ce(g, p_labeled, labels)?;
    let truth = g.scale(truth, w);
    let teach = summed_ce(g, p_labeled, teacher_labeled)?;
    let teach = g.scale(teach, w);
    let correction = g.sub(truth, teach)?;
    let pooled = pooled(g, p_labeled, teacher_labeled, p_unlabeled, teacher_unlabeled)?;
    g.add(correction, pooled)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn probs(g: &mut Graph<f64>, rows: &[&[f64]]) -> Var {
        let t = Tensor::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap();
        g.param(t)
    }

    fn val(g: &Graph<f64>, v: Var) -> f64 {
        g.value(v).item()
    }

    #[test]
    fn supervised_examples() {
        let mut g = Graph::new();
        let p = probs(&mut g, &[&[1.0, 0.0], &[0.0, 1.0]]);
        let l = supervised(&mut g, p, &[0, 1]).unwrap();
        assert!(val(&g, l).abs() < 1e-11);
        let p = probs(&mut g, &[&[0.25; 4]]);
        let l = supervised(&mut g, p, &[2]).unwrap();
        assert!((val(&g, l) - 4f64.ln()).abs() < 1e-11);
        let p = probs(&mut g, &[&[0.5, 0.5, 0.0, 0.0], &[0.25, 0.25, 0.25, 0.25]]);
        let l = supervised(&mut g, p, &[0, 3]).unwrap();
        assert!((val(&g, l) - 1.039_720_770_839_917_9).abs() < 1e-11);
        assert!(supervised(&mut g, p, &[]).is_err());
    }

    #[test]
    fn unsupervised_examples() {
        let ident = DistributionAligner::<f64>::new(2, 0.999);
        let weak = Tensor::from_rows(&[vec![0.97, 0.03]]).unwrap();
        let mut g = Graph::new();
        let strong = probs(&mut g, &[&[0.8, 0.2]]);
        let u = unsupervised(&mut g, &weak, &ident, 0.95, strong).unwrap();
        assert!((val(&g, u.loss) - 0.223_143_551_314_209_7).abs() < 1e-11);
        assert_eq!(u.mask_rate, 1.0);

        let u = unsupervised(&mut g, &weak, &ident, 1.0, strong).unwrap();
        assert_eq!(val(&g, u.loss), 0.0);
        assert_eq!(u.mask_rate, 0.0);

        let confident = Tensor::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let s = probs(&mut g, &[&[1.0, 0.0], &[0.0, 1.0]]);
        let u = unsupervised(&mut g, &confident, &ident, 0.0, s).unwrap();
        assert!(val(&g, u.loss).abs() < 1e-11);
    }

    #[test]
    fn masked_out_batch_has_zero_gradient() {
        let ident = DistributionAligner::<f64>::new(3, 0.999);
        let weak = Tensor::from_rows(&[vec![0.5, 0.3, 0.2], vec![0.4, 0.4, 0.2]]).unwrap();
        let mut g = Graph::new();
        let strong = probs(&mut g, &[&[0.2, 0.3, 0.5], &[0.1, 0.1, 0.8]]);
        let u = unsupervised(&mut g, &weak, &ident, 0.95, strong).unwrap();
        g.backward(u.loss).unwrap();
        assert!(g.grad(strong).unwrap().data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn distillation_examples() {
        let mut g = Graph::new();
        let p = probs(&mut g, &[&[0.5, 0.5]]);
        let l = distillation(&mut g, p, &[1]).unwrap();
        assert!((val(&g, l) - 2f64.ln()).abs() < 1e-11);
        let p = probs(&mut g, &[&[0.9, 0.1], &[0.1, 0.9]]);
        let l = distillation(&mut g, p, &[0, 0]).unwrap();
        assert!((val(&g, l) - 1.203_972_804_325_935_9).abs() < 1e-11);
    }

    #[test]
    fn aux_examples() {
        let mut g = Graph::new();
        let ql = probs(&mut g, &[&[0.25; 4]]);
        let qu = probs(&mut g, &[&[0.25; 4]]);
        let l = aux_distillation(&mut g, ql, &[1], qu, &[3]).unwrap();
        assert!((val(&g, l) - 4f64.ln()).abs() < 1e-11);
        let ql = probs(&mut g, &[&[0.0, 1.0]]);
        let qu = probs(&mut g, &[&[1.0, 0.0]]);
        let l = aux_distillation(&mut g, ql, &[1], qu, &[0]).unwrap();
        assert!(val(&g, l).abs() < 1e-11);
    }

    #[test]
    fn stage2_arithmetic() {
        let mut g = Graph::<f64>::new();
        let ls = g.param(Tensor::scalar(1.0));
        let lu = g.param(Tensor::scalar(0.5));
        let kd = g.param(Tensor::scalar(0.8));
        let s = stage2_total(&mut g, ls, lu, kd, 0.5, 1.0).unwrap();
        assert!((val(&g, s.total) - 1.9).abs() < 1e-12);
        assert_eq!(val(&g, s.total), 1.0 + 0.5 + 0.5 * 1.0 * 0.8);
        let s = stage2_total(&mut g, ls, lu, kd, 0.7, 0.0).unwrap();
        assert_eq!(val(&g, s.total), 1.5);
        let s = stage2_total(&mut g, ls, lu, kd, 0.0, 1.0).unwrap();
        assert_eq!(val(&g, s.total), 1.5);
    }

    #[test]
    fn pseudo_supervise_examples() {
        let mut g = Graph::new();
        let pl = probs(&mut g, &[&[1.0, 0.0]]);
        let pu = probs(&mut g, &[&[0.0, 1.0]]);
        let l = pseudo_supervise(&mut g, pl, &[0], pu, &[1]).unwrap();
        assert!(val(&g, l).abs() < 1e-11);
        // Model right, teacher wrong on the unlabeled sample with prob ε on its label.
        let mut last = 0.0;
        for eps in [1e-2, 1e-4, 1e-8] {
            let pu = probs(&mut g, &[&[1.0 - eps, eps]]);
            let l = pseudo_supervise(&mut g, pl, &[0], pu, &[1]).unwrap();
            let v = val(&g, l);
            assert!((v - (-(eps + 1e-12f64).ln()) / 2.0).abs() < 1e-9);
            assert!(v > last);
            last = v;
        }
        // B_L = B_U = 2, evaluated by hand.
        let pl = probs(&mut g, &[&[0.5, 0.5], &[0.2, 0.8]]);
        let pu = probs(&mut g, &[&[0.9, 0.1], &[0.4, 0.6]]);
        let l = pseudo_supervise(&mut g, pl, &[0, 1], pu, &[1, 1]).unwrap();
        let expect = -(0.5f64.ln() + 0.8f64.ln() + 0.1f64.ln() + 0.6f64.ln()) / 4.0;
        assert!((val(&g, l) - expect).abs() < 1e-11);
    }

    #[test]
    fn doubly_robust_examples() {
        let mut g = Graph::new();
        let pl = probs(&mut g, &[&[0.7, 0.3]]);
        let pu = probs(&mut g, &[&[0.4, 0.6]]);
        // Teacher agrees with truth on the labeled batch: correction vanishes.
        let dr = doubly_robust(&mut g, pl, &[0], &[0], pu, &[1], 0.8).unwrap();
        let third = pseudo_supervise(&mut g, pl, &[0], pu, &[1]).unwrap();
        assert_eq!(val(&g, dr), val(&g, third));
        // α = 0 reduces to pseudo-supervision with teacher labels on both parts.
        let dr0 = doubly_robust(&mut g, pl, &[0], &[1], pu, &[1], 0.0).unwrap();
        let ps = pseudo_supervise(&mut g, pl, &[1], pu, &[1]).unwrap();
        assert_eq!(val(&g, dr0), val(&g, ps));
        // α = 1, B_L = B_U = 1, teacher wrong on the labeled sample.
        let dr1 = doubly_robust(&mut g, pl, &[0], &[1], pu, &[0], 1.0).unwrap();
        let expect = -0.7f64.ln() + 0.3f64.ln() + (-(0.3f64.ln()) - 0.4f64.ln()) / 2.0;
        assert!((val(&g, dr1) - expect).abs() < 1e-11);
    }
}
