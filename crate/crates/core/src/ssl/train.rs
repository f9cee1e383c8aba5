use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::align::DistributionAligner;
use super::losses;
use super::model::{BoundStudent, HeadInput, StudentArch, StudentModel};
use crate::autodiff::{Graph, Var};
use crate::data::{AugmentorPair, BatchIter, Cycler, SemiDataset, Split, View};
use crate::error::{Error, Result};
use crate::nn::{decode_checkpoint, encode_checkpoint};
use crate::optim::{AdamW, AdamWConfig, AnnealSchedule, LrSchedule};
use crate::oracle::PseudoLabelSet;
use crate::scalar::Scalar;
use crate::seeding::derive;
use crate::tensor::{argmax, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Supervised,
    Adamatch,
    Zeromatch,
    ZmNoAux,
    ZmNoStage1,
    PseudoSupervise,
    PlFeature,
    DoublyRobust,
    /// Zeromatch with teacher embeddings concatenated into both heads.
    ZeromatchEmb,
}

impl Method {
    pub const ALL: [Method; 9] = [
        Method::Supervised,
        Method::Adamatch,
        Method::Zeromatch,
        Method::ZmNoAux,
        Method::ZmNoStage1,
        Method::PseudoSupervise,
        Method::PlFeature,
        Method::DoublyRobust,
        Method::ZeromatchEmb,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Supervised => "supervised",
            Method::Adamatch => "adamatch",
            Method::Zeromatch => "zeromatch",
            Method::ZmNoAux => "zm_no_aux",
            Method::ZmNoStage1 => "zm_no_stage1",
            Method::PseudoSupervise => "pseudo_supervise",
            Method::PlFeature => "pl_feature",
            Method::DoublyRobust => "doubly_robust",
            Method::ZeromatchEmb => "zeromatch_emb",
        }
    }

    pub fn needs_pseudo_labels(self) -> bool {
        !matches!(self, Method::Supervised | Method::Adamatch)
    }

    pub fn has_stage1(self) -> bool {
        matches!(self, Method::Zeromatch | Method::ZmNoAux | Method::ZeromatchEmb)
    }

    fn head_input(self, pls: Option<&PseudoLabelSet>) -> HeadInput {
        match self {
            Method::PlFeature => HeadInput::OneHotPseudoLabel,
            Method::ZeromatchEmb => HeadInput::Embedding(pls.map_or(0, |p| p.embed_dim)),
            _ => HeadInput::None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown method `{s}`")))
    }
}

/// Which inputs stage-1 distillation sees.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KdInput {
    None,
    Weak,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SslHyper {
    pub threshold: f64,
    pub lambda_p: f64,
    /// Ramp the auxiliary weight over stage 2; otherwise hold it at 1.
    pub anneal: bool,
    pub batch_labeled: usize,
    pub batch_unlabeled: usize,
    pub stage1_steps: usize,
    pub stage2_steps: usize,
    pub lr: f64,
    pub warmup: usize,
    pub adamw: AdamWConfig,
    pub da_momentum: f64,
    pub augment: AugmentorPair,
    pub kd_input: KdInput,
    /// Scale the threshold by the mean labeled confidence.
    pub relative_threshold: bool,
    /// Distill on soft teacher distributions in stage 1 when present.
    pub soft_kd: bool,
    pub encoder_widths: Vec<usize>,
    pub head_hidden: Vec<usize>,
}

impl Default for SslHyper {
    fn default() -> Self {
        Self {
            threshold: 0.95,
            lambda_p: 1.0,
            anneal: true,
            batch_labeled: 16,
            batch_unlabeled: 16,
            stage1_steps: 3000,
            stage2_steps: 3000,
            lr: 3e-3,
            warmup: 150,
            adamw: AdamWConfig::default(),
            da_momentum: 0.999,
            augment: AugmentorPair::default(),
            kd_input: KdInput::Weak,
            relative_threshold: false,
            soft_kd: false,
            encoder_widths: vec![64],
            head_hidden: vec![64],
        }
    }
}

impl SslHyper {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(0.0..=1.0).contains(&self.threshold) {
            return bad("threshold must lie in [0,1]");
        }
        if !(self.lambda_p >= 0.0) {
            return bad("lambda_p must be >= 0");
        }
        if self.batch_labeled == 0 || self.batch_unlabeled == 0 {
            return bad("batch sizes must be positive");
        }
        if !self.augment.is_valid() {
            return bad("augmentation needs 0 <= weak sigma <= strong sigma and mask rate in [0,1]");
        }
        if !(0.0..1.0).contains(&self.da_momentum) {
            return bad("distribution-alignment momentum must lie in [0,1)");
        }
        Ok(())
    }

    fn schedule(&self, total: usize) -> Result<LrSchedule> {
        LrSchedule::new(self.lr, total, self.warmup.min(total.saturating_sub(1)))
    }
}

/// One optimizer step's record; columns of the training log.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub step: usize,
    pub lr: f64,
    pub alpha_t: f64,
    pub loss_total: f64,
    pub loss_s: f64,
    pub loss_u: f64,
    pub loss_kd2: f64,
    pub mask_rate: f64,
}

pub fn write_step_log(path: &Path, log: &[StepLog]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for rec in log {
        w.serialize(rec)?;
    }
    if log.is_empty() {
        w.write_record(["step", "lr", "alpha_t", "loss_total", "loss_s", "loss_u", "loss_kd2", "mask_rate"])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Clone, Debug)]
pub struct TrainOutcome<S> {
    pub model: StudentModel<S>,
    pub log: Vec<StepLog>,
    pub stage1_steps: usize,
    pub stage2_steps: usize,
    /// Mask rate of the last consistency step, for methods that have one.
    pub final_mask_rate: Option<f64>,
    /// Main-head agreement with the teacher on the train set after stage 1.
    pub stage1_agreement: Option<f64>,
    /// Stage-1 weights as written to the hand-off checkpoint.
    pub stage1_checkpoint: Option<String>,
}

fn to_tensor<S: Scalar>(rows: &[Vec<f64>]) -> Tensor<S> {
    let cols = rows.first().map_or(0, Vec::len);
    let data = rows.iter().flatten().map(|&v| S::lit(v)).collect();
    Tensor::new(vec![rows.len(), cols], data).expect("rectangular rows")
}

/// Per-sample head features for the given global indices.
fn extras<S: Scalar>(arch: &StudentArch, pls: Option<&PseudoLabelSet>, indices: &[usize]) -> Result<Option<Tensor<S>>> {
    let rows = match arch.head_input {
        HeadInput::None => return Ok(None),
        HeadInput::OneHotPseudoLabel => {
            let pls = pls.ok_or_else(|| Error::Config("one-hot head input needs pseudo-labels".into()))?;
            pls.hard_labels(indices)?
                .into_iter()
                .map(|c| (0..arch.num_classes).map(|j| if j == c { 1.0 } else { 0.0 }).collect())
                .collect::<Vec<Vec<f64>>>()
        }
        HeadInput::Embedding(_) => {
            let pls = pls.ok_or_else(|| Error::Config("embedding head input needs pseudo-labels".into()))?;
            pls.embeddings(indices)?
        }
    };
    Ok(Some(to_tensor(&rows)))
}

fn global(ds: &SemiDataset, split: Split, rows: &[usize]) -> Vec<usize> {
    rows.iter().map(|&r| ds.global_index(split, r)).collect()
}

/// Main-head accuracy on un-augmented inputs of a split.
pub fn evaluate<S: Scalar>(
    model: &StudentModel<S>,
    ds: &SemiDataset,
    split: Split,
    pls: Option<&PseudoLabelSet>,
) -> Result<f64> {
    let labels = ds.labels(split);
    if labels.is_empty() {
        return Err(Error::Config(format!("{} split is empty", split.as_str())));
    }
    let preds = predict_split(model, ds, split, pls)?;
    let hits = preds.iter().zip(labels).filter(|(p, y)| p == y).count();
    Ok(hits as f64 / labels.len() as f64)
}

fn predict_split<S: Scalar>(
    model: &StudentModel<S>,
    ds: &SemiDataset,
    split: Split,
    pls: Option<&PseudoLabelSet>,
) -> Result<Vec<usize>> {
    let n = ds.labels(split).len();
    let rows: Vec<usize> = (0..n).collect();
    let x: Tensor<S> = ds.features(split).cast();
    let extra = extras(&model.arch, pls, &global(ds, split, &rows))?;
    let probs = model.predict(&x, extra.as_ref())?;
    Ok((0..n).map(|i| argmax(probs.row(i))).collect())
}

/// Fraction of train inputs on which the main head agrees with the teacher.
pub fn teacher_agreement<S: Scalar>(model: &StudentModel<S>, ds: &SemiDataset, pls: &PseudoLabelSet) -> Result<f64> {
    let preds = predict_split(model, ds, Split::Train, Some(pls))?;
    let teacher = pls.hard_labels(&ds.unlabeled_pool())?;
    let hits = preds.iter().zip(&teacher).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / preds.len().max(1) as f64)
}

/// Forward, backward and one AdamW update. `build` returns the scalar loss.
fn optimize<S: Scalar, T>(
    model: &mut StudentModel<S>,
    opt: &mut AdamW<S>,
    lr: f64,
    build: impl FnOnce(&StudentModel<S>, &mut Graph<S>, &BoundStudent) -> Result<(Var, T)>,
) -> Result<T> {
    let mut g = Graph::new();
    let bound = model.bind(&mut g);
    let (loss, extra) = build(model, &mut g, &bound)?;
    if !g.value(loss).all_finite() {
        return Err(Error::Numeric("training loss"));
    }
    g.backward(loss)?;
    let grads: Vec<Tensor<S>> = bound
        .all()
        .zip(model.params())
        .map(|(v, p)| g.take_grad(v).unwrap_or_else(|| Tensor::zeros(p.shape())))
        .collect();
    opt.step(model.params_mut(), &grads, lr)?;
    Ok(extra)
}

struct Ctx<'a> {
    ds: &'a SemiDataset,
    pls: Option<&'a PseudoLabelSet>,
    hyper: &'a SslHyper,
    seed: u64,
}

impl Ctx<'_> {
    fn pls(&self) -> Result<&PseudoLabelSet> {
        self.pls
            .ok_or_else(|| Error::Config("this method needs pseudo-labels".into()))
    }

    fn teacher(&self, rows: &[usize]) -> Result<Vec<usize>> {
        self.pls()?.hard_labels(rows)
    }

    fn labels(&self, rows: &[usize]) -> Vec<usize> {
        rows.iter().map(|&i| self.ds.train_labels[i]).collect()
    }

    fn view<S: Scalar>(&self, rows: &[usize], view: View, rng: &mut ChaCha8Rng) -> Tensor<S> {
        let raw = self.ds.gather(Split::Train, rows);
        to_tensor(&self.hyper.augment.augment_rows(&raw, view, rng))
    }
}

/// Stage 1: distill teacher labels into the main head over the whole pool.
fn run_stage1<S: Scalar>(ctx: &Ctx<'_>, model: &mut StudentModel<S>, log: &mut Vec<StepLog>) -> Result<()> {
    let h = ctx.hyper;
    let steps = h.stage1_steps;
    if steps == 0 {
        return Ok(());
    }
    let pls = ctx.pls()?;
    pls.ensure_covers(&ctx.ds.unlabeled_pool())?;
    let sched = h.schedule(steps)?;
    let mut opt = AdamW::new(h.adamw, model.params());
    let mut pool = Cycler::new(ctx.ds.unlabeled_pool(), derive(ctx.seed, "stage1-batches"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive(ctx.seed, "stage1-augment"));
    let batch = h.batch_labeled + h.batch_unlabeled;
    for t in 0..steps {
        let rows = pool.next_batch(batch);
        let x: Tensor<S> = match h.kd_input {
            KdInput::Weak => ctx.view(&rows, View::Weak, &mut rng),
            KdInput::None => to_tensor(&ctx.ds.gather(Split::Train, &rows)),
        };
        let extra = extras(&model.arch, Some(pls), &rows)?;
        let soft = if h.soft_kd && rows.iter().all(|r| pls.get(*r).is_some_and(|p| p.soft.is_some())) {
            Some(to_tensor::<S>(
                &rows.iter().map(|r| pls.records[r].soft.clone().unwrap()).collect::<Vec<_>>(),
            ))
        } else {
            None
        };
        let teacher = ctx.teacher(&rows)?;
        let lr = sched.lr_at(t)?;
        let loss = optimize(model, &mut opt, lr, |m, g, b| {
            let xv = g.constant(x);
            let ev = extra.map(|e| g.constant(e));
            let feat = m.encode(g, b, xv)?;
            let p = m.main_probs(g, b, feat, ev)?;
            let loss = match soft {
                Some(t) => losses::distillation_soft(g, p, t)?,
                None => losses::distillation(g, p, &teacher)?,
            };
            Ok((loss, g.value(loss).item().as_f64()))
        })?;
        log.push(StepLog {
            step: t,
            lr,
            alpha_t: 0.0,
            loss_total: loss,
            loss_s: 0.0,
            loss_u: 0.0,
            loss_kd2: 0.0,
            mask_rate: 0.0,
        });
    }
    Ok(())
}

/// Consistency-regularized SSL (distribution alignment, confidence mask,
/// weak/strong views) with an optional auxiliary distillation head.
fn run_ssl<S: Scalar>(
    ctx: &Ctx<'_>,
    model: &mut StudentModel<S>,
    lambda_p: f64,
    step_offset: usize,
    log: &mut Vec<StepLog>,
) -> Result<Option<f64>> {
    let h = ctx.hyper;
    let steps = h.stage2_steps;
    if steps == 0 {
        return Ok(None);
    }
    let use_aux = lambda_p > 0.0;
    let sched = h.schedule(steps)?;
    let anneal = AnnealSchedule {
        anneal: h.anneal,
        total: steps,
    };
    let mut opt = AdamW::new(h.adamw, model.params());
    let mut aligner = DistributionAligner::<S>::new(ctx.ds.num_classes, h.da_momentum);
    let mut batches = BatchIter::new(ctx.ds, h.batch_labeled, h.batch_unlabeled, derive(ctx.seed, "stage2-batches"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive(ctx.seed, "stage2-augment"));
    let mut mask_rate = 0.0;
    for t in 0..steps {
        let (lab, unl) = batches.next().expect("endless stream");
        let x_lw: Tensor<S> = ctx.view(&lab, View::Weak, &mut rng);
        let x_uw: Tensor<S> = ctx.view(&unl, View::Weak, &mut rng);
        let x_us: Tensor<S> = ctx.view(&unl, View::Strong, &mut rng);
        let y = ctx.labels(&lab);
        let e_l = extras(&model.arch, ctx.pls, &lab)?;
        let e_u = extras(&model.arch, ctx.pls, &unl)?;
        let (t_l, t_u) = if use_aux {
            (ctx.teacher(&lab)?, ctx.teacher(&unl)?)
        } else {
            (Vec::new(), Vec::new())
        };
        let lr = sched.lr_at(t)?;
        let alpha = anneal.alpha_at(t)?;
        let rec = optimize(model, &mut opt, lr, |m, g, b| {
            let xl = g.constant(x_lw);
            let xu = g.constant(x_uw);
            let xs = g.constant(x_us);
            let el = e_l.map(|e| g.constant(e));
            let eu = e_u.map(|e| g.constant(e));
            let f_l = m.encode(g, b, xl)?;
            let f_u = m.encode(g, b, xu)?;
            let f_s = m.encode(g, b, xs)?;
            let p_l = m.main_probs(g, b, f_l, el)?;
            let p_uw = m.main_probs(g, b, f_u, eu)?;
            let p_us = m.main_probs(g, b, f_s, eu)?;
            let weak_l = g.value(p_l).clone();
            let weak_u = g.value(p_uw).clone();
            aligner.update(&weak_l, &weak_u);
            let tau = if h.relative_threshold {
                let (n, _) = weak_l.dims2();
                let conf: f64 = (0..n).map(|i| weak_l.row(i)[argmax(weak_l.row(i))].as_f64()).sum::<f64>() / n as f64;
                h.threshold * conf
            } else {
                h.threshold
            };
            let l_s = losses::supervised(g, p_l, &y)?;
            let u = losses::unsupervised(g, &weak_u, &aligner, tau, p_us)?;
            let aux = if use_aux {
                let q_l = m.aux_probs(g, b, f_l, el)?;
                let q_u = m.aux_probs(g, b, f_u, eu)?;
                losses::aux_distillation(g, q_l, &t_l, q_u, &t_u)?
            } else {
                g.constant(Tensor::scalar(S::zero()))
            };
            let parts = losses::stage2_total(g, l_s, u.loss, aux, alpha, lambda_p)?;
            let total = parts.total;
            let rec = StepLog {
                step: step_offset + t,
                lr,
                alpha_t: alpha,
                loss_total: g.value(total).item().as_f64(),
                loss_s: parts.supervised,
                loss_u: parts.unsupervised,
                loss_kd2: parts.aux,
                mask_rate: u.mask_rate,
            };
            Ok((total, rec))
        })?;
        mask_rate = rec.mask_rate;
        log.push(rec);
    }
    Ok(Some(mask_rate))
}

#[derive(Clone, Copy)]
enum Single {
    Supervised,
    PseudoSupervise,
    DoublyRobust,
}

/// Single-stage objectives on weak views of a labeled and an unlabeled batch.
fn run_single<S: Scalar>(ctx: &Ctx<'_>, model: &mut StudentModel<S>, kind: Single, log: &mut Vec<StepLog>) -> Result<()> {
    let h = ctx.hyper;
    let steps = h.stage2_steps;
    if steps == 0 {
        return Ok(());
    }
    let sched = h.schedule(steps)?;
    let anneal = AnnealSchedule {
        anneal: h.anneal,
        total: steps,
    };
    let mut opt = AdamW::new(h.adamw, model.params());
    let mut batches = BatchIter::new(ctx.ds, h.batch_labeled, h.batch_unlabeled, derive(ctx.seed, "stage2-batches"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive(ctx.seed, "stage2-augment"));
    for t in 0..steps {
        let (lab, unl) = batches.next().expect("endless stream");
        let x_lw: Tensor<S> = ctx.view(&lab, View::Weak, &mut rng);
        let x_uw: Tensor<S> = ctx.view(&unl, View::Weak, &mut rng);
        let y = ctx.labels(&lab);
        let (t_l, t_u) = match kind {
            Single::Supervised => (Vec::new(), Vec::new()),
            _ => (ctx.teacher(&lab)?, ctx.teacher(&unl)?),
        };
        let lr = sched.lr_at(t)?;
        let alpha = anneal.alpha_at(t)?;
        let (loss, ls) = optimize(model, &mut opt, lr, |m, g, b| {
            let xl = g.constant(x_lw);
            let f_l = m.encode(g, b, xl)?;
            let p_l = m.main_probs(g, b, f_l, None)?;
            let loss = match kind {
                Single::Supervised => losses::supervised(g, p_l, &y)?,
                Single::PseudoSupervise | Single::DoublyRobust => {
                    let xu = g.constant(x_uw);
                    let f_u = m.encode(g, b, xu)?;
                    let p_u = m.main_probs(g, b, f_u, None)?;
                    match kind {
                        Single::DoublyRobust => losses::doubly_robust(g, p_l, &y, &t_l, p_u, &t_u, alpha)?,
                        _ => losses::pseudo_supervise(g, p_l, &y, p_u, &t_u)?,
                    }
                }
            };
            let ls = if matches!(kind, Single::Supervised) {
                g.value(loss).item().as_f64()
            } else {
                0.0
            };
            Ok((loss, (g.value(loss).item().as_f64(), ls)))
        })?;
        log.push(StepLog {
            step: t,
            lr,
            alpha_t: if matches!(kind, Single::DoublyRobust) { alpha } else { 0.0 },
            loss_total: loss,
            loss_s: ls,
            loss_u: 0.0,
            loss_kd2: 0.0,
            mask_rate: 0.0,
        });
    }
    Ok(())
}

/// Train a student with the given method.
///
/// Two-stage methods distill for `stage1_steps`, hand the weights over through
/// the checkpoint format, then run `stage2_steps` of SSL with a fresh
/// optimizer and schedule. Single-stage methods run `stage2_steps` from a
/// random initialization on the same batch and augmentation streams.
pub fn train<S: Scalar>(
    method: Method,
    ds: &SemiDataset,
    pls: Option<&PseudoLabelSet>,
    hyper: &SslHyper,
    seed: u64,
) -> Result<TrainOutcome<S>> {
    hyper.validate()?;
    if method.needs_pseudo_labels() && pls.is_none() {
        return Err(Error::Config(format!("method {method} needs pseudo-labels")));
    }
    if ds.labeled_indices.is_empty() {
        return Err(Error::Config("dataset has no labeled samples".into()));
    }
    if let Some(p) = pls {
        if p.num_classes != ds.num_classes {
            return Err(Error::Config(format!(
                "pseudo-labels have {} classes, dataset has {}",
                p.num_classes, ds.num_classes
            )));
        }
        if method.needs_pseudo_labels() {
            p.ensure_covers(&ds.unlabeled_pool())?;
        }
    }
    if method == Method::ZeromatchEmb && !pls.is_some_and(PseudoLabelSet::has_embeddings) {
        return Err(Error::Config("zeromatch_emb needs pseudo-labels with embeddings".into()));
    }
    let ctx = Ctx { ds, pls, hyper, seed };
    let arch = StudentArch {
        input_dim: ds.dim(),
        encoder_widths: hyper.encoder_widths.clone(),
        head_hidden: hyper.head_hidden.clone(),
        num_classes: ds.num_classes,
        head_input: method.head_input(pls),
    };
    let mut init_rng = ChaCha8Rng::seed_from_u64(derive(seed, "init"));
    let mut model = StudentModel::<S>::init(arch, &mut init_rng)?;
    let mut log = Vec::new();
    let mut stage1_agreement = None;
    let mut stage1_checkpoint = None;
    let stage1_steps = if method.has_stage1() { hyper.stage1_steps } else { 0 };

    if method.has_stage1() {
        run_stage1(&ctx, &mut model, &mut log)?;
        let text = encode_checkpoint(&model.named_params());
        let named = decode_checkpoint::<S>(&text, Path::new("<stage1>"))?;
        let mut handed = StudentModel::init(model.arch.clone(), &mut init_rng)?;
        handed.load_named(&named)?;
        model = handed;
        if stage1_steps > 0 {
            stage1_agreement = Some(teacher_agreement(&model, ds, ctx.pls()?)?);
        }
        stage1_checkpoint = Some(text);
    }

    let final_mask_rate = match method {
        Method::Adamatch | Method::PlFeature => run_ssl(&ctx, &mut model, 0.0, stage1_steps, &mut log)?,
        Method::ZmNoAux => run_ssl(&ctx, &mut model, 0.0, stage1_steps, &mut log)?,
        Method::Zeromatch | Method::ZmNoStage1 | Method::ZeromatchEmb => {
            run_ssl(&ctx, &mut model, hyper.lambda_p, stage1_steps, &mut log)?
        }
        Method::Supervised => {
            run_single(&ctx, &mut model, Single::Supervised, &mut log)?;
            None
        }
        Method::PseudoSupervise => {
            run_single(&ctx, &mut model, Single::PseudoSupervise, &mut log)?;
            None
        }
        Method::DoublyRobust => {
            run_single(&ctx, &mut model, Single::DoublyRobust, &mut log)?;
            None
        }
    };

    Ok(TrainOutcome {
        model,
        log,
        stage1_steps,
        stage2_steps: hyper.stage2_steps,
        final_mask_rate,
        stage1_agreement,
        stage1_checkpoint,
    })
}
