//! Reverse-mode automatic differentiation over a linear tape.
//!
//! Every operation appends a node holding its forward value and the handles of
//! its inputs. [`Graph::backward`] walks the tape in reverse recorded order and
//! accumulates adjoints into every node that (transitively) depends on a
//! gradient-requiring leaf.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Handle to a node on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Cross-entropy target: one class index per row or one distribution per row.
#[derive(Clone, Debug, PartialEq)]
pub enum Target<S> {
    Hard(Vec<usize>),
    Soft(Tensor<S>),
}

#[derive(Clone, Debug)]
enum Op<S> {
    Leaf,
    MatMul(Var, Var),
    AddBias(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Scale(Var, S),
    Relu(Var),
    Softmax(Var),
    CrossEntropy(Var, Target<S>),
    ConcatCols(Var, Var),
    Sum(Var),
    Mean(Var),
    WeightedSum(Var, Vec<S>),
}

#[derive(Clone, Debug)]
struct Node<S> {
    value: Tensor<S>,
    op: Op<S>,
    requires_grad: bool,
    grad: Option<Tensor<S>>,
}

/// Computation tape. Single-threaded; one per forward/backward pass.
#[derive(Clone, Debug, Default)]
pub struct Graph<S> {
    nodes: Vec<Node<S>>,
}

impl<S: Scalar> Graph<S> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<S>, op: Op<S>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
            grad: None,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Leaf that never receives a gradient.
    pub fn constant(&mut self, value: Tensor<S>) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// Leaf that receives a gradient on [`Graph::backward`].
    pub fn param(&mut self, value: Tensor<S>) -> Var {
        self.push(value, Op::Leaf, true)
    }

    pub fn value(&self, v: Var) -> &Tensor<S> {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.rg(v)
    }

    pub fn grad(&self, v: Var) -> Option<&Tensor<S>> {
        self.nodes[v.0].grad.as_ref()
    }

    pub fn take_grad(&mut self, v: Var) -> Option<Tensor<S>> {
        self.nodes[v.0].grad.take()
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = matmul_kernel(self.value(a), self.value(b))?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, Op::MatMul(a, b), rg))
    }

    /// `x[m×n] + b[n]`, broadcasting the bias over rows.
    pub fn add_bias(&mut self, x: Var, b: Var) -> Result<Var> {
        let (xv, bv) = (self.value(x), self.value(b));
        let (m, n) = xv.dims2();
        if bv.len() != n || xv.shape().len() != 2 {
            return Err(Error::Dimension {
                op: "add_bias",
                left: xv.shape().to_vec(),
                right: bv.shape().to_vec(),
            });
        }
        let mut out = xv.data().to_vec();
        for i in 0..m {
            for (o, &bj) in out[i * n..(i + 1) * n].iter_mut().zip(bv.data()) {
                *o += bj;
            }
        }
        let value = Tensor::new(vec![m, n], out)?;
        let rg = self.rg(x) || self.rg(b);
        Ok(self.push(value, Op::AddBias(x, b), rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = zip_same(self.value(a), self.value(b), "add", |x, y| x + y)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, Op::Add(a, b), rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = zip_same(self.value(a), self.value(b), "sub", |x, y| x - y)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, Op::Sub(a, b), rg))
    }

    pub fn scale(&mut self, a: Var, c: S) -> Var {
        let av = self.value(a);
        let data = av.data().iter().map(|&x| x * c).collect();
        let value = Tensor::new(av.shape().to_vec(), data).expect("same shape");
        let rg = self.rg(a);
        self.push(value, Op::Scale(a, c), rg)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let av = self.value(a);
        let data = av
            .data()
            .iter()
            .map(|&x| if x > S::zero() { x } else { S::zero() })
            .collect();
        let value = Tensor::new(av.shape().to_vec(), data).expect("same shape");
        let rg = self.rg(a);
        self.push(value, Op::Relu(a), rg)
    }

    /// Softmax over the last axis.
    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        let value = softmax_kernel(self.value(a))?;
        let rg = self.rg(a);
        Ok(self.push(value, Op::Softmax(a), rg))
    }

    /// Per-row `-Σ_k t_k ln(p_k + ε)` for a probability matrix `[m×K]`.
    pub fn cross_entropy(&mut self, probs: Var, target: Target<S>) -> Result<Var> {
        let value = cross_entropy_kernel(self.value(probs), &target)?;
        let rg = self.rg(probs);
        Ok(self.push(value, Op::CrossEntropy(probs, target), rg))
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        let ((m, p), (mb, q)) = (av.dims2(), bv.dims2());
        if m != mb {
            return Err(Error::Dimension {
                op: "concat_cols",
                left: av.shape().to_vec(),
                right: bv.shape().to_vec(),
            });
        }
        let mut data = Vec::with_capacity(m * (p + q));
        for i in 0..m {
            data.extend_from_slice(av.row(i));
            data.extend_from_slice(bv.row(i));
        }
        let value = Tensor::new(vec![m, p + q], data)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, Op::ConcatCols(a, b), rg))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().copied().sum();
        let rg = self.rg(a);
        self.push(Tensor::scalar(s), Op::Sum(a), rg)
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let av = self.value(a);
        let n = S::from_usize(av.len().max(1)).unwrap();
        let s: S = av.data().iter().copied().sum();
        let rg = self.rg(a);
        self.push(Tensor::scalar(s / n), Op::Mean(a), rg)
    }

    /// `Σ_i w_i a_i` with constant (detached) weights.
    pub fn weighted_sum(&mut self, a: Var, weights: Vec<S>) -> Result<Var> {
        let av = self.value(a);
        if weights.len() != av.len() {
            return Err(Error::Dimension {
                op: "weighted_sum",
                left: av.shape().to_vec(),
                right: vec![weights.len()],
            });
        }
        let s = av.data().iter().zip(&weights).map(|(&x, &w)| x * w).sum();
        let rg = self.rg(a);
        Ok(self.push(Tensor::scalar(s), Op::WeightedSum(a, weights), rg))
    }

    /// Populate gradients of `loss` (a single-element node) with respect to
    /// every node that requires one. Clears any previous gradients first.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.value(loss).len() != 1 {
            return Err(Error::Dimension {
                op: "backward",
                left: self.value(loss).shape().to_vec(),
                right: vec![],
            });
        }
        for node in &mut self.nodes {
            node.grad = None;
        }
        if !self.rg(loss) {
            return Ok(());
        }
        let seed = Tensor::full(self.value(loss).shape(), S::one());
        self.nodes[loss.0].grad = Some(seed);
        for idx in (0..=loss.0).rev() {
            if !self.nodes[idx].requires_grad {
                continue;
            }
            let Some(upstream) = self.nodes[idx].grad.clone() else {
                continue;
            };
            let op = self.nodes[idx].op.clone();
            self.propagate(idx, &op, &upstream);
        }
        // Reachable leaves that got no contribution still carry a zero gradient.
        let mut reach = vec![false; self.nodes.len()];
        reach[loss.0] = true;
        for idx in (0..=loss.0).rev() {
            if !reach[idx] {
                continue;
            }
            for input in inputs(&self.nodes[idx].op) {
                reach[input.0] = true;
            }
        }
        for (idx, node) in self.nodes.iter_mut().enumerate() {
            if reach[idx] && node.requires_grad && node.grad.is_none() {
                node.grad = Some(Tensor::zeros(node.value.shape()));
            }
        }
        Ok(())
    }

    fn accumulate(&mut self, v: Var, delta: Vec<S>) {
        let node = &mut self.nodes[v.0];
        if !node.requires_grad {
            return;
        }
        match &mut node.grad {
            Some(g) => {
                for (gi, di) in g.data_mut().iter_mut().zip(delta) {
                    *gi += di;
                }
            }
            None => {
                node.grad = Some(Tensor::new(node.value.shape().to_vec(), delta).expect("adjoint shape"));
            }
        }
    }

    fn propagate(&mut self, idx: usize, op: &Op<S>, up: &Tensor<S>) {
        let g = up.data();
        match op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let ((m, k), (_, n)) = (av.dims2(), bv.dims2());
                let da = self.rg(*a).then(|| {
                    // dA = dC · Bᵀ
                    let mut da = vec![S::zero(); m * k];
                    for i in 0..m {
                        for p in 0..k {
                            let brow = &bv.data()[p * n..(p + 1) * n];
                            let grow = &g[i * n..(i + 1) * n];
                            da[i * k + p] = grow.iter().zip(brow).map(|(&x, &y)| x * y).sum();
                        }
                    }
                    da
                });
                let db = self.rg(*b).then(|| {
                    // dB = Aᵀ · dC
                    let mut db = vec![S::zero(); k * n];
                    for i in 0..m {
                        for p in 0..k {
                            let a_ip = av.data()[i * k + p];
                            if a_ip == S::zero() {
                                continue;
                            }
                            for (d, &gj) in db[p * n..(p + 1) * n].iter_mut().zip(&g[i * n..(i + 1) * n]) {
                                *d += a_ip * gj;
                            }
                        }
                    }
                    db
                });
                if let Some(da) = da {
                    self.accumulate(*a, da);
                }
                if let Some(db) = db {
                    self.accumulate(*b, db);
                }
            }
            Op::AddBias(x, b) => {
                let n = self.value(*b).len();
                let mut db = vec![S::zero(); n];
                for row in g.chunks(n) {
                    for (d, &r) in db.iter_mut().zip(row) {
                        *d += r;
                    }
                }
                self.accumulate(*x, g.to_vec());
                self.accumulate(*b, db);
            }
            Op::Add(a, b) => {
                self.accumulate(*a, g.to_vec());
                self.accumulate(*b, g.to_vec());
            }
            Op::Sub(a, b) => {
                self.accumulate(*a, g.to_vec());
                self.accumulate(*b, g.iter().map(|&x| -x).collect());
            }
            Op::Scale(a, c) => {
                self.accumulate(*a, g.iter().map(|&x| x * *c).collect());
            }
            Op::Relu(a) => {
                let d = self
                    .value(*a)
                    .data()
                    .iter()
                    .zip(g)
                    .map(|(&x, &gi)| if x > S::zero() { gi } else { S::zero() })
                    .collect();
                self.accumulate(*a, d);
            }
            Op::Softmax(a) => {
                let p = &self.nodes[idx].value;
                let (_, k) = p.dims2();
                let mut d = Vec::with_capacity(p.len());
                for (prow, grow) in p.data().chunks(k).zip(g.chunks(k)) {
                    let dot: S = prow.iter().zip(grow).map(|(&pi, &gi)| pi * gi).sum();
                    d.extend(prow.iter().zip(grow).map(|(&pi, &gi)| pi * (gi - dot)));
                }
                self.accumulate(*a, d);
            }
            Op::CrossEntropy(probs, target) => {
                let p = self.value(*probs);
                let (m, k) = p.dims2();
                let eps = S::log_floor();
                let mut d = vec![S::zero(); m * k];
                for i in 0..m {
                    let row = p.row(i);
                    match target {
                        Target::Hard(labels) => {
                            let c = labels[i];
                            d[i * k + c] = -g[i] / (row[c] + eps);
                        }
                        Target::Soft(t) => {
                            for (j, &tj) in t.row(i).iter().enumerate() {
                                d[i * k + j] = -g[i] * tj / (row[j] + eps);
                            }
                        }
                    }
                }
                self.accumulate(*probs, d);
            }
            Op::ConcatCols(a, b) => {
                let (m, p) = self.value(*a).dims2();
                let q = self.value(*b).dims2().1;
                let mut da = Vec::with_capacity(m * p);
                let mut db = Vec::with_capacity(m * q);
                for row in g.chunks(p + q) {
                    da.extend_from_slice(&row[..p]);
                    db.extend_from_slice(&row[p..]);
                }
                self.accumulate(*a, da);
                self.accumulate(*b, db);
            }
            Op::Sum(a) => {
                let n = self.value(*a).len();
                self.accumulate(*a, vec![g[0]; n]);
            }
            Op::Mean(a) => {
                let n = self.value(*a).len();
                let scale = g[0] / S::from_usize(n.max(1)).unwrap();
                self.accumulate(*a, vec![scale; n]);
            }
            Op::WeightedSum(a, w) => {
                self.accumulate(*a, w.iter().map(|&wi| wi * g[0]).collect());
            }
        }
    }
}

fn inputs<S>(op: &Op<S>) -> Vec<Var> {
    match op {
        Op::Leaf => vec![],
        Op::MatMul(a, b) | Op::AddBias(a, b) | Op::Add(a, b) | Op::Sub(a, b) | Op::ConcatCols(a, b) => {
            vec![*a, *b]
        }
        Op::Scale(a, _)
        | Op::Relu(a)
        | Op::Softmax(a)
        | Op::CrossEntropy(a, _)
        | Op::Sum(a)
        | Op::Mean(a)
        | Op::WeightedSum(a, _) => vec![*a],
    }
}

fn zip_same<S: Scalar>(a: &Tensor<S>, b: &Tensor<S>, op: &'static str, f: impl Fn(S, S) -> S) -> Result<Tensor<S>> {
    if a.shape() != b.shape() {
        return Err(Error::Dimension {
            op,
            left: a.shape().to_vec(),
            right: b.shape().to_vec(),
        });
    }
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::new(a.shape().to_vec(), data)
}

pub fn matmul_kernel<S: Scalar>(a: &Tensor<S>, b: &Tensor<S>) -> Result<Tensor<S>> {
    if a.shape().len() != 2 || b.shape().len() != 2 || a.shape()[1] != b.shape()[0] {
        return Err(Error::Dimension {
            op: "matmul",
            left: a.shape().to_vec(),
            right: b.shape().to_vec(),
        });
    }
    let (m, k) = a.dims2();
    let n = b.shape()[1];
    let mut out = vec![S::zero(); m * n];
    for i in 0..m {
        let orow = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let a_ip = a.data()[i * k + p];
            if a_ip == S::zero() {
                continue;
            }
            for (o, &bv) in orow.iter_mut().zip(&b.data()[p * n..(p + 1) * n]) {
                *o += a_ip * bv;
            }
        }
    }
    Tensor::new(vec![m, n], out)
}

/// Max-shifted softmax over the last axis.
pub fn softmax_kernel<S: Scalar>(logits: &Tensor<S>) -> Result<Tensor<S>> {
    if !logits.all_finite() {
        return Err(Error::Numeric("softmax"));
    }
    let (_, k) = logits.dims2();
    let mut out = Vec::with_capacity(logits.len());
    for row in logits.data().chunks(k.max(1)) {
        let max = row.iter().copied().fold(S::neg_infinity(), S::max);
        let start = out.len();
        out.extend(row.iter().map(|&z| (z - max).exp()));
        let total: S = out[start..].iter().copied().sum();
        for v in &mut out[start..] {
            *v /= total;
        }
    }
    Tensor::new(logits.shape().to_vec(), out)
}

pub fn cross_entropy_kernel<S: Scalar>(probs: &Tensor<S>, target: &Target<S>) -> Result<Tensor<S>> {
    let (m, k) = probs.dims2();
    let eps = S::log_floor();
    let mut out = Vec::with_capacity(m);
    match target {
        Target::Hard(labels) => {
            if labels.len() != m {
                return Err(Error::Dimension {
                    op: "cross_entropy",
                    left: probs.shape().to_vec(),
                    right: vec![labels.len()],
                });
            }
            for (i, &c) in labels.iter().enumerate() {
                if c >= k {
                    return Err(Error::ClassIndex { index: c, classes: k });
                }
                out.push(-(probs.row(i)[c] + eps).ln());
            }
        }
        Target::Soft(t) => {
            if t.dims2() != (m, k) {
                return Err(Error::Dimension {
                    op: "cross_entropy",
                    left: probs.shape().to_vec(),
                    right: t.shape().to_vec(),
                });
            }
            for i in 0..m {
                let s: S = t.row(i).iter().zip(probs.row(i)).map(|(&tj, &pj)| tj * (pj + eps).ln()).sum();
                out.push(-s);
            }
        }
    }
    Tensor::new(vec![m], out)
}
