use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, Var};
use crate::error::{Error, Result};
use crate::nn::{Mlp, MlpVars};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Extra per-sample features concatenated onto the encoder output.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HeadInput {
    None,
    /// One-hot teacher label (width K) into the main head only.
    OneHotPseudoLabel,
    /// Teacher embedding of the given width into both heads.
    Embedding(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudentArch {
    pub input_dim: usize,
    /// Encoder layer widths; the last one is the feature width.
    pub encoder_widths: Vec<usize>,
    /// Hidden widths of the main head.
    pub head_hidden: Vec<usize>,
    pub num_classes: usize,
    pub head_input: HeadInput,
}

impl StudentArch {
    pub fn feature_width(&self) -> usize {
        *self.encoder_widths.last().unwrap_or(&self.input_dim)
    }

    pub fn extra_width(&self) -> usize {
        match self.head_input {
            HeadInput::None => 0,
            HeadInput::OneHotPseudoLabel => self.num_classes,
            HeadInput::Embedding(d) => d,
        }
    }

    fn aux_extra_width(&self) -> usize {
        match self.head_input {
            HeadInput::Embedding(d) => d,
            _ => 0,
        }
    }
}

/// `f = h ∘ g` with a shared encoder `g`, a non-linear main head `h` and a
/// single-affine auxiliary head `h_p`.
#[derive(Clone, Debug, PartialEq)]
pub struct StudentModel<S> {
    pub arch: StudentArch,
    pub encoder: Mlp<S>,
    pub head: Mlp<S>,
    pub aux: Mlp<S>,
}

/// Graph handles of one bound [`StudentModel`].
#[derive(Clone, Debug)]
pub struct BoundStudent {
    pub encoder: MlpVars,
    pub head: MlpVars,
    pub aux: MlpVars,
}

impl BoundStudent {
    pub fn all(&self) -> impl Iterator<Item = Var> + '_ {
        self.encoder.0.iter().chain(&self.head.0).chain(&self.aux.0).copied()
    }
}

impl<S: Scalar> StudentModel<S> {
    pub fn init<R: Rng + ?Sized>(arch: StudentArch, rng: &mut R) -> Result<Self> {
        if arch.encoder_widths.is_empty() || arch.num_classes < 2 {
            return Err(Error::Config("student needs at least one encoder layer and two classes".into()));
        }
        let mut enc_widths = vec![arch.input_dim];
        enc_widths.extend(&arch.encoder_widths);
        let encoder = Mlp::init(&enc_widths, true, rng);
        let mut head_widths = vec![arch.feature_width() + arch.extra_width()];
        head_widths.extend(&arch.head_hidden);
        head_widths.push(arch.num_classes);
        let head = Mlp::init(&head_widths, false, rng);
        let aux = Mlp::init(&[arch.feature_width() + arch.aux_extra_width(), arch.num_classes], false, rng);
        Ok(Self {
            arch,
            encoder,
            head,
            aux,
        })
    }

    pub fn num_params(&self) -> usize {
        self.encoder.num_params() + self.head.num_params() + self.aux.num_params()
    }

    pub fn params(&self) -> impl Iterator<Item = &Tensor<S>> {
        self.encoder.params().chain(self.head.params()).chain(self.aux.params())
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut Tensor<S>> {
        self.encoder
            .params_mut()
            .chain(self.head.params_mut())
            .chain(self.aux.params_mut())
    }

    pub fn named_params(&self) -> Vec<(String, Tensor<S>)> {
        let mut out = Vec::new();
        for (part, mlp) in [("encoder", &self.encoder), ("head", &self.head), ("aux", &self.aux)] {
            for (i, layer) in mlp.layers.iter().enumerate() {
                out.push((format!("{part}.{i}.weight"), layer.weight.clone()));
                out.push((format!("{part}.{i}.bias"), layer.bias.clone()));
            }
        }
        out
    }

    /// Overwrite parameters from a named list produced by [`Self::named_params`].
    pub fn load_named(&mut self, named: &[(String, Tensor<S>)]) -> Result<()> {
        let expected = self.named_params();
        if expected.len() != named.len() {
            return Err(Error::Config(format!(
                "checkpoint has {} tensors, model expects {}",
                named.len(),
                expected.len()
            )));
        }
        for ((want_name, want), (name, t)) in expected.iter().zip(named) {
            if want_name != name || want.shape() != t.shape() {
                return Err(Error::Config(format!(
                    "checkpoint tensor {name} {:?} does not match {want_name} {:?}",
                    t.shape(),
                    want.shape()
                )));
            }
        }
        for (p, (_, t)) in self.params_mut().zip(named) {
            *p = t.clone();
        }
        Ok(())
    }

    pub fn bind(&self, g: &mut Graph<S>) -> BoundStudent {
        BoundStudent {
            encoder: self.encoder.bind(g),
            head: self.head.bind(g),
            aux: self.aux.bind(g),
        }
    }

    pub fn bind_frozen(&self, g: &mut Graph<S>) -> BoundStudent {
        BoundStudent {
            encoder: self.encoder.bind_frozen(g),
            head: self.head.bind_frozen(g),
            aux: self.aux.bind_frozen(g),
        }
    }

    /// `g(x)`.
    pub fn encode(&self, g: &mut Graph<S>, b: &BoundStudent, x: Var) -> Result<Var> {
        self.encoder.forward(g, &b.encoder, x)
    }

    fn with_extra(&self, g: &mut Graph<S>, feat: Var, extra: Option<Var>, width: usize) -> Result<Var> {
        match (width, extra) {
            (0, _) => Ok(feat),
            (_, Some(e)) => {
                let got = g.value(e).dims2().1;
                if got != width {
                    return Err(Error::Dimension {
                        op: "head_input",
                        left: g.value(e).shape().to_vec(),
                        right: vec![width],
                    });
                }
                g.concat_cols(feat, e)
            }
            (_, None) => Err(Error::Config("model expects per-sample head features".into())),
        }
    }

    /// Main-head logits `h(g(x)[, extra])`.
    pub fn main_logits(&self, g: &mut Graph<S>, b: &BoundStudent, feat: Var, extra: Option<Var>) -> Result<Var> {
        let input = self.with_extra(g, feat, extra, self.arch.extra_width())?;
        self.head.forward(g, &b.head, input)
    }

    /// `p(y|x)`.
    pub fn main_probs(&self, g: &mut Graph<S>, b: &BoundStudent, feat: Var, extra: Option<Var>) -> Result<Var> {
        let logits = self.main_logits(g, b, feat, extra)?;
        g.softmax(logits)
    }

    /// `q(y|x)` from the auxiliary head.
    pub fn aux_probs(&self, g: &mut Graph<S>, b: &BoundStudent, feat: Var, extra: Option<Var>) -> Result<Var> {
        let input = self.with_extra(g, feat, extra, self.arch.aux_extra_width())?;
        let logits = self.aux.forward(g, &b.aux, input)?;
        g.softmax(logits)
    }

    /// Main-head probabilities without recording gradients.
    pub fn predict(&self, x: &Tensor<S>, extra: Option<&Tensor<S>>) -> Result<Tensor<S>> {
        let mut g = Graph::new();
        let b = self.bind_frozen(&mut g);
        let xv = g.constant(x.clone());
        let ev = extra.map(|e| g.constant(e.clone()));
        let feat = self.encode(&mut g, &b, xv)?;
        let p = self.main_probs(&mut g, &b, feat, ev)?;
        Ok(g.value(p).clone())
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn arch(head_input: HeadInput) -> StudentArch {
        StudentArch {
            input_dim: 5,
            encoder_widths: vec![12, 8],
            head_hidden: vec![6],
            num_classes: 3,
            head_input,
        }
    }

    #[test]
    fn aux_head_is_single_affine() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let m = StudentModel::<f64>::init(arch(HeadInput::None), &mut rng).unwrap();
        assert_eq!(m.aux.layers.len(), 1);
        assert_eq!(m.aux.num_params(), 8 * 3 + 3);
    }

    #[test]
    fn concat_widths() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let m = StudentModel::<f64>::init(arch(HeadInput::OneHotPseudoLabel), &mut rng).unwrap();
        assert_eq!(m.head.input_width(), 8 + 3);
        assert_eq!(m.aux.input_width(), 8);
        let m = StudentModel::<f64>::init(arch(HeadInput::Embedding(4)), &mut rng).unwrap();
        assert_eq!(m.head.input_width(), 12);
        assert_eq!(m.aux.input_width(), 12);
    }

    #[test]
    fn predictions_are_distributions_and_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = StudentModel::<f64>::init(arch(HeadInput::None), &mut rng).unwrap();
        let x = Tensor::new(vec![2, 5], (0..10).map(|i| i as f64 * 0.3 - 1.0).collect()).unwrap();
        let p = m.predict(&x, None).unwrap();
        for i in 0..2 {
            assert!((p.row(i).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert_eq!(p, m.predict(&x, None).unwrap());
    }

    #[test]
    fn missing_extra_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = StudentModel::<f64>::init(arch(HeadInput::Embedding(4)), &mut rng).unwrap();
        assert!(m.predict(&Tensor::zeros(&[1, 5]), None).is_err());
        assert!(m.predict(&Tensor::zeros(&[1, 5]), Some(&Tensor::zeros(&[1, 3]))).is_err());
        assert!(m.predict(&Tensor::zeros(&[1, 5]), Some(&Tensor::zeros(&[1, 4]))).is_ok());
    }

    #[test]
    fn named_params_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = StudentModel::<f64>::init(arch(HeadInput::None), &mut rng).unwrap();
        let mut b = StudentModel::<f64>::init(arch(HeadInput::None), &mut rng).unwrap();
        assert_ne!(a, b);
        b.load_named(&a.named_params()).unwrap();
        assert_eq!(a, b);
        let mut other = StudentModel::<f64>::init(arch(HeadInput::OneHotPseudoLabel), &mut rng).unwrap();
        assert!(other.load_named(&a.named_params()).is_err());
    }
}
