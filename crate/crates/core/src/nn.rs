//! Dense layers, multilayer perceptrons and named-parameter checkpoints.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;

use crate::autodiff::{Graph, Var};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Affine map `x·W + b` with `W: [in×out]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear<S> {
    pub weight: Tensor<S>,
    pub bias: Tensor<S>,
}

impl<S: Scalar> Linear<S> {
    /// Glorot-uniform weights, zero bias.
    pub fn init<R: Rng + ?Sized>(fan_in: usize, fan_out: usize, rng: &mut R) -> Self {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let data = (0..fan_in * fan_out)
            .map(|_| S::lit(rng.gen_range(-limit..=limit)))
            .collect();
        Self {
            weight: Tensor::new(vec![fan_in, fan_out], data).expect("weight shape"),
            bias: Tensor::zeros(&[fan_out]),
        }
    }

    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            weight: Tensor::zeros(&[fan_in, fan_out]),
            bias: Tensor::zeros(&[fan_out]),
        }
    }

    pub fn fan_in(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn fan_out(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn num_params(&self) -> usize {
        self.weight.len() + self.bias.len()
    }
}

/// Stack of affine layers with ReLU between them.
///
/// With `activate_output` the last layer is also followed by a ReLU (an
/// encoder); without it the last layer emits raw logits (a head).
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp<S> {
    pub layers: Vec<Linear<S>>,
    pub activate_output: bool,
}

/// Graph handles for the parameters of one [`Mlp`], `[w0, b0, w1, b1, ...]`.
#[derive(Clone, Debug)]
pub struct MlpVars(pub Vec<Var>);

impl<S: Scalar> Mlp<S> {
    /// `widths = [input, hidden..., output]`.
    pub fn init<R: Rng + ?Sized>(widths: &[usize], activate_output: bool, rng: &mut R) -> Self {
        let layers = widths.windows(2).map(|w| Linear::init(w[0], w[1], rng)).collect();
        Self {
            layers,
            activate_output,
        }
    }

    pub fn input_width(&self) -> usize {
        self.layers.first().map_or(0, Linear::fan_in)
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().map_or(0, Linear::fan_out)
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(Linear::num_params).sum()
    }

    pub fn params(&self) -> impl Iterator<Item = &Tensor<S>> {
        self.layers.iter().flat_map(|l| [&l.weight, &l.bias])
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut Tensor<S>> {
        self.layers.iter_mut().flat_map(|l| [&mut l.weight, &mut l.bias])
    }

    /// Register every parameter as a gradient-requiring leaf.
    pub fn bind(&self, g: &mut Graph<S>) -> MlpVars {
        MlpVars(self.params().map(|p| g.param(p.clone())).collect())
    }

    /// Register parameters as constants (no gradient).
    pub fn bind_frozen(&self, g: &mut Graph<S>) -> MlpVars {
        MlpVars(self.params().map(|p| g.constant(p.clone())).collect())
    }

    pub fn forward(&self, g: &mut Graph<S>, vars: &MlpVars, input: Var) -> Result<Var> {
        let width = g.value(input).dims2().1;
        if width != self.input_width() {
            return Err(Error::Dimension {
                op: "mlp_forward",
                left: g.value(input).shape().to_vec(),
                right: vec![self.input_width(), self.output_width()],
            });
        }
        let mut h = input;
        let last = self.layers.len().saturating_sub(1);
        for (i, pair) in vars.0.chunks(2).enumerate() {
            h = g.matmul(h, pair[0])?;
            h = g.add_bias(h, pair[1])?;
            if i < last || self.activate_output {
                h = g.relu(h);
            }
        }
        Ok(h)
    }

    /// Forward pass without recording gradients.
    pub fn infer(&self, input: &Tensor<S>) -> Result<Tensor<S>> {
        let mut g = Graph::new();
        let vars = self.bind_frozen(&mut g);
        let x = g.constant(input.clone());
        let out = self.forward(&mut g, &vars, x)?;
        Ok(g.value(out).clone())
    }
}

const CHECKPOINT_MAGIC: &str = "zeromatch-checkpoint v1";

/// Write named tensors as text: a magic line, then per tensor a
/// `param <name> <d0>x<d1>...` line followed by one line of
/// whitespace-separated values in shortest round-trip exponent form.
pub fn save_checkpoint<S: Scalar>(path: &Path, params: &[(String, Tensor<S>)]) -> Result<()> {
    std::fs::write(path, encode_checkpoint(params)).map_err(|e| Error::io(path, e))
}

pub fn encode_checkpoint<S: Scalar>(params: &[(String, Tensor<S>)]) -> String {
    let mut out = String::new();
    out.push_str(CHECKPOINT_MAGIC);
    out.push('\n');
    for (name, t) in params {
        let dims: Vec<String> = t.shape().iter().map(usize::to_string).collect();
        let _ = writeln!(out, "param {name} {}", if dims.is_empty() { "scalar".into() } else { dims.join("x") });
        let values: Vec<String> = t.data().iter().map(|v| format!("{v:e}")).collect();
        out.push_str(&values.join(" "));
        out.push('\n');
    }
    out
}

pub fn load_checkpoint<S: Scalar>(path: &Path) -> Result<Vec<(String, Tensor<S>)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&text, path)
}

pub fn decode_checkpoint<S: Scalar>(text: &str, path: &Path) -> Result<Vec<(String, Tensor<S>)>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l.trim() == CHECKPOINT_MAGIC => {}
        _ => return Err(Error::parse(path, 1, "missing checkpoint header")),
    }
    let mut out = Vec::new();
    while let Some((ln, header)) = lines.next() {
        if header.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = header.split_whitespace().collect();
        let [tag, name, dims] = parts.as_slice() else {
            return Err(Error::parse(path, ln + 1, "expected `param <name> <dims>`"));
        };
        if *tag != "param" {
            return Err(Error::parse(path, ln + 1, format!("unexpected record `{tag}`")));
        }
        let shape: Vec<usize> = if *dims == "scalar" {
            Vec::new()
        } else {
            dims.split('x')
                .map(|d| d.parse().map_err(|_| Error::parse(path, ln + 1, format!("bad dimension `{d}`"))))
                .collect::<Result<_>>()?
        };
        let (vln, values) = lines
            .next()
            .ok_or_else(|| Error::parse(path, ln + 2, "missing value line"))?;
        let data: Vec<S> = values
            .split_whitespace()
            .map(|v| v.parse().map_err(|_| Error::parse(path, vln + 1, format!("bad value `{v}`"))))
            .collect::<Result<_>>()?;
        let t = Tensor::new(shape, data).map_err(|e| Error::parse(path, vln + 1, e.to_string()))?;
        out.push((name.to_string(), t));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn zero_network_gives_zero_logits() {
        let mlp = Mlp::<f64> {
            layers: vec![Linear::zeros(3, 5), Linear::zeros(5, 2)],
            activate_output: false,
        };
        let x = Tensor::from_rows(&[vec![1.0, -2.0, 3.0], vec![0.5, 0.5, 0.5]]).unwrap();
        assert_eq!(mlp.infer(&x).unwrap().data(), &[0.0; 4]);
    }

    #[test]
    fn single_layer_is_affine() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut mlp = Mlp::<f64>::init(&[3, 2], false, &mut rng);
        mlp.layers[0].bias = Tensor::new(vec![2], vec![0.5, -1.0]).unwrap();
        let x = Tensor::from_rows(&[vec![1.0, 2.0, 3.0]]).unwrap();
        let got = mlp.infer(&x).unwrap();
        let w = &mlp.layers[0].weight;
        for j in 0..2 {
            let expect: f64 = (0..3).map(|i| x.data()[i] * w.data()[i * 2 + j]).sum::<f64>() + mlp.layers[0].bias.data()[j];
            assert!((got.data()[j] - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn width_mismatch_is_dimension_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mlp = Mlp::<f64>::init(&[4, 8, 3], false, &mut rng);
        let x = Tensor::zeros(&[2, 5]);
        assert!(matches!(mlp.infer(&x), Err(Error::Dimension { .. })));
    }

    #[test]
    fn glorot_bounds_and_zero_bias() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let l = Linear::<f64>::init(10, 6, &mut rng);
        let limit = (6.0f64 / 16.0).sqrt();
        assert!(l.weight.data().iter().all(|w| w.abs() <= limit));
        assert!(l.bias.data().iter().all(|&b| b == 0.0));
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mlp = Mlp::<f64>::init(&[4, 8, 3], false, &mut rng);
        let named: Vec<_> = mlp.params().enumerate().map(|(i, t)| (format!("p{i}"), t.clone())).collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ck.txt");
        save_checkpoint(&path, &named).unwrap();
        let back: Vec<(String, Tensor<f64>)> = load_checkpoint(&path).unwrap();
        assert_eq!(back, named);
    }

    #[test]
    fn checkpoint_rejects_garbage() {
        let p = Path::new("mem");
        assert!(decode_checkpoint::<f64>("nope\n", p).is_err());
        let bad = format!("{CHECKPOINT_MAGIC}\nparam w 2x2\n1 2 3\n");
        assert!(matches!(decode_checkpoint::<f64>(&bad, p), Err(Error::Parse { line: 3, .. })));
    }
}
