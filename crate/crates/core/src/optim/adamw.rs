use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamWConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 1e-4,
        }
    }
}

/// Moment buffers, shape-congruent with the parameters they track.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamWState<S> {
    pub first: Vec<Tensor<S>>,
    pub second: Vec<Tensor<S>>,
    pub step: u64,
}

/// AdamW with decoupled weight decay.
#[derive(Clone, Debug)]
pub struct AdamW<S> {
    pub config: AdamWConfig,
    pub state: AdamWState<S>,
}

impl<S: Scalar> AdamW<S> {
    pub fn new<'a>(config: AdamWConfig, params: impl IntoIterator<Item = &'a Tensor<S>>) -> Self {
        let first: Vec<Tensor<S>> = params.into_iter().map(|p| Tensor::zeros(p.shape())).collect();
        let second = first.clone();
        Self {
            config,
            state: AdamWState { first, second, step: 0 },
        }
    }

    /// One update of every parameter. Decay is applied as `θ ← θ(1 − lr·wd)`
    /// before the bias-corrected adaptive step.
    pub fn step<'a>(
        &mut self,
        params: impl IntoIterator<Item = &'a mut Tensor<S>>,
        grads: &[Tensor<S>],
        lr: f64,
    ) -> Result<()> {
        let params: Vec<&mut Tensor<S>> = params.into_iter().collect();
        if params.len() != grads.len() || params.len() != self.state.first.len() {
            return Err(Error::Dimension {
                op: "adamw_step",
                left: vec![params.len()],
                right: vec![grads.len()],
            });
        }
        for (p, g) in params.iter().zip(grads) {
            if p.shape() != g.shape() {
                return Err(Error::Dimension {
                    op: "adamw_step",
                    left: p.shape().to_vec(),
                    right: g.shape().to_vec(),
                });
            }
        }
        self.state.step += 1;
        let t = self.state.step as i32;
        let c = &self.config;
        let (b1, b2) = (S::lit(c.beta1), S::lit(c.beta2));
        let one = S::one();
        let bc1 = one - b1.powi(t);
        let bc2 = one - b2.powi(t);
        let lr_s = S::lit(lr);
        let decay = one - lr_s * S::lit(c.weight_decay);
        let eps = S::lit(c.eps);
        for (((p, g), m), v) in params
            .into_iter()
            .zip(grads)
            .zip(&mut self.state.first)
            .zip(&mut self.state.second)
        {
            for (((theta, &gi), mi), vi) in p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                *mi = b1 * *mi + (one - b1) * gi;
                *vi = b2 * *vi + (one - b2) * gi * gi;
                let m_hat = *mi / bc1;
                let v_hat = *vi / bc2;
                *theta = *theta * decay - lr_s * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
