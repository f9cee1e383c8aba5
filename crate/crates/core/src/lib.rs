//! Semi-supervised learning with foundation-model pseudo-labels.
//!
//! A two-stage student trainer (distillation on teacher labels, then
//! consistency-regularized SSL with an annealed auxiliary distillation head)
//! plus the baselines it is compared against, built on a small reverse-mode
//! autodiff engine and driven by a simulated, quality-controlled teacher.

pub mod autodiff;
pub mod data;
pub mod error;
pub mod harness;
pub mod nn;
pub mod optim;
pub mod oracle;
pub mod scalar;
pub mod seeding;
pub mod ssl;
pub mod tensor;

pub use autodiff::{Graph, Target, Var};
pub use error::{Error, Result};
pub use scalar::Scalar;
pub use tensor::Tensor;

/// Double-precision tensor, the default element type across the crate.
pub type Tensor64 = tensor::Tensor<f64>;
pub type Tensor32 = tensor::Tensor<f32>;
pub type Graph64 = autodiff::Graph<f64>;
pub type Student = ssl::StudentModel<f64>;
pub type Student32 = ssl::StudentModel<f32>;
