//! Student model, SSL/distillation objectives and the training loops.

mod align;
pub mod losses;
mod model;
mod train;

pub use align::DistributionAligner;
pub use model::{BoundStudent, HeadInput, StudentArch, StudentModel};
pub use train::{
    evaluate, teacher_agreement, train, write_step_log, KdInput, Method, SslHyper, StepLog, TrainOutcome,
};
