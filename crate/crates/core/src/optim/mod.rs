//! AdamW plus the learning-rate and auxiliary-loss annealing schedules.

mod adamw;
mod schedule;

pub use adamw::{AdamW, AdamWConfig, AdamWState};
pub use schedule::{AnnealSchedule, LrSchedule};
