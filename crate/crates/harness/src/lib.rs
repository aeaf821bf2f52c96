//! Experiment harness for `loco-core`: configuration, disturbance sweeps,
//! tracking runs, solver benchmarks and the files they emit.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod config;
pub mod episode;
mod error;
pub mod report;
pub mod summary;
pub mod sweep;
pub mod track;

pub use error::{Error, Result};
