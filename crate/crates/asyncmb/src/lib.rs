//! Threaded runner, dataset formats, synthetic problems and the experiment
//! commands built on [`asyncmb_core`].

// `!(v > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod synth;
pub mod threaded;

pub use config::ExperimentConfig;
pub use error::{AppError, Result};
pub use threaded::run_threaded;
