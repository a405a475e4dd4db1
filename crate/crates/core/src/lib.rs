//! Asynchronous mini-batch composite mirror descent.
//!
//! The crate is `no_std` (it needs `alloc`) and contains everything that is
//! pure computation:
//!
//! * [`geometry`]: distance generating functions, Bregman distances, norm
//!   pairs and the mini-batch variance constant.
//! * [`composite`]: regularizers, the composite mirror step and objective
//!   evaluation.
//! * [`oracle`]: losses, the sampled first-order oracle and constant
//!   estimation.
//! * [`schedules`]: step-size policies and the analytic convergence bounds.
//! * [`engine`]: delay models plus the deterministic simulator and replayer.
//!
//! Threads, files and the command line live in the `asyncmb` crate.
#![cfg_attr(not(test), no_std)]
// `!(v > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod composite;
pub mod engine;
mod error;
pub mod geometry;
pub(crate) mod math;
pub mod oracle;
pub mod schedules;

pub use composite::{
    cesaro_average, mirror_step, mirror_step_into, phi_value, psi_value, CesaroAverage,
    ProblemSpec, Regularizer,
};
pub use engine::{
    replay, simulate, DelayModel, Experiment, RunOptions, RunReport, TracePoint, UpdateRecord,
};
pub use error::{Error, Result};
pub use geometry::{
    bregman, dual_norm, grad_omega, variance_constant_c, DistanceGenerator, GeneratorKind,
    NormPair, PrimalNorm,
};
pub use oracle::{
    batch_gradient, estimate_sigma, lipschitz_bound, loss_grad, loss_value, DataPoint, Dataset,
    LossKind, Sampling, StochasticOracle,
};
pub use schedules::{Schedule, ScheduleKind, ScheduleParams};
