//! Time-inhomogeneous Hamiltonian variational inference.
//!
//! The crate builds unbiased marginal-likelihood estimators from a
//! deterministic leapfrog-plus-tempering flow, differentiates them exactly with
//! hand-written adjoints, and trains latent-variable models by stochastic
//! gradient ascent on the resulting bound. Baselines (mean-field VB, planar
//! normalising flows, IWAE) and an AIS reference estimator share the same
//! model interface.

// NaN must fail validation, so `!(x > 0.0)` is deliberate
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::too_many_arguments)]

pub mod adjoint;
pub mod bench;
pub mod error;
pub mod estimators;
pub mod flow;
pub mod math;
pub mod model;
pub mod rng;
pub mod trainer;

pub use error::{HviError, Result};
