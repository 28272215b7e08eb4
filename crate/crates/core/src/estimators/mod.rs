//! Single-draw ELBO estimators and marginal-likelihood estimators.
//!
//! Every estimator is a pure function of its parameters and an explicit noise
//! draw (or RNG), so replicates can be evaluated in any order or in parallel.

mod ais;
mod his;
mod nll;
mod planar;
mod simple;

pub use ais::{ais_log_likelihood, AisConfig};
pub(crate) use his::run_his;
pub use his::{his_elbo, his_elbo_rao_blackwell, HisNoise};
pub use nll::{importance_sampled_nll, Proposal, DEFAULT_NLL_SAMPLES};
pub use planar::{planar_forward, planar_nf_elbo, planar_reproject, PlanarFlowParams, PlanarTrace};
pub use simple::{iwae_bound, prior_log_weight, vanilla_elbo};

/// One draw of a log-domain estimator with flow diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct ElboEstimate {
    pub value: f64,
    /// `U(z_K) + ½ρ_Kᵀρ_K`; momentum-free estimators report `U(z)`.
    pub final_hamiltonian: f64,
    pub log_jacobian: f64,
    pub z_final: Vec<f64>,
}
