use rand::Rng;

use super::ElboEstimate;
use crate::error::{check_len, HviError, Result};
use crate::flow::{forward_flow, FlowConfig, PhasePoint, Trajectory};
use crate::math::{dot, log_std_normal, LN_2PI};
use crate::model::{TargetModel, VariationalPrior};
use crate::rng::normal_vec;

/// Base noise of one Hamiltonian ELBO draw: the prior's reparameterisation
/// noise and `γ₀ ~ N(0, I_ℓ)`, with `ρ₀ = γ₀ / sqrt(β₀)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HisNoise {
    pub prior: Vec<f64>,
    pub gamma: Vec<f64>,
}

impl HisNoise {
    pub fn sample<R: Rng + ?Sized>(rng: &mut R, noise_dim: usize, latent_dim: usize) -> Self {
        let prior = normal_vec(rng, noise_dim);
        let gamma = normal_vec(rng, latent_dim);
        Self { prior, gamma }
    }
}

pub(crate) struct HisForward {
    pub z0: Vec<f64>,
    pub trajectory: Trajectory,
    pub log_joint: f64,
    pub log_q0: f64,
}

pub(crate) fn run_his<M, P>(
    target: &M,
    theta: &[f64],
    x: &M::Obs,
    config: &FlowConfig,
    prior: &P,
    phi_prior: &[f64],
    noise: &HisNoise,
) -> Result<HisForward>
where
    M: TargetModel,
    P: VariationalPrior<M::Obs> + ?Sized,
{
    let l = target.latent_dim();
    check_len("prior latent dimension", prior.latent_dim(), l)?;
    check_len("prior parameters", phi_prior.len(), prior.num_params())?;
    check_len("prior noise", noise.prior.len(), prior.noise_dim())?;
    check_len("momentum noise", noise.gamma.len(), l)?;
    let z0 = prior.reparam_sample(phi_prior, x, &noise.prior);
    let scale = 1.0 / config.beta0().sqrt();
    let rho0 = noise.gamma.iter().map(|g| g * scale).collect();
    let trajectory = forward_flow(config, target, theta, x, &PhasePoint { z: z0.clone(), rho: rho0 })?;
    let log_joint = target.log_joint(theta, x, &trajectory.last().z);
    let log_q0 = prior.log_density(phi_prior, x, &z0);
    if !(log_joint.is_finite() && log_q0.is_finite()) {
        return Err(HviError::Integration {
            step: config.steps,
            message: "non-finite log density at the flow endpoints".into(),
        });
    }
    Ok(HisForward { z0, trajectory, log_joint, log_q0 })
}

impl HisForward {
    fn estimate(&self, value: f64) -> ElboEstimate {
        let last = self.trajectory.last();
        ElboEstimate {
            value,
            final_hamiltonian: -self.log_joint + 0.5 * dot(&last.rho, &last.rho),
            log_jacobian: self.trajectory.log_jacobian,
            z_final: last.z.clone(),
        }
    }

    /// `log p̄ - log q̄` with the flow's own accumulated log-Jacobian.
    pub fn his_value(&self) -> f64 {
        let l = self.z0.len() as f64;
        let rho0 = &self.trajectory.points[0].rho;
        let beta0 = self.trajectory.betas[0];
        let log_rho0 = -0.5 * (l * LN_2PI - l * beta0.ln() + beta0 * dot(rho0, rho0));
        self.log_joint + log_std_normal(&self.trajectory.last().rho)
            - self.log_q0
            - log_rho0
            + self.trajectory.log_jacobian
    }

    /// `log p(x, z_K) - ½ρ_Kᵀρ_K - log q⁰(z₀) + ℓ/2`.
    pub fn rao_blackwell_value(&self) -> f64 {
        let rho = &self.trajectory.last().rho;
        self.log_joint - 0.5 * dot(rho, rho) - self.log_q0 + 0.5 * self.z0.len() as f64
    }

    pub fn his_estimate(&self) -> ElboEstimate {
        self.estimate(self.his_value())
    }

    pub fn rao_blackwell_estimate(&self) -> ElboEstimate {
        self.estimate(self.rao_blackwell_value())
    }
}

/// Hamiltonian importance-sampling ELBO draw, `log p̄ - log q̄` with
/// `p̄ = p_θ(x, z_K) N(ρ_K | 0, I)` and
/// `q̄ = q⁰(z₀) N(ρ₀ | 0, β₀⁻¹ I) β₀^{-ℓ/2}`.
/// `exp` of this is an unbiased estimate of `p_θ(x)`.
pub fn his_elbo<M, P>(
    target: &M,
    theta: &[f64],
    x: &M::Obs,
    config: &FlowConfig,
    prior: &P,
    phi_prior: &[f64],
    noise: &HisNoise,
) -> Result<ElboEstimate>
where
    M: TargetModel,
    P: VariationalPrior<M::Obs> + ?Sized,
{
    Ok(run_his(target, theta, x, config, prior, phi_prior, noise)?.his_estimate())
}

/// Same bound with the initial-momentum density integrated out analytically:
/// `log p_θ(x, z_K) - ½ρ_Kᵀρ_K - log q⁰(z₀) + ℓ/2`.
///
/// Per draw this differs from [`his_elbo`] by exactly `ℓ/2 - ½γ₀ᵀγ₀`, which has
/// zero mean and no parameter dependence.
pub fn his_elbo_rao_blackwell<M, P>(
    target: &M,
    theta: &[f64],
    x: &M::Obs,
    config: &FlowConfig,
    prior: &P,
    phi_prior: &[f64],
    noise: &HisNoise,
) -> Result<ElboEstimate>
where
    M: TargetModel,
    P: VariationalPrior<M::Obs> + ?Sized,
{
    Ok(run_his(target, theta, x, config, prior, phi_prior, noise)?.rao_blackwell_estimate())
}
