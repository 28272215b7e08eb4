use super::params::UnconstrainedParams;
use crate::error::{check_len, HviError, Result};
use crate::estimators::{prior_log_weight, run_his, ElboEstimate, HisNoise};
use crate::flow::{FlowConfig, TemperingScheme};
use crate::math::{all_finite, dot};
use crate::model::{TargetModel, VariationalPrior};

/// Gradients with respect to the flow's constrained parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstrainedGradient {
    pub d_theta: Vec<f64>,
    /// `∂/∂ε_j`.
    pub d_eps: Vec<f64>,
    /// `∂/∂β₀` (Fixed), `∂/∂α_k` (Free), or empty.
    pub d_tempering: Vec<f64>,
    /// Variational-prior parameters; empty for a fixed prior.
    pub d_prior: Vec<f64>,
}

/// Gradients laid out like the trainable parameter vectors: θ, the
/// unconstrained flow parameters, and the prior's φ.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBundle {
    pub d_theta: Vec<f64>,
    pub d_eps_raw: Vec<f64>,
    pub d_tempering_raw: Vec<f64>,
    pub d_prior: Vec<f64>,
}

impl GradientBundle {
    /// `[d_eps_raw, d_tempering_raw]`, matching [`UnconstrainedParams::to_vec`].
    pub fn d_flow(&self) -> Vec<f64> {
        let mut v = self.d_eps_raw.clone();
        v.extend_from_slice(&self.d_tempering_raw);
        v
    }

    pub fn is_finite(&self) -> bool {
        all_finite(&self.d_theta)
            && all_finite(&self.d_eps_raw)
            && all_finite(&self.d_tempering_raw)
            && all_finite(&self.d_prior)
    }
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    y.iter_mut().zip(x).for_each(|(y, x)| *y += a * x);
}

fn check_adjoint(v: &[f64], step: usize) -> Result<()> {
    if all_finite(v) {
        Ok(())
    } else {
        Err(HviError::Integration { step, message: "non-finite adjoint".into() })
    }
}

/// `∂α_k/∂t` for the quadratic schedule written in `t = 1/sqrt(β₀)`:
/// `α_k = D_k / D_{k-1}` with `D_k = k²/K² + t (1 - k²/K²)`.
fn d_alpha_d_t(t: f64, k: usize, steps: usize) -> f64 {
    let kk = (steps * steps) as f64;
    let f1 = (k * k) as f64 / kk;
    let f0 = ((k - 1) * (k - 1)) as f64 / kk;
    let d1 = f1 + t * (1.0 - f1);
    let d0 = f0 + t * (1.0 - f0);
    ((1.0 - f1) * d0 - d1 * (1.0 - f0)) / (d0 * d0)
}

/// Gradient of `scale ×` the Rao-Blackwellised Hamiltonian ELBO draw with
/// respect to θ, the constrained flow parameters and the prior's φ.
///
/// The Rao-Blackwellised and plain estimates differ by a parameter-free term,
/// so this is also the gradient of [`crate::estimators::his_elbo`].
pub fn backprop_his_config<M, P>(
    target: &M,
    theta: &[f64],
    x: &M::Obs,
    config: &FlowConfig,
    prior: &P,
    phi_prior: &[f64],
    noise: &HisNoise,
    scale: f64,
) -> Result<(ElboEstimate, ConstrainedGradient)>
where
    M: TargetModel,
    P: VariationalPrior<M::Obs> + ?Sized,
{
    check_len("model parameters", theta.len(), target.num_params())?;
    let fwd = run_his(target, theta, x, config, prior, phi_prior, noise)?;
    let tr = &fwd.trajectory;
    let steps = config.steps;
    let l = target.latent_dim();
    let eps = &config.eps;

    let last = tr.last();
    let mut a_z: Vec<f64> = tr.grad_potential[steps].iter().map(|g| -scale * g).collect();
    let mut a_rho: Vec<f64> = last.rho.iter().map(|r| -scale * r).collect();
    let mut d_theta = target.grad_theta(theta, x, &last.z);
    d_theta.iter_mut().for_each(|g| *g *= scale);
    let mut d_eps = vec![0.0; l];
    let mut d_alpha = vec![0.0; steps];

    for k in (1..=steps).rev() {
        let alpha = tr.alphas[k - 1];
        let z_k = &tr.points[k].z;
        let z_prev = &tr.points[k - 1].z;
        let g_k = &tr.grad_potential[k];
        let g_prev = &tr.grad_potential[k - 1];
        let half = &tr.half_momentum[k - 1];

        // ρ_k = α_k ρ'_k
        d_alpha[k - 1] += dot(&a_rho, &tr.pre_temper_momentum[k - 1]);
        let a_pre: Vec<f64> = a_rho.iter().map(|a| alpha * a).collect();

        // ρ'_k = ρ̃_k - (ε/2)⊙∇U(z_k)
        let v: Vec<f64> = eps.iter().zip(&a_pre).map(|(e, a)| 0.5 * e * a).collect();
        axpy(&mut a_z, -1.0, &target.potential_hvp(theta, x, z_k, &v));
        axpy(&mut d_theta, -1.0, &target.potential_mixed_vjp(theta, x, z_k, &v));
        for j in 0..l {
            d_eps[j] -= 0.5 * a_pre[j] * g_k[j];
        }

        // z_k = z_{k-1} + ε⊙ρ̃_k
        let a_half: Vec<f64> = (0..l).map(|j| a_pre[j] + eps[j] * a_z[j]).collect();
        for j in 0..l {
            d_eps[j] += a_z[j] * half[j];
        }

        // ρ̃_k = ρ_{k-1} - (ε/2)⊙∇U(z_{k-1})
        let v: Vec<f64> = eps.iter().zip(&a_half).map(|(e, a)| 0.5 * e * a).collect();
        axpy(&mut a_z, -1.0, &target.potential_hvp(theta, x, z_prev, &v));
        axpy(&mut d_theta, -1.0, &target.potential_mixed_vjp(theta, x, z_prev, &v));
        for j in 0..l {
            d_eps[j] -= 0.5 * a_half[j] * g_prev[j];
        }
        a_rho = a_half;

        check_adjoint(&a_z, k)?;
        check_adjoint(&a_rho, k)?;
        check_adjoint(&d_theta, k)?;
        check_adjoint(&d_eps, k)?;
    }

    // z₀ = Ψ_φ(x, noise) enters both the flow and -log q⁰(z₀)
    let gq = prior.grad_log_density_z(phi_prior, x, &fwd.z0);
    axpy(&mut a_z, -scale, &gq);
    let mut d_prior = prior.sample_vjp(phi_prior, x, &noise.prior, &a_z);
    axpy(&mut d_prior, -scale, &prior.grad_log_density_phi(phi_prior, x, &fwd.z0));

    // ρ₀ = γ₀ / sqrt(β₀)
    let rho0 = &tr.points[0].rho;
    let d_tempering = match &config.tempering {
        TemperingScheme::None => vec![],
        TemperingScheme::Fixed { .. } if steps == 0 => vec![0.0],
        TemperingScheme::Fixed { .. } => {
            let beta0 = tr.betas[0];
            let t = 1.0 / beta0.sqrt();
            let mut d_t = dot(&a_rho, &noise.gamma);
            for k in 1..=steps {
                d_t += d_alpha[k - 1] * d_alpha_d_t(t, k, steps);
            }
            vec![d_t * (-0.5 * beta0.powf(-1.5))]
        }
        TemperingScheme::Free { alphas } => {
            let s = dot(&a_rho, rho0);
            d_alpha.iter().zip(alphas).map(|(d, a)| d - s / a).collect()
        }
    };
    check_adjoint(&d_prior, 0)?;
    check_adjoint(&d_tempering, 0)?;

    Ok((fwd.rao_blackwell_estimate(), ConstrainedGradient { d_theta, d_eps, d_tempering, d_prior }))
}

/// [`backprop_his_config`] in the unconstrained flow parameterisation, with
/// the objective multiplied by `scale`.
pub fn backprop_his_scaled<M, P>(
    target: &M,
    theta: &[f64],
    x: &M::Obs,
    params: &UnconstrainedParams,
    prior: &P,
    phi_prior: &[f64],
    noise: &HisNoise,
    scale: f64,
) -> Result<(ElboEstimate, GradientBundle)>
where
    M: TargetModel,
    P: VariationalPrior<M::Obs> + ?Sized,
{
    let config = params.constrain()?;
    let (est, g) = backprop_his_config(target, theta, x, &config, prior, phi_prior, noise, scale)?;
    let d_eps_raw = g.d_eps.iter().zip(params.eps_jacobian()).map(|(d, j)| d * j).collect();
    let d_tempering_raw =
        g.d_tempering.iter().zip(params.tempering_jacobian()).map(|(d, j)| d * j).collect();
    Ok((est, GradientBundle { d_theta: g.d_theta, d_eps_raw, d_tempering_raw, d_prior: g.d_prior }))
}

/// Rao-Blackwellised Hamiltonian ELBO draw and its reparameterisation
/// gradient in the unconstrained parameterisation.
pub fn backprop_his<M, P>(
    target: &M,
    theta: &[f64],
    x: &M::Obs,
    params: &UnconstrainedParams,
    prior: &P,
    phi_prior: &[f64],
    noise: &HisNoise,
) -> Result<(ElboEstimate, GradientBundle)>
where
    M: TargetModel,
    P: VariationalPrior<M::Obs> + ?Sized,
{
    backprop_his_scaled(target, theta, x, params, prior, phi_prior, noise, 1.0)
}

/// Gradient of a plain reparameterised ELBO draw
/// `log p_θ(x, z) - log q_φ(z | x)`, `z = Ψ_φ(x, noise)`. The flow blocks of
/// the bundle are empty.
pub fn backprop_vanilla<M, P>(
    target: &M,
    theta: &[f64],
    x: &M::Obs,
    prior: &P,
    phi: &[f64],
    noise: &[f64],
) -> Result<(ElboEstimate, GradientBundle)>
where
    M: TargetModel,
    P: VariationalPrior<M::Obs> + ?Sized,
{
    check_len("model parameters", theta.len(), target.num_params())?;
    let value = prior_log_weight(target, theta, x, prior, phi, noise)?;
    let z = prior.reparam_sample(phi, x, noise);
    let mut a_z = target.grad_z(theta, x, &z);
    axpy(&mut a_z, -1.0, &prior.grad_log_density_z(phi, x, &z));
    let mut d_prior = prior.sample_vjp(phi, x, noise, &a_z);
    axpy(&mut d_prior, -1.0, &prior.grad_log_density_phi(phi, x, &z));
    let log_joint = target.log_joint(theta, x, &z);
    let bundle = GradientBundle {
        d_theta: target.grad_theta(theta, x, &z),
        d_eps_raw: vec![],
        d_tempering_raw: vec![],
        d_prior,
    };
    let est = ElboEstimate { value, final_hamiltonian: -log_joint, log_jacobian: 0.0, z_final: z };
    Ok((est, bundle))
}
