use super::backprop::GradientBundle;
use crate::error::{check_len, HviError, Result};
use crate::estimators::{planar_forward, ElboEstimate, PlanarFlowParams};
use crate::math::{all_finite, dot, sigmoid, softplus};
use crate::model::{TargetModel, VariationalPrior};

/// Length of the unconstrained planar parameter vector `[u_raw, w, b]`.
pub fn planar_raw_len(dim: usize) -> usize {
    2 * dim + 1
}

/// Builds the flow from `[u_raw, w, b]`, projecting `u_raw` so that the map is
/// invertible.
pub fn planar_from_raw(raw: &[f64], dim: usize, iterations: usize) -> Result<PlanarFlowParams> {
    check_len("planar parameters", raw.len(), planar_raw_len(dim))?;
    PlanarFlowParams::from_raw(&raw[..dim], raw[dim..2 * dim].to_vec(), raw[2 * dim], iterations)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanarGradient {
    pub d_theta: Vec<f64>,
    /// Gradient with respect to `[u_raw, w, b]`.
    pub d_flow: Vec<f64>,
    pub d_prior: Vec<f64>,
}

impl From<PlanarGradient> for GradientBundle {
    fn from(g: PlanarGradient) -> Self {
        GradientBundle { d_theta: g.d_theta, d_eps_raw: g.d_flow, d_tempering_raw: vec![], d_prior: g.d_prior }
    }
}

/// Planar-flow ELBO draw and its gradient with respect to θ, the raw flow
/// parameters `[u_raw, w, b]` and the prior's φ.
#[allow(clippy::too_many_arguments)]
pub fn backprop_planar<M, P>(
    target: &M,
    theta: &[f64],
    x: &M::Obs,
    raw: &[f64],
    iterations: usize,
    prior: &P,
    phi: &[f64],
    noise: &[f64],
) -> Result<(ElboEstimate, PlanarGradient)>
where
    M: TargetModel,
    P: VariationalPrior<M::Obs> + ?Sized,
{
    let l = target.latent_dim();
    check_len("model parameters", theta.len(), target.num_params())?;
    check_len("prior parameters", phi.len(), prior.num_params())?;
    check_len("prior noise", noise.len(), prior.noise_dim())?;
    let nf = planar_from_raw(raw, l, iterations)?;
    let z0 = prior.reparam_sample(phi, x, noise);
    let tr = planar_forward(&nf, &z0)?;
    let z_final = tr.states[iterations].clone();
    let log_joint = target.log_joint(theta, x, &z_final);
    let log_q0 = prior.log_density(phi, x, &z0);
    let est = ElboEstimate {
        value: log_joint - log_q0 + tr.log_det,
        final_hamiltonian: -log_joint,
        log_jacobian: tr.log_det,
        z_final: z_final.clone(),
    };

    let c = dot(&nf.u, &nf.w);
    let mut a_z = target.grad_z(theta, x, &z_final);
    let mut g_u = vec![0.0; l];
    let mut g_w = vec![0.0; l];
    let mut g_b = 0.0;
    for t in (0..iterations).rev() {
        let h = tr.activations[t];
        let dh = 1.0 - h * h;
        let ddh = -2.0 * h * dh;
        let det = tr.det_terms[t];
        // z_{t+1} = z_t + u h_t
        let s = dot(&a_z, &nf.u);
        for j in 0..l {
            g_u[j] += a_z[j] * h;
        }
        // log|1 + h'(a_t) uᵀw|
        let q = s * dh + ddh * c / det;
        for j in 0..l {
            g_u[j] += dh / det * nf.w[j];
            g_w[j] += dh / det * nf.u[j] + q * tr.states[t][j];
            a_z[j] += q * nf.w[j];
        }
        g_b += q;
        if !(all_finite(&a_z) && all_finite(&g_u) && all_finite(&g_w)) {
            return Err(HviError::Integration { step: t + 1, message: "non-finite planar adjoint".into() });
        }
    }

    for (a, g) in a_z.iter_mut().zip(prior.grad_log_density_z(phi, x, &z0)) {
        *a -= g;
    }
    let mut d_prior = prior.sample_vjp(phi, x, noise, &a_z);
    for (d, g) in d_prior.iter_mut().zip(prior.grad_log_density_phi(phi, x, &z0)) {
        *d -= g;
    }

    // û = u + f(s) w / ‖w‖², f(s) = softplus(s) - 1 - s, s = wᵀu_raw
    let u_raw = &raw[..l];
    let ww = dot(&nf.w, &nf.w);
    let mut d_flow = vec![0.0; planar_raw_len(l)];
    if ww == 0.0 {
        d_flow[..l].copy_from_slice(&g_u);
        d_flow[l..2 * l].copy_from_slice(&g_w);
    } else {
        let s = dot(&nf.w, u_raw);
        let f = softplus(s) - 1.0 - s;
        let df = sigmoid(s) - 1.0;
        let gw = dot(&g_u, &nf.w);
        for j in 0..l {
            d_flow[j] = g_u[j] + df * gw / ww * nf.w[j];
            d_flow[l + j] =
                g_w[j] + df * gw / ww * u_raw[j] + f / ww * g_u[j] - 2.0 * f * gw / (ww * ww) * nf.w[j];
        }
    }
    d_flow[2 * l] = g_b;

    let d_theta = target.grad_theta(theta, x, &z_final);
    Ok((est, PlanarGradient { d_theta, d_flow, d_prior }))
}
