//! Planar normalising flow with parameters tied across iterations:
//! `z ← z + u tanh(wᵀz + b)`, log-determinant `log|1 + uᵀψ(z)|` with
//! `ψ(z) = (1 - tanh²(wᵀz + b)) w`.

use super::ElboEstimate;
use crate::error::{check_len, HviError, Result};
use crate::math::{dot, softplus};
use crate::model::{TargetModel, VariationalPrior};

/// Below this `|1 + uᵀψ|` the map is treated as singular.
pub const SINGULARITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct PlanarFlowParams {
    /// Effective `u`; must satisfy `wᵀu >= -1`.
    pub u: Vec<f64>,
    pub w: Vec<f64>,
    pub b: f64,
    pub iterations: usize,
}

impl PlanarFlowParams {
    pub fn new(u: Vec<f64>, w: Vec<f64>, b: f64, iterations: usize) -> Result<Self> {
        let p = Self { u, w, b, iterations };
        p.validate()?;
        Ok(p)
    }

    /// Builds the flow from an unconstrained `u`, projected with
    /// [`planar_reproject`] so the map stays invertible.
    pub fn from_raw(u_raw: &[f64], w: Vec<f64>, b: f64, iterations: usize) -> Result<Self> {
        check_len("planar w", w.len(), u_raw.len())?;
        Self::new(planar_reproject(u_raw, &w), w, b, iterations)
    }

    pub fn identity(dim: usize, iterations: usize) -> Self {
        Self { u: vec![0.0; dim], w: vec![0.0; dim], b: 0.0, iterations }
    }

    pub fn dim(&self) -> usize {
        self.u.len()
    }

    pub fn validate(&self) -> Result<()> {
        check_len("planar w", self.w.len(), self.u.len())?;
        let wu = dot(&self.w, &self.u);
        if wu < -1.0 {
            return Err(HviError::Domain(format!("planar flow not invertible: wᵀu = {wu} < -1")));
        }
        Ok(())
    }
}

/// `û = u + (m(wᵀu) - wᵀu) w / ‖w‖²` with `m(s) = -1 + softplus(s)`, which
/// guarantees `wᵀû > -1`. Returns `u` unchanged when `w = 0`.
pub fn planar_reproject(u_raw: &[f64], w: &[f64]) -> Vec<f64> {
    let ww = dot(w, w);
    if ww == 0.0 {
        return u_raw.to_vec();
    }
    let wu = dot(w, u_raw);
    let shift = (-1.0 + softplus(wu) - wu) / ww;
    u_raw.iter().zip(w).map(|(u, w)| u + shift * w).collect()
}

/// States and per-iteration quantities of one planar-flow pass.
#[derive(Debug, Clone)]
pub struct PlanarTrace {
    /// `z_0, …, z_T`.
    pub states: Vec<Vec<f64>>,
    /// `tanh(wᵀz_t + b)` for `t = 0..T`.
    pub activations: Vec<f64>,
    /// `1 + (1 - h_t²) uᵀw`.
    pub det_terms: Vec<f64>,
    pub log_det: f64,
}

pub fn planar_forward(nf: &PlanarFlowParams, z0: &[f64]) -> Result<PlanarTrace> {
    nf.validate()?;
    check_len("planar state", z0.len(), nf.dim())?;
    let uw = dot(&nf.u, &nf.w);
    let mut states = Vec::with_capacity(nf.iterations + 1);
    let mut activations = Vec::with_capacity(nf.iterations);
    let mut det_terms = Vec::with_capacity(nf.iterations);
    let mut log_det = 0.0;
    states.push(z0.to_vec());
    for t in 0..nf.iterations {
        let z = &states[t];
        let h = (dot(&nf.w, z) + nf.b).tanh();
        let det = 1.0 + (1.0 - h * h) * uw;
        if !(det.abs() >= SINGULARITY_TOL) {
            return Err(HviError::Singularity(det.abs()));
        }
        log_det += det.abs().ln();
        let next = z.iter().zip(&nf.u).map(|(z, u)| z + u * h).collect();
        states.push(next);
        activations.push(h);
        det_terms.push(det);
    }
    Ok(PlanarTrace { states, activations, det_terms, log_det })
}

/// `log p_θ(x, z_T) - log q⁰(z₀) + Σ_t log|1 + uᵀψ(z_t)|`.
pub fn planar_nf_elbo<M, P>(
    target: &M,
    theta: &[f64],
    x: &M::Obs,
    nf: &PlanarFlowParams,
    prior: &P,
    phi_prior: &[f64],
    noise: &[f64],
) -> Result<ElboEstimate>
where
    M: TargetModel,
    P: VariationalPrior<M::Obs> + ?Sized,
{
    check_len("planar dimension", nf.dim(), target.latent_dim())?;
    check_len("prior parameters", phi_prior.len(), prior.num_params())?;
    check_len("prior noise", noise.len(), prior.noise_dim())?;
    let z0 = prior.reparam_sample(phi_prior, x, noise);
    let tr = planar_forward(nf, &z0)?;
    let z_final = tr.states.last().expect("nonempty").clone();
    let log_joint = target.log_joint(theta, x, &z_final);
    Ok(ElboEstimate {
        value: log_joint - prior.log_density(phi_prior, x, &z0) + tr.log_det,
        final_hamiltonian: -log_joint,
        log_jacobian: tr.log_det,
        z_final,
    })
}
