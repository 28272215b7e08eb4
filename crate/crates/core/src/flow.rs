//! Deterministic time-inhomogeneous Hamiltonian flow.
//!
//! Each of the `K` steps is a leapfrog step (half-kick, drift, half-kick, all
//! shears with unit Jacobian) followed by a momentum scaling `ρ ← α_k ρ`. The
//! scalings are the only source of volume change: the flow's log-Jacobian is
//! `ℓ Σ_k log α_k`, which equals `(ℓ/2) log β₀` for every tempering scheme.

use std::io::Write;

use crate::error::{check_len, HviError, Result};
use crate::math::{all_finite, dot};
use crate::model::TargetModel;

#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint {
    pub z: Vec<f64>,
    pub rho: Vec<f64>,
}

impl PhasePoint {
    pub fn new(z: Vec<f64>, rho: Vec<f64>) -> Result<Self> {
        check_len("momentum", rho.len(), z.len())?;
        Ok(Self { z, rho })
    }

    pub fn dim(&self) -> usize {
        self.z.len()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        crate::math::max_abs_diff(&self.z, &other.z).max(crate::math::max_abs_diff(&self.rho, &other.rho))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TemperingScheme {
    /// Homogeneous dynamics: every `α_k = 1`, `β₀ = 1`.
    None,
    /// `β_k` follows the quadratic schedule from `β₀` to 1 and
    /// `α_k = sqrt(β_{k-1} / β_k)`.
    Fixed { beta0: f64 },
    /// Free per-step `α_k`; `β₀ = Π α_k²`.
    Free { alphas: Vec<f64> },
}

/// `β_k` of the quadratic schedule,
/// `sqrt(β_k) = ((1 - 1/sqrt(β₀)) k²/K² + 1/sqrt(β₀))⁻¹`.
///
/// The endpoints are returned exactly: `β₀` at `k = 0` and 1 at `k = K`.
pub fn quadratic_beta(beta0: f64, k: usize, steps: usize) -> Result<f64> {
    if !(beta0 > 0.0 && beta0 <= 1.0) {
        return Err(HviError::Domain(format!("beta0 must lie in (0, 1], got {beta0}")));
    }
    if steps == 0 || k > steps {
        return Err(HviError::Config(format!("need 0 <= k <= K with K >= 1, got k={k}, K={steps}")));
    }
    if k == 0 {
        return Ok(beta0);
    }
    if k == steps {
        return Ok(1.0);
    }
    let t = 1.0 / beta0.sqrt();
    let frac = (k * k) as f64 / (steps * steps) as f64;
    let inv_sqrt = (1.0 - t) * frac + t;
    Ok(1.0 / (inv_sqrt * inv_sqrt))
}

/// `ρ ← α ρ`, returning the scaled momentum and its log-Jacobian `ℓ log α`.
pub fn temper_momentum(rho: &[f64], alpha: f64) -> (Vec<f64>, f64) {
    (rho.iter().map(|r| alpha * r).collect(), rho.len() as f64 * alpha.ln())
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowConfig {
    /// Number of leapfrog+tempering steps `K`.
    pub steps: usize,
    /// Per-dimension leapfrog step sizes, each in `(0, xi)`.
    pub eps: Vec<f64>,
    pub tempering: TemperingScheme,
    /// Step-size cap.
    pub xi: f64,
}

pub const DEFAULT_XI: f64 = 0.5;

impl FlowConfig {
    pub fn new(steps: usize, eps: Vec<f64>, tempering: TemperingScheme, xi: f64) -> Result<Self> {
        let cfg = Self { steps, eps, tempering, xi };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn dim(&self) -> usize {
        self.eps.len()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.xi > 0.0) {
            return Err(HviError::Domain(format!("step-size cap must be positive, got {}", self.xi)));
        }
        if let Some(e) = self.eps.iter().find(|e| !(**e > 0.0 && **e < self.xi)) {
            return Err(HviError::Domain(format!("step size {e} outside (0, {})", self.xi)));
        }
        match &self.tempering {
            TemperingScheme::None => {}
            TemperingScheme::Fixed { beta0 } => {
                if !(*beta0 > 0.0 && *beta0 < 1.0) {
                    return Err(HviError::Domain(format!("fixed beta0 must lie in (0, 1), got {beta0}")));
                }
            }
            TemperingScheme::Free { alphas } => {
                check_len("free tempering alphas", alphas.len(), self.steps)?;
                if let Some(a) = alphas.iter().find(|a| !(**a > 0.0 && **a <= 1.0)) {
                    return Err(HviError::Domain(format!("alpha {a} outside (0, 1]")));
                }
            }
        }
        Ok(())
    }

    /// `β_0, …, β_K`. A zero-step flow has nothing to temper, so its single
    /// entry is 1 for every scheme.
    pub fn betas(&self) -> Vec<f64> {
        let k = self.steps;
        match &self.tempering {
            _ if k == 0 => vec![1.0],
            TemperingScheme::None => vec![1.0; k + 1],
            TemperingScheme::Fixed { beta0 } => (0..=k)
                .map(|i| quadratic_beta(*beta0, i, k).expect("validated schedule"))
                .collect(),
            TemperingScheme::Free { alphas } => {
                let mut b = vec![1.0; k + 1];
                for i in (0..k).rev() {
                    b[i] = b[i + 1] * alphas[i] * alphas[i];
                }
                b
            }
        }
    }

    /// `α_1, …, α_K`.
    pub fn alphas(&self) -> Vec<f64> {
        match &self.tempering {
            TemperingScheme::None => vec![1.0; self.steps],
            TemperingScheme::Free { alphas } => alphas.clone(),
            TemperingScheme::Fixed { .. } => {
                let b = self.betas();
                b.windows(2).map(|w| (w[0] / w[1]).sqrt()).collect()
            }
        }
    }

    pub fn beta0(&self) -> f64 {
        self.betas()[0]
    }
}

/// All states of one flow evaluation plus the intermediates the adjoint sweep
/// reuses.
#[derive(Debug, Clone)]
pub struct Trajectory {
    /// `(z_0, ρ_0), …, (z_K, ρ_K)`.
    pub points: Vec<PhasePoint>,
    /// `β_0, …, β_K`.
    pub betas: Vec<f64>,
    /// `α_1, …, α_K`.
    pub alphas: Vec<f64>,
    pub log_jacobian: f64,
    /// `∇_z U(z_k)` for `k = 0..=K`.
    pub grad_potential: Vec<Vec<f64>>,
    /// Momentum after the first half-kick of step `k` (index `k - 1`).
    pub half_momentum: Vec<Vec<f64>>,
    /// Momentum after the second half-kick, before tempering.
    pub pre_temper_momentum: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn last(&self) -> &PhasePoint {
        self.points.last().expect("trajectory holds at least the initial state")
    }

    /// Debug dump with columns `k, beta, z1..zℓ, rho1..rhoℓ, H`.
    pub fn write_csv<M: TargetModel, W: Write>(
        &self,
        target: &M,
        theta: &[f64],
        x: &M::Obs,
        out: W,
    ) -> Result<()> {
        let l = self.points[0].dim();
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["k".to_string(), "beta".to_string()];
        header.extend((1..=l).map(|j| format!("z{j}")));
        header.extend((1..=l).map(|j| format!("rho{j}")));
        header.push("H".into());
        w.write_record(&header)?;
        for (k, p) in self.points.iter().enumerate() {
            let mut rec = vec![k.to_string(), self.betas[k].to_string()];
            rec.extend(p.z.iter().map(f64::to_string));
            rec.extend(p.rho.iter().map(f64::to_string));
            rec.push(hamiltonian(target, theta, x, p).to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn check_finite(v: &[f64], step: usize, what: &str) -> Result<()> {
    if all_finite(v) {
        Ok(())
    } else {
        Err(HviError::Integration { step, message: format!("non-finite {what}") })
    }
}

fn kick(rho: &[f64], eps: &[f64], grad: &[f64]) -> Vec<f64> {
    rho.iter()
        .zip(eps)
        .zip(grad)
        .map(|((r, e), g)| r - 0.5 * e * g)
        .collect()
}

fn drift(z: &[f64], eps: &[f64], rho: &[f64]) -> Vec<f64> {
    z.iter().zip(eps).zip(rho).map(|((z, e), r)| z + e * r).collect()
}

/// One leapfrog step:
/// `ρ̃ = ρ - (ε/2)⊙∇U(z)`, `z' = z + ε⊙ρ̃`, `ρ' = ρ̃ - (ε/2)⊙∇U(z')`.
pub fn leapfrog_step<G>(p: &PhasePoint, eps: &[f64], mut grad_u: G) -> Result<PhasePoint>
where
    G: FnMut(&[f64]) -> Vec<f64>,
{
    check_len("step sizes", eps.len(), p.dim())?;
    let g0 = grad_u(&p.z);
    check_finite(&g0, 1, "potential gradient")?;
    let half = kick(&p.rho, eps, &g0);
    let z = drift(&p.z, eps, &half);
    let g1 = grad_u(&z);
    check_finite(&g1, 1, "potential gradient")?;
    Ok(PhasePoint { rho: kick(&half, eps, &g1), z })
}

/// Runs the `K` leapfrog+tempering steps from `p0`.
pub fn forward_flow<M: TargetModel>(
    config: &FlowConfig,
    target: &M,
    theta: &[f64],
    x: &M::Obs,
    p0: &PhasePoint,
) -> Result<Trajectory> {
    config.validate()?;
    check_len("flow dimension", config.dim(), target.latent_dim())?;
    check_len("initial state", p0.dim(), target.latent_dim())?;
    if !(all_finite(&p0.z) && all_finite(&p0.rho)) {
        return Err(HviError::Integration { step: 0, message: "non-finite initial state".into() });
    }
    let alphas = config.alphas();
    let mut points = Vec::with_capacity(config.steps + 1);
    let mut grads = Vec::with_capacity(config.steps + 1);
    let mut halves = Vec::with_capacity(config.steps);
    let mut pre = Vec::with_capacity(config.steps);
    let mut log_jacobian = 0.0;

    let g0 = target.grad_potential(theta, x, &p0.z);
    check_finite(&g0, 0, "potential gradient")?;
    points.push(p0.clone());
    grads.push(g0);

    for (k, &alpha) in (1..=config.steps).zip(&alphas) {
        let prev = &points[k - 1];
        let half = kick(&prev.rho, &config.eps, &grads[k - 1]);
        let z = drift(&prev.z, &config.eps, &half);
        check_finite(&z, k, "position")?;
        let g = target.grad_potential(theta, x, &z);
        check_finite(&g, k, "potential gradient")?;
        let rho_pre = kick(&half, &config.eps, &g);
        let (rho, lj) = temper_momentum(&rho_pre, alpha);
        check_finite(&rho, k, "momentum")?;
        log_jacobian += lj;
        points.push(PhasePoint { z, rho });
        grads.push(g);
        halves.push(half);
        pre.push(rho_pre);
    }

    Ok(Trajectory {
        points,
        betas: config.betas(),
        alphas,
        log_jacobian,
        grad_potential: grads,
        half_momentum: halves,
        pre_temper_momentum: pre,
    })
}

/// Algebraic inverse of [`forward_flow`]: undo each tempering, then run the
/// leapfrog shears backwards.
pub fn inverse_flow<M: TargetModel>(
    config: &FlowConfig,
    target: &M,
    theta: &[f64],
    x: &M::Obs,
    pk: &PhasePoint,
) -> Result<PhasePoint> {
    config.validate()?;
    check_len("flow dimension", config.dim(), target.latent_dim())?;
    check_len("final state", pk.dim(), target.latent_dim())?;
    let alphas = config.alphas();
    let mut z = pk.z.clone();
    let mut rho = pk.rho.clone();
    let mut g = target.grad_potential(theta, x, &z);
    for k in (1..=config.steps).rev() {
        check_finite(&g, k, "potential gradient")?;
        let alpha = alphas[k - 1];
        rho.iter_mut().for_each(|r| *r /= alpha);
        let half: Vec<f64> = rho
            .iter()
            .zip(&config.eps)
            .zip(&g)
            .map(|((r, e), g)| r + 0.5 * e * g)
            .collect();
        z = z.iter().zip(&config.eps).zip(&half).map(|((z, e), r)| z - e * r).collect();
        g = target.grad_potential(theta, x, &z);
        rho = half
            .iter()
            .zip(&config.eps)
            .zip(&g)
            .map(|((r, e), g)| r + 0.5 * e * g)
            .collect();
        check_finite(&z, k, "position")?;
        check_finite(&rho, k, "momentum")?;
    }
    Ok(PhasePoint { z, rho })
}

/// `H(z, ρ) = U_θ(z | x) + ½ ρᵀρ`.
pub fn hamiltonian<M: TargetModel>(target: &M, theta: &[f64], x: &M::Obs, p: &PhasePoint) -> f64 {
    -target.log_joint(theta, x, &p.z) + 0.5 * dot(&p.rho, &p.rho)
}
