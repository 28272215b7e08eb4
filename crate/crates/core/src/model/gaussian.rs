//! Conjugate Gaussian model with a single global latent:
//! `z ~ N(0, I)`, `x_i | z ~ N(z + Δ, diag σ²)`.
//!
//! θ is laid out as `[Δ_1..Δ_d, log σ²_1..log σ²_d]`. Every per-z quantity
//! uses the cached dataset mean and centred sum of squares, so it costs O(d)
//! regardless of N.

use super::{Dataset, MeanFieldParams, TargetModel};
use crate::error::{check_len, HviError, Result};
use crate::math::{log_std_normal, LN_2PI};

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianModelParams {
    pub delta: Vec<f64>,
    pub sigma_sq: Vec<f64>,
}

impl GaussianModelParams {
    pub fn new(delta: Vec<f64>, sigma_sq: Vec<f64>) -> Result<Self> {
        let p = Self { delta, sigma_sq };
        p.validate()?;
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.delta.len()
    }

    pub fn validate(&self) -> Result<()> {
        check_len("sigma_sq", self.sigma_sq.len(), self.delta.len())?;
        if let Some(v) = self.sigma_sq.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(HviError::Domain(format!("variance must be positive, got {v}")));
        }
        Ok(())
    }

    /// Flat unconstrained layout `[Δ, log σ²]`.
    pub fn to_theta(&self) -> Vec<f64> {
        self.delta
            .iter()
            .copied()
            .chain(self.sigma_sq.iter().map(|v| v.ln()))
            .collect()
    }

    pub fn from_theta(theta: &[f64]) -> Self {
        let d = theta.len() / 2;
        Self {
            delta: theta[..d].to_vec(),
            sigma_sq: theta[d..].iter().map(|v| v.exp()).collect(),
        }
    }

    /// `‖Δ̂ - Δ‖²` and `‖σ̂² - σ²‖²`.
    pub fn block_sq_errors(&self, truth: &Self) -> (f64, f64) {
        let sq = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
        (sq(&self.delta, &truth.delta), sq(&self.sigma_sq, &truth.sigma_sq))
    }
}

/// Ground-truth parameters for dimension `d`: offsets evenly spaced on
/// `[-(d-1)/10, (d-1)/10]`, standard deviations on a parabola equal to 1 at
/// both ends with minimum 0.1 at position `(d+1)/2`.
pub fn make_true_params(d: usize) -> GaussianModelParams {
    let centre = (d as f64 + 1.0) / 2.0;
    let delta = (1..=d)
        .map(|j| (2.0 * j as f64 - 1.0 - d as f64) / 10.0)
        .collect();
    let sigma_sq = (1..=d)
        .map(|j| {
            // a single dimension has no interior; both endpoint conditions give 1
            let sd = if d == 1 {
                1.0
            } else {
                let t = (j as f64 - centre) / (centre - 1.0);
                0.1 + 0.9 * t * t
            };
            sd * sd
        })
        .collect();
    GaussianModelParams { delta, sigma_sq }
}

#[derive(Debug, Clone, Copy)]
pub struct GaussianModel {
    pub dim: usize,
}

impl GaussianModel {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }

    /// Residual `x̄ - z - Δ`.
    fn residual(theta: &[f64], x: &Dataset, z: &[f64], j: usize) -> f64 {
        x.mean()[j] - z[j] - theta[j]
    }
}

impl TargetModel for GaussianModel {
    type Obs = Dataset;

    fn latent_dim(&self) -> usize {
        self.dim
    }

    fn num_params(&self) -> usize {
        2 * self.dim
    }

    fn log_joint(&self, theta: &[f64], x: &Dataset, z: &[f64]) -> f64 {
        let d = self.dim;
        let n = x.len() as f64;
        let mut lp = log_std_normal(z);
        for j in 0..d {
            let log_var = theta[d + j];
            let r = Self::residual(theta, x, z, j);
            lp -= 0.5 * n * (LN_2PI + log_var)
                + 0.5 * (x.centered_ss()[j] + n * r * r) * (-log_var).exp();
        }
        lp
    }

    fn grad_potential(&self, theta: &[f64], x: &Dataset, z: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let n = x.len() as f64;
        (0..d)
            .map(|j| z[j] - n * Self::residual(theta, x, z, j) * (-theta[d + j]).exp())
            .collect()
    }

    fn grad_theta(&self, theta: &[f64], x: &Dataset, z: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let n = x.len() as f64;
        let mut g = vec![0.0; 2 * d];
        for j in 0..d {
            let prec = (-theta[d + j]).exp();
            let r = Self::residual(theta, x, z, j);
            g[j] = n * r * prec;
            g[d + j] = -0.5 * n + 0.5 * (x.centered_ss()[j] + n * r * r) * prec;
        }
        g
    }

    fn potential_hvp(&self, theta: &[f64], x: &Dataset, _z: &[f64], v: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let n = x.len() as f64;
        (0..d)
            .map(|j| (1.0 + n * (-theta[d + j]).exp()) * v[j])
            .collect()
    }

    fn potential_mixed_vjp(&self, theta: &[f64], x: &Dataset, z: &[f64], v: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let n = x.len() as f64;
        let mut g = vec![0.0; 2 * d];
        for j in 0..d {
            let np = n * (-theta[d + j]).exp();
            g[j] = v[j] * np;
            g[d + j] = v[j] * np * Self::residual(theta, x, z, j);
        }
        g
    }
}

fn check_inputs(params: &GaussianModelParams, data: &Dataset) -> Result<()> {
    params.validate()?;
    check_len("dataset dimension", data.dim(), params.dim())
}

/// `Σ_i log N(x_i; z + Δ, Σ) + log N(z; 0, I)`.
pub fn gaussian_log_joint(params: &GaussianModelParams, data: &Dataset, z: &[f64]) -> Result<f64> {
    check_inputs(params, data)?;
    check_len("latent", z.len(), params.dim())?;
    Ok(GaussianModel::new(params.dim()).log_joint(&params.to_theta(), data, z))
}

/// `∇_z U = z + N Σ⁻¹ (z + Δ - x̄)`.
pub fn gaussian_grad_u(params: &GaussianModelParams, data: &Dataset, z: &[f64]) -> Result<Vec<f64>> {
    check_inputs(params, data)?;
    check_len("latent", z.len(), params.dim())?;
    Ok(GaussianModel::new(params.dim()).grad_potential(&params.to_theta(), data, z))
}

/// Closed-form `log p_θ(D)`. Per dimension the data vector is jointly normal
/// with covariance `σ² I + 1 1ᵀ`; the Sherman-Morrison form below only needs
/// the cached mean and centred sum of squares.
pub fn gaussian_exact_log_marginal(params: &GaussianModelParams, data: &Dataset) -> Result<f64> {
    check_inputs(params, data)?;
    let n = data.len() as f64;
    let mut lp = 0.0;
    for j in 0..params.dim() {
        let v = params.sigma_sq[j];
        let m = data.mean()[j] - params.delta[j];
        lp += -0.5 * n * (LN_2PI + v.ln())
            - 0.5 * (n / v).ln_1p()
            - 0.5 * data.centered_ss()[j] / v
            - 0.5 * n * m * m / (v + n);
    }
    Ok(lp)
}

/// Exact posterior `N(μ*, diag Σ*)` of `z | D`.
pub fn gaussian_exact_posterior(
    params: &GaussianModelParams,
    data: &Dataset,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_inputs(params, data)?;
    let n = data.len() as f64;
    let mut mean = Vec::with_capacity(params.dim());
    let mut var = Vec::with_capacity(params.dim());
    for j in 0..params.dim() {
        let lik_prec = n / params.sigma_sq[j];
        let v = 1.0 / (1.0 + lik_prec);
        var.push(v);
        mean.push(v * lik_prec * (data.mean()[j] - params.delta[j]));
    }
    Ok((mean, var))
}

/// Maximiser of [`gaussian_exact_log_marginal`] over θ: `Δ̂ = x̄` and `σ̂²` the
/// positive root of `v² + (N - 1 - S) v - S N = 0` with `S` the biased sample
/// variance. Degenerate (zero variance) when N = 1.
pub fn gaussian_ml_params(data: &Dataset) -> GaussianModelParams {
    let n = data.len() as f64;
    let sigma_sq = data
        .centered_ss()
        .iter()
        .map(|css| {
            let s = css / n;
            let b = n - 1.0 - s;
            2.0 * s * n / (b + (b * b + 4.0 * s * n).sqrt())
        })
        .collect();
    GaussianModelParams { delta: data.mean().to_vec(), sigma_sq }
}

/// Closed-form expected ELBO `E_q[log p_θ(D, z) - log q(z)]` for a
/// mean-field Gaussian `q`.
pub fn gaussian_mean_field_elbo(
    params: &GaussianModelParams,
    data: &Dataset,
    q: &MeanFieldParams,
) -> Result<f64> {
    check_inputs(params, data)?;
    check_len("mean-field dimension", q.mean.len(), params.dim())?;
    let n = data.len() as f64;
    let mut elbo = 0.0;
    for j in 0..params.dim() {
        let (mu, s2, v) = (q.mean[j], q.var[j], params.sigma_sq[j]);
        let r = data.mean()[j] - mu - params.delta[j];
        elbo += -0.5 * n * (LN_2PI + v.ln()) - 0.5 * (data.centered_ss()[j] + n * (r * r + s2)) / v;
        elbo += -0.5 * (LN_2PI + mu * mu + s2);
        elbo += 0.5 * (LN_2PI + 1.0 + s2.ln());
    }
    Ok(elbo)
}
