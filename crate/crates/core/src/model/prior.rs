//! Variational priors `q⁰_φ(z₀ | x)`.

use super::VariationalPrior;
use crate::error::{check_len, HviError, Result};
use crate::math::{log_normal, log_std_normal, sigmoid, softplus};

/// Fixed `N(0, I)`; no parameters.
#[derive(Debug, Clone, Copy)]
pub struct StandardNormalPrior {
    pub dim: usize,
}

impl StandardNormalPrior {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }
}

impl<O: ?Sized> VariationalPrior<O> for StandardNormalPrior {
    fn latent_dim(&self) -> usize {
        self.dim
    }

    fn num_params(&self) -> usize {
        0
    }

    fn reparam_sample(&self, _phi: &[f64], _x: &O, noise: &[f64]) -> Vec<f64> {
        noise.to_vec()
    }

    fn log_density(&self, _phi: &[f64], _x: &O, z: &[f64]) -> f64 {
        log_std_normal(z)
    }

    fn grad_log_density_z(&self, _phi: &[f64], _x: &O, z: &[f64]) -> Vec<f64> {
        z.iter().map(|v| -v).collect()
    }

    fn grad_log_density_phi(&self, _phi: &[f64], _x: &O, _z: &[f64]) -> Vec<f64> {
        Vec::new()
    }

    fn sample_vjp(&self, _phi: &[f64], _x: &O, _noise: &[f64], _upstream: &[f64]) -> Vec<f64> {
        Vec::new()
    }

    fn sample_noise_vjp(&self, _phi: &[f64], _x: &O, _noise: &[f64], upstream: &[f64]) -> Vec<f64> {
        upstream.to_vec()
    }
}

/// Mean-field Gaussian `N(μ_Z, diag Σ_Z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanFieldParams {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl MeanFieldParams {
    pub fn new(mean: Vec<f64>, var: Vec<f64>) -> Result<Self> {
        check_len("mean-field variances", var.len(), mean.len())?;
        if let Some(v) = var.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(HviError::Domain(format!("mean-field variance must be positive, got {v}")));
        }
        Ok(Self { mean, var })
    }

    pub fn standard(dim: usize) -> Self {
        Self { mean: vec![0.0; dim], var: vec![1.0; dim] }
    }

    /// `[μ, log var]`.
    pub fn to_phi(&self) -> Vec<f64> {
        self.mean.iter().copied().chain(self.var.iter().map(|v| v.ln())).collect()
    }

    pub fn from_phi(phi: &[f64]) -> Self {
        let d = phi.len() / 2;
        Self {
            mean: phi[..d].to_vec(),
            var: phi[d..].iter().map(|v| v.exp()).collect(),
        }
    }
}

/// Mean-field Gaussian prior with φ laid out as `[μ, log var]`.
#[derive(Debug, Clone, Copy)]
pub struct MeanFieldGaussian {
    pub dim: usize,
}

impl MeanFieldGaussian {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }
}

impl<O: ?Sized> VariationalPrior<O> for MeanFieldGaussian {
    fn latent_dim(&self) -> usize {
        self.dim
    }

    fn num_params(&self) -> usize {
        2 * self.dim
    }

    fn reparam_sample(&self, phi: &[f64], _x: &O, noise: &[f64]) -> Vec<f64> {
        let d = self.dim;
        (0..d).map(|j| phi[j] + (0.5 * phi[d + j]).exp() * noise[j]).collect()
    }

    fn log_density(&self, phi: &[f64], _x: &O, z: &[f64]) -> f64 {
        let d = self.dim;
        (0..d).map(|j| log_normal(z[j], phi[j], phi[d + j].exp())).sum()
    }

    fn grad_log_density_z(&self, phi: &[f64], _x: &O, z: &[f64]) -> Vec<f64> {
        let d = self.dim;
        (0..d).map(|j| -(z[j] - phi[j]) * (-phi[d + j]).exp()).collect()
    }

    fn grad_log_density_phi(&self, phi: &[f64], _x: &O, z: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let mut g = vec![0.0; 2 * d];
        for j in 0..d {
            let prec = (-phi[d + j]).exp();
            let r = z[j] - phi[j];
            g[j] = r * prec;
            g[d + j] = -0.5 + 0.5 * r * r * prec;
        }
        g
    }

    fn sample_vjp(&self, phi: &[f64], _x: &O, noise: &[f64], upstream: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let mut g = vec![0.0; 2 * d];
        for j in 0..d {
            g[j] = upstream[j];
            g[d + j] = upstream[j] * noise[j] * 0.5 * (0.5 * phi[d + j]).exp();
        }
        g
    }

    fn sample_noise_vjp(&self, phi: &[f64], _x: &O, _noise: &[f64], upstream: &[f64]) -> Vec<f64> {
        let d = self.dim;
        (0..d).map(|j| upstream[j] * (0.5 * phi[d + j]).exp()).collect()
    }
}

/// Single affine encoder layer producing `μ_φ(x)` and `diag Σ_φ(x)`, with the
/// variances passed through softplus.
///
/// φ layout: `[A_μ (ℓ×d), c_μ (ℓ), A_v (ℓ×d), c_v (ℓ)]`, row-major.
#[derive(Debug, Clone, Copy)]
pub struct AmortizedGaussianPrior {
    pub obs_dim: usize,
    pub latent_dim: usize,
}

impl AmortizedGaussianPrior {
    pub fn new(obs_dim: usize, latent_dim: usize) -> Self {
        Self { obs_dim, latent_dim }
    }

    fn block(&self) -> usize {
        self.latent_dim * (self.obs_dim + 1)
    }

    fn affine(&self, p: &[f64], x: &[f64]) -> Vec<f64> {
        let (d, l) = (self.obs_dim, self.latent_dim);
        (0..l)
            .map(|k| p[l * d + k] + crate::math::dot(&p[k * d..(k + 1) * d], x))
            .collect()
    }

    /// Encoder means and pre-activation of the variances.
    pub fn encode(&self, phi: &[f64], x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let b = self.block();
        (self.affine(&phi[..b], x), self.affine(&phi[b..2 * b], x))
    }

    /// `(μ_φ(x), diag Σ_φ(x))`; every variance is strictly positive.
    pub fn moments(&self, phi: &[f64], x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (mu, h) = self.encode(phi, x);
        (mu, h.into_iter().map(softplus).collect())
    }

    /// Scatters per-latent sensitivities of μ and of the variance
    /// pre-activation back onto φ.
    fn pull_back(&self, x: &[f64], g_mu: &[f64], g_h: &[f64]) -> Vec<f64> {
        let (d, l) = (self.obs_dim, self.latent_dim);
        let b = self.block();
        let mut g = vec![0.0; 2 * b];
        for (off, gk) in [(0, g_mu), (b, g_h)] {
            for k in 0..l {
                for j in 0..d {
                    g[off + k * d + j] = gk[k] * x[j];
                }
                g[off + l * d + k] = gk[k];
            }
        }
        g
    }
}

impl VariationalPrior<[f64]> for AmortizedGaussianPrior {
    fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    fn num_params(&self) -> usize {
        2 * self.block()
    }

    fn reparam_sample(&self, phi: &[f64], x: &[f64], noise: &[f64]) -> Vec<f64> {
        let (mu, var) = self.moments(phi, x);
        (0..self.latent_dim).map(|k| mu[k] + var[k].sqrt() * noise[k]).collect()
    }

    fn log_density(&self, phi: &[f64], x: &[f64], z: &[f64]) -> f64 {
        let (mu, var) = self.moments(phi, x);
        (0..self.latent_dim).map(|k| log_normal(z[k], mu[k], var[k])).sum()
    }

    fn grad_log_density_z(&self, phi: &[f64], x: &[f64], z: &[f64]) -> Vec<f64> {
        let (mu, var) = self.moments(phi, x);
        (0..self.latent_dim).map(|k| -(z[k] - mu[k]) / var[k]).collect()
    }

    fn grad_log_density_phi(&self, phi: &[f64], x: &[f64], z: &[f64]) -> Vec<f64> {
        let (mu, h) = self.encode(phi, x);
        let l = self.latent_dim;
        let mut g_mu = vec![0.0; l];
        let mut g_h = vec![0.0; l];
        for k in 0..l {
            let var = softplus(h[k]);
            let r = z[k] - mu[k];
            g_mu[k] = r / var;
            g_h[k] = (-0.5 / var + 0.5 * r * r / (var * var)) * sigmoid(h[k]);
        }
        self.pull_back(x, &g_mu, &g_h)
    }

    fn sample_vjp(&self, phi: &[f64], x: &[f64], noise: &[f64], upstream: &[f64]) -> Vec<f64> {
        let (_, h) = self.encode(phi, x);
        let g_h: Vec<f64> = (0..self.latent_dim)
            .map(|k| upstream[k] * noise[k] * sigmoid(h[k]) / (2.0 * softplus(h[k]).sqrt()))
            .collect();
        self.pull_back(x, upstream, &g_h)
    }

    fn sample_noise_vjp(&self, phi: &[f64], x: &[f64], _noise: &[f64], upstream: &[f64]) -> Vec<f64> {
        let (_, var) = self.moments(phi, x);
        upstream.iter().zip(var).map(|(u, v)| u * v.sqrt()).collect()
    }
}
