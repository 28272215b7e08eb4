//! Linear-Bernoulli decoder with a per-datapoint latent:
//! `z ~ N(0, I_ℓ)`, `x_j | z ~ Bernoulli(sigmoid(W z + b)_j)`.
//!
//! θ is laid out as `[W (row-major, d × ℓ), b (d)]`.

use super::TargetModel;
use crate::error::{check_len, HviError, Result};
use crate::math::{log_std_normal, sigmoid, softplus};

/// Clamp applied to reported pixel probabilities.
pub const PROB_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct BernoulliDecoderParams {
    pub obs_dim: usize,
    pub latent_dim: usize,
    /// Row-major `obs_dim × latent_dim`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl BernoulliDecoderParams {
    pub fn new(obs_dim: usize, latent_dim: usize, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        check_len("decoder weights", weights.len(), obs_dim * latent_dim)?;
        check_len("decoder bias", bias.len(), obs_dim)?;
        Ok(Self { obs_dim, latent_dim, weights, bias })
    }

    pub fn zeros(obs_dim: usize, latent_dim: usize) -> Self {
        Self {
            obs_dim,
            latent_dim,
            weights: vec![0.0; obs_dim * latent_dim],
            bias: vec![0.0; obs_dim],
        }
    }

    pub fn to_theta(&self) -> Vec<f64> {
        let mut t = self.weights.clone();
        t.extend_from_slice(&self.bias);
        t
    }

    pub fn from_theta(obs_dim: usize, latent_dim: usize, theta: &[f64]) -> Self {
        let nw = obs_dim * latent_dim;
        Self {
            obs_dim,
            latent_dim,
            weights: theta[..nw].to_vec(),
            bias: theta[nw..nw + obs_dim].to_vec(),
        }
    }

    /// `sigmoid(W z + b)`, clamped to `[1e-12, 1 - 1e-12]`.
    pub fn probabilities(&self, z: &[f64]) -> Vec<f64> {
        BernoulliDecoder::new(self.obs_dim, self.latent_dim)
            .logits(&self.to_theta(), z)
            .into_iter()
            .map(|a| sigmoid(a).clamp(PROB_CLAMP, 1.0 - PROB_CLAMP))
            .collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BernoulliDecoder {
    pub obs_dim: usize,
    pub latent_dim: usize,
}

impl BernoulliDecoder {
    pub fn new(obs_dim: usize, latent_dim: usize) -> Self {
        Self { obs_dim, latent_dim }
    }

    fn weights<'a>(&self, theta: &'a [f64]) -> &'a [f64] {
        &theta[..self.obs_dim * self.latent_dim]
    }

    fn bias<'a>(&self, theta: &'a [f64]) -> &'a [f64] {
        &theta[self.obs_dim * self.latent_dim..]
    }

    pub fn logits(&self, theta: &[f64], z: &[f64]) -> Vec<f64> {
        let w = self.weights(theta);
        self.bias(theta)
            .iter()
            .enumerate()
            .map(|(j, b)| b + crate::math::dot(&w[j * self.latent_dim..(j + 1) * self.latent_dim], z))
            .collect()
    }

    fn mat_vec(&self, theta: &[f64], v: &[f64]) -> Vec<f64> {
        let w = self.weights(theta);
        (0..self.obs_dim)
            .map(|j| crate::math::dot(&w[j * self.latent_dim..(j + 1) * self.latent_dim], v))
            .collect()
    }

    /// `Wᵀ u`.
    fn mat_t_vec(&self, theta: &[f64], u: &[f64]) -> Vec<f64> {
        let w = self.weights(theta);
        let l = self.latent_dim;
        let mut out = vec![0.0; l];
        for (j, uj) in u.iter().enumerate() {
            for k in 0..l {
                out[k] += w[j * l + k] * uj;
            }
        }
        out
    }
}

impl TargetModel for BernoulliDecoder {
    type Obs = [f64];

    fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    fn num_params(&self) -> usize {
        self.obs_dim * (self.latent_dim + 1)
    }

    /// `Σ_j [x_j a_j - softplus(a_j)] + log N(z; 0, I)`, the softplus form of
    /// `x log π + (1 - x) log(1 - π)`, finite for any finite logit.
    fn log_joint(&self, theta: &[f64], x: &[f64], z: &[f64]) -> f64 {
        let a = self.logits(theta, z);
        let lik: f64 = a.iter().zip(x).map(|(a, x)| x * a - softplus(*a)).sum();
        lik + log_std_normal(z)
    }

    fn grad_potential(&self, theta: &[f64], x: &[f64], z: &[f64]) -> Vec<f64> {
        let a = self.logits(theta, z);
        let r: Vec<f64> = a.iter().zip(x).map(|(a, x)| x - sigmoid(*a)).collect();
        let wtr = self.mat_t_vec(theta, &r);
        z.iter().zip(wtr).map(|(z, g)| z - g).collect()
    }

    fn grad_theta(&self, theta: &[f64], x: &[f64], z: &[f64]) -> Vec<f64> {
        let l = self.latent_dim;
        let a = self.logits(theta, z);
        let mut g = vec![0.0; self.num_params()];
        let nw = self.obs_dim * l;
        for j in 0..self.obs_dim {
            let r = x[j] - sigmoid(a[j]);
            for k in 0..l {
                g[j * l + k] = r * z[k];
            }
            g[nw + j] = r;
        }
        g
    }

    fn potential_hvp(&self, theta: &[f64], _x: &[f64], z: &[f64], v: &[f64]) -> Vec<f64> {
        let a = self.logits(theta, z);
        let wv = self.mat_vec(theta, v);
        let u: Vec<f64> = a
            .iter()
            .zip(&wv)
            .map(|(a, wv)| {
                let s = sigmoid(*a);
                s * (1.0 - s) * wv
            })
            .collect();
        let wtu = self.mat_t_vec(theta, &u);
        v.iter().zip(wtu).map(|(v, h)| v + h).collect()
    }

    fn potential_mixed_vjp(&self, theta: &[f64], x: &[f64], z: &[f64], v: &[f64]) -> Vec<f64> {
        // vᵀ∇_z U = vᵀz - Σ_j r_j (Wv)_j with r = x - sigmoid(Wz + b)
        let l = self.latent_dim;
        let a = self.logits(theta, z);
        let wv = self.mat_vec(theta, v);
        let nw = self.obs_dim * l;
        let mut g = vec![0.0; self.num_params()];
        for j in 0..self.obs_dim {
            let s = sigmoid(a[j]);
            let curv = s * (1.0 - s) * wv[j];
            let r = x[j] - s;
            for k in 0..l {
                g[j * l + k] = curv * z[k] - r * v[k];
            }
            g[nw + j] = curv;
        }
        g
    }
}

/// Checked evaluation of the decoder log-joint for one binary observation.
pub fn bernoulli_decoder_log_joint(
    params: &BernoulliDecoderParams,
    x: &[f64],
    z: &[f64],
) -> Result<f64> {
    check_len("observation", x.len(), params.obs_dim)?;
    check_len("latent", z.len(), params.latent_dim)?;
    if let Some(v) = x.iter().find(|&&v| v != 0.0 && v != 1.0) {
        return Err(HviError::Domain(format!("observation entry {v} is not binary")));
    }
    let model = BernoulliDecoder::new(params.obs_dim, params.latent_dim);
    Ok(model.log_joint(&params.to_theta(), x, z))
}
