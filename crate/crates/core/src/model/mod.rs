//! Generative models and variational priors.
//!
//! A [`TargetModel`] exposes `log p_θ(x, z)` and the derivatives the flow and
//! its adjoint need. Parameters are passed as flat slices in the model's own
//! unconstrained layout, so optimizers can treat every model the same way.

mod bernoulli;
mod dataset;
mod gaussian;
mod prior;

pub use bernoulli::{bernoulli_decoder_log_joint, BernoulliDecoder, BernoulliDecoderParams};
pub use dataset::{Dataset, DATASET_MAGIC};
pub use gaussian::{
    gaussian_exact_log_marginal, gaussian_exact_posterior, gaussian_grad_u, gaussian_log_joint,
    gaussian_ml_params, gaussian_mean_field_elbo, make_true_params, GaussianModel,
    GaussianModelParams,
};
pub use prior::{AmortizedGaussianPrior, MeanFieldGaussian, MeanFieldParams, StandardNormalPrior};

/// Unnormalised log-joint of a latent-variable model together with its
/// derivatives. The potential energy is `U(z) = -log p_θ(x, z)`.
pub trait TargetModel: Sync {
    /// Observation type: a whole dataset for global-latent models, a single
    /// row for per-datapoint latents.
    type Obs: ?Sized + Sync;

    fn latent_dim(&self) -> usize;

    /// Length of the flat parameter vector θ.
    fn num_params(&self) -> usize;

    fn log_joint(&self, theta: &[f64], x: &Self::Obs, z: &[f64]) -> f64;

    /// `∇_z U = -∇_z log p_θ(x, z)`.
    fn grad_potential(&self, theta: &[f64], x: &Self::Obs, z: &[f64]) -> Vec<f64>;

    /// `∇_z log p_θ(x, z)`.
    fn grad_z(&self, theta: &[f64], x: &Self::Obs, z: &[f64]) -> Vec<f64> {
        let mut g = self.grad_potential(theta, x, z);
        g.iter_mut().for_each(|v| *v = -*v);
        g
    }

    /// `∇_θ log p_θ(x, z)`.
    fn grad_theta(&self, theta: &[f64], x: &Self::Obs, z: &[f64]) -> Vec<f64>;

    /// Hessian-vector product `(∇²_z U) v`.
    fn potential_hvp(&self, theta: &[f64], x: &Self::Obs, z: &[f64], v: &[f64]) -> Vec<f64>;

    /// `∇_θ (vᵀ ∇_z U)`, the θ-sensitivity of the potential gradient contracted
    /// with `v`.
    fn potential_mixed_vjp(&self, theta: &[f64], x: &Self::Obs, z: &[f64], v: &[f64]) -> Vec<f64>;
}

/// Reparameterisable initial distribution `q⁰_φ(z₀ | x)`.
pub trait VariationalPrior<O: ?Sized>: Sync {
    fn latent_dim(&self) -> usize;

    fn noise_dim(&self) -> usize {
        self.latent_dim()
    }

    fn num_params(&self) -> usize;

    /// `z₀ = Ψ_φ(x, noise)`.
    fn reparam_sample(&self, phi: &[f64], x: &O, noise: &[f64]) -> Vec<f64>;

    fn log_density(&self, phi: &[f64], x: &O, z: &[f64]) -> f64;

    fn grad_log_density_z(&self, phi: &[f64], x: &O, z: &[f64]) -> Vec<f64>;

    /// `∇_φ log q_φ(z | x)` at fixed `z`.
    fn grad_log_density_phi(&self, phi: &[f64], x: &O, z: &[f64]) -> Vec<f64>;

    /// `upstreamᵀ ∂Ψ_φ(x, noise)/∂φ`.
    fn sample_vjp(&self, phi: &[f64], x: &O, noise: &[f64], upstream: &[f64]) -> Vec<f64>;

    /// Noise-level sensitivity `upstreamᵀ ∂Ψ_φ(x, noise)/∂noise`.
    fn sample_noise_vjp(&self, phi: &[f64], x: &O, noise: &[f64], upstream: &[f64]) -> Vec<f64>;
}
