use super::ElboEstimate;
use crate::error::{check_len, HviError, Result};
use crate::math::log_mean_exp;
use crate::model::{MeanFieldGaussian, MeanFieldParams, TargetModel, VariationalPrior};

/// `log p_θ(x, z) - log q_φ(z | x)` at `z = Ψ_φ(x, noise)`.
pub fn prior_log_weight<M, P>(
    target: &M,
    theta: &[f64],
    x: &M::Obs,
    prior: &P,
    phi: &[f64],
    noise: &[f64],
) -> Result<f64>
where
    M: TargetModel,
    P: VariationalPrior<M::Obs> + ?Sized,
{
    check_len("prior latent dimension", prior.latent_dim(), target.latent_dim())?;
    check_len("prior parameters", phi.len(), prior.num_params())?;
    check_len("prior noise", noise.len(), prior.noise_dim())?;
    let z = prior.reparam_sample(phi, x, noise);
    Ok(target.log_joint(theta, x, &z) - prior.log_density(phi, x, &z))
}

/// Standard reparameterised ELBO draw with a mean-field Gaussian posterior,
/// `z = μ_Z + Σ_Z^{1/2} noise`.
pub fn vanilla_elbo<M: TargetModel>(
    target: &M,
    theta: &[f64],
    x: &M::Obs,
    mf: &MeanFieldParams,
    noise: &[f64],
) -> Result<ElboEstimate> {
    let prior = MeanFieldGaussian::new(mf.mean.len());
    let phi = mf.to_phi();
    let value = prior_log_weight(target, theta, x, &prior, &phi, noise)?;
    let z = VariationalPrior::<M::Obs>::reparam_sample(&prior, &phi, x, noise);
    Ok(ElboEstimate {
        value,
        final_hamiltonian: -target.log_joint(theta, x, &z),
        log_jacobian: 0.0,
        z_final: z,
    })
}

/// `log (1/L) Σ_i p_θ(x, z_i) / q_φ(z_i | x)` over the `L = noises.len()`
/// draws.
pub fn iwae_bound<M, P>(
    target: &M,
    theta: &[f64],
    x: &M::Obs,
    prior: &P,
    phi: &[f64],
    noises: &[Vec<f64>],
) -> Result<f64>
where
    M: TargetModel,
    P: VariationalPrior<M::Obs> + ?Sized,
{
    if noises.is_empty() {
        return Err(HviError::Config("IWAE needs at least one sample".into()));
    }
    let lw = noises
        .iter()
        .map(|n| prior_log_weight(target, theta, x, prior, phi, n))
        .collect::<Result<Vec<_>>>()?;
    Ok(log_mean_exp(&lw))
}
