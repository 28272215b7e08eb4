use rand::Rng;

use super::his::run_his;
use super::planar::planar_nf_elbo;
use super::{prior_log_weight, HisNoise, PlanarFlowParams};
use crate::error::{HviError, Result};
use crate::flow::FlowConfig;
use crate::math::log_mean_exp;
use crate::model::{TargetModel, VariationalPrior};
use crate::rng::normal_vec;

/// Importance samples per datapoint used for held-out NLL by default.
pub const DEFAULT_NLL_SAMPLES: usize = 1000;

/// Approximate posterior used as the importance proposal.
#[derive(Clone, Copy)]
pub enum Proposal<'a, O: ?Sized> {
    /// The variational prior itself, `q_φ(z | x)`.
    Prior { prior: &'a dyn VariationalPrior<O>, phi: &'a [f64] },
    /// The prior pushed through the tempered Hamiltonian flow; weights are the
    /// Hamiltonian importance-sampling ratios.
    Hamiltonian { prior: &'a dyn VariationalPrior<O>, phi: &'a [f64], flow: &'a FlowConfig },
    /// The prior pushed through a planar flow.
    Planar { prior: &'a dyn VariationalPrior<O>, phi: &'a [f64], flow: &'a PlanarFlowParams },
}

impl<O: ?Sized> Proposal<'_, O> {
    fn log_weight<M, R>(&self, target: &M, theta: &[f64], x: &O, rng: &mut R) -> Result<f64>
    where
        M: TargetModel<Obs = O>,
        R: Rng + ?Sized,
    {
        match *self {
            Proposal::Prior { prior, phi } => {
                let noise = normal_vec(rng, prior.noise_dim());
                prior_log_weight(target, theta, x, prior, phi, &noise)
            }
            Proposal::Hamiltonian { prior, phi, flow } => {
                let noise = HisNoise::sample(rng, prior.noise_dim(), target.latent_dim());
                Ok(run_his(target, theta, x, flow, prior, phi, &noise)?.his_value())
            }
            Proposal::Planar { prior, phi, flow } => {
                let noise = normal_vec(rng, prior.noise_dim());
                Ok(planar_nf_elbo(target, theta, x, flow, prior, phi, &noise)?.value)
            }
        }
    }
}

/// `-log (1/n) Σ_i w_i` with `n` importance weights drawn from `proposal`.
pub fn importance_sampled_nll<M, R>(
    target: &M,
    theta: &[f64],
    x: &M::Obs,
    proposal: &Proposal<'_, M::Obs>,
    n: usize,
    rng: &mut R,
) -> Result<f64>
where
    M: TargetModel,
    R: Rng + ?Sized,
{
    if n == 0 {
        return Err(HviError::Config("NLL estimate needs at least one importance sample".into()));
    }
    let lw = (0..n)
        .map(|_| proposal.log_weight(target, theta, x, rng))
        .collect::<Result<Vec<_>>>()?;
    Ok(-log_mean_exp(&lw))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::vanilla_elbo;
    use crate::flow::TemperingScheme;
    use crate::model::{
        gaussian_exact_log_marginal, gaussian_exact_posterior, make_true_params, Dataset,
        GaussianModel, MeanFieldGaussian, StandardNormalPrior,
    };
    use crate::rng::stream;

    fn instance() -> (GaussianModel, crate::model::GaussianModelParams, Dataset) {
        let data = Dataset::from_rows(&[vec![0.3, -0.2, 0.0], vec![0.1, 0.4, 1.1]]).unwrap();
        (GaussianModel::new(3), make_true_params(3), data)
    }

    #[test]
    fn exact_posterior_proposal_is_flat() {
        let (m, p, data) = instance();
        let (mean, var) = gaussian_exact_posterior(&p, &data).unwrap();
        let phi = crate::model::MeanFieldParams::new(mean, var).unwrap().to_phi();
        let prior = MeanFieldGaussian::new(3);
        let prop = Proposal::Prior { prior: &prior, phi: &phi };
        let nll = importance_sampled_nll(&m, &p.to_theta(), &data, &prop, 50, &mut stream(1, &[])).unwrap();
        let exact = gaussian_exact_log_marginal(&p, &data).unwrap();
        assert!((nll + exact).abs() < 1e-8);
    }

    #[test]
    fn single_sample_is_negative_vanilla_draw() {
        let (m, p, data) = instance();
        let mf = crate::model::MeanFieldParams::new(vec![0.1, 0.0, -0.2], vec![0.5, 0.2, 0.9]).unwrap();
        let phi = mf.to_phi();
        let prior = MeanFieldGaussian::new(3);
        let prop = Proposal::Prior { prior: &prior, phi: &phi };
        let nll = importance_sampled_nll(&m, &p.to_theta(), &data, &prop, 1, &mut stream(3, &[7])).unwrap();
        let noise = normal_vec(&mut stream(3, &[7]), 3);
        let v = vanilla_elbo(&m, &p.to_theta(), &data, &mf, &noise).unwrap();
        assert!((nll + v.value).abs() < 1e-12);
    }

    #[test]
    fn flow_proposals_run() {
        let (m, p, data) = instance();
        let prior = StandardNormalPrior::new(3);
        let flow = FlowConfig::new(3, vec![0.1; 3], TemperingScheme::Fixed { beta0: 0.5 }, 0.5).unwrap();
        let nf = PlanarFlowParams::new(vec![0.1, 0.2, 0.0], vec![0.3, -0.1, 0.5], 0.1, 3).unwrap();
        let exact = gaussian_exact_log_marginal(&p, &data).unwrap();
        for prop in [
            Proposal::Hamiltonian { prior: &prior, phi: &[], flow: &flow },
            Proposal::Planar { prior: &prior, phi: &[], flow: &nf },
        ] {
            let nll = importance_sampled_nll(&m, &p.to_theta(), &data, &prop, 4000, &mut stream(4, &[])).unwrap();
            assert!((nll + exact).abs() < 0.2, "{nll} vs {}", -exact);
        }
    }
}
