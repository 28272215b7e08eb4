//! Annealed importance sampling along the geometric path
//! `f_b(z) ∝ q⁰(z)^{1-β_b} p_θ(x, z)^{β_b}`, `β_b = b/B`, with one
//! Metropolis-corrected HMC transition per intermediate density.

use rand::Rng;

use crate::error::{check_len, HviError, Result};
use crate::math::dot;
use crate::model::{TargetModel, VariationalPrior};
use crate::rng::normal_vec;

#[derive(Debug, Clone, PartialEq)]
pub struct AisConfig {
    /// Number of annealing increments `B`; 0 gives a plain importance weight.
    pub bridges: usize,
    pub step_size: f64,
    /// Leapfrog steps inside each HMC proposal.
    pub leapfrog_steps: usize,
}

impl Default for AisConfig {
    fn default() -> Self {
        Self { bridges: 50, step_size: 0.1, leapfrog_steps: 1 }
    }
}

impl AisConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(HviError::Config(format!("AIS step size must be positive, got {}", self.step_size)));
        }
        if self.leapfrog_steps == 0 {
            return Err(HviError::Config("AIS needs at least one leapfrog step per transition".into()));
        }
        Ok(())
    }
}

struct Bridge<'a, M: TargetModel, P: ?Sized> {
    target: &'a M,
    theta: &'a [f64],
    x: &'a M::Obs,
    prior: &'a P,
    phi: &'a [f64],
}

impl<M, P> Bridge<'_, M, P>
where
    M: TargetModel,
    P: VariationalPrior<M::Obs> + ?Sized,
{
    fn log_densities(&self, z: &[f64]) -> (f64, f64) {
        (self.prior.log_density(self.phi, self.x, z), self.target.log_joint(self.theta, self.x, z))
    }

    fn log_f(&self, beta: f64, z: &[f64]) -> f64 {
        let (lq, lp) = self.log_densities(z);
        (1.0 - beta) * lq + beta * lp
    }

    fn grad_u(&self, beta: f64, z: &[f64]) -> Vec<f64> {
        let gq = self.prior.grad_log_density_z(self.phi, self.x, z);
        let gu = self.target.grad_potential(self.theta, self.x, z);
        gq.iter().zip(&gu).map(|(q, u)| -(1.0 - beta) * q + beta * u).collect()
    }

    fn hmc<R: Rng + ?Sized>(&self, beta: f64, z: Vec<f64>, cfg: &AisConfig, rng: &mut R) -> Vec<f64> {
        let h = cfg.step_size;
        let rho0 = normal_vec(rng, z.len());
        let mut zp = z.clone();
        let mut rho = rho0.clone();
        let mut g = self.grad_u(beta, &zp);
        for _ in 0..cfg.leapfrog_steps {
            rho.iter_mut().zip(&g).for_each(|(r, g)| *r -= 0.5 * h * g);
            zp.iter_mut().zip(&rho).for_each(|(z, r)| *z += h * r);
            g = self.grad_u(beta, &zp);
            rho.iter_mut().zip(&g).for_each(|(r, g)| *r -= 0.5 * h * g);
        }
        let log_accept = self.log_f(beta, &zp) - 0.5 * dot(&rho, &rho) - self.log_f(beta, &z)
            + 0.5 * dot(&rho0, &rho0);
        let u: f64 = rng.random();
        if log_accept.is_finite() && u.ln() < log_accept {
            zp
        } else {
            z
        }
    }
}

/// One AIS log-weight; `exp` of it is an unbiased estimate of `p_θ(x)`.
/// Not differentiable, so it serves only as a reference value.
pub fn ais_log_likelihood<M, P, R>(
    target: &M,
    theta: &[f64],
    x: &M::Obs,
    prior: &P,
    phi: &[f64],
    config: &AisConfig,
    rng: &mut R,
) -> Result<f64>
where
    M: TargetModel,
    P: VariationalPrior<M::Obs> + ?Sized,
    R: Rng + ?Sized,
{
    config.validate()?;
    check_len("prior latent dimension", prior.latent_dim(), target.latent_dim())?;
    check_len("prior parameters", phi.len(), prior.num_params())?;
    let bridge = Bridge { target, theta, x, prior, phi };
    let noise = normal_vec(rng, prior.noise_dim());
    let mut z = prior.reparam_sample(phi, x, &noise);
    let steps = config.bridges.max(1);
    let mut log_w = 0.0;
    for b in 1..=steps {
        let (lq, lp) = bridge.log_densities(&z);
        log_w += (lp - lq) / steps as f64;
        if b < steps {
            z = bridge.hmc(b as f64 / steps as f64, z, config, rng);
        }
    }
    if !log_w.is_finite() {
        return Err(HviError::Domain("AIS produced a non-finite log-weight".into()));
    }
    Ok(log_w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::prior_log_weight;
    use crate::math::log_mean_exp;
    use crate::model::{
        gaussian_exact_log_marginal, make_true_params, Dataset, GaussianModel, StandardNormalPrior,
    };
    use crate::rng::stream;

    #[test]
    fn zero_bridges_is_a_prior_importance_weight() {
        let m = GaussianModel::new(2);
        let theta = make_true_params(2).to_theta();
        let data = Dataset::from_rows(&[vec![0.3, -0.2], vec![0.1, 0.4]]).unwrap();
        let prior = StandardNormalPrior::new(2);
        let cfg = AisConfig { bridges: 0, ..AisConfig::default() };
        let a = ais_log_likelihood(&m, &theta, &data, &prior, &[], &cfg, &mut stream(5, &[1])).unwrap();
        let noise = normal_vec(&mut stream(5, &[1]), 2);
        let b = prior_log_weight(&m, &theta, &data, &prior, &[], &noise).unwrap();
        assert!((a - b).abs() < 1e-14);
    }

    #[test]
    fn close_to_exact_marginal() {
        let p = make_true_params(2);
        let m = GaussianModel::new(2);
        let data = Dataset::from_rows(&[vec![0.3, -0.2], vec![0.1, 0.4], vec![-0.5, 0.9]]).unwrap();
        let prior = StandardNormalPrior::new(2);
        let cfg = AisConfig::default();
        let lw: Vec<f64> = (0..2000)
            .map(|i| {
                ais_log_likelihood(&m, &p.to_theta(), &data, &prior, &[], &cfg, &mut stream(9, &[i])).unwrap()
            })
            .collect();
        let exact = gaussian_exact_log_marginal(&p, &data).unwrap();
        assert!((log_mean_exp(&lw) - exact).abs() < 0.05);
    }
}
