//! Concrete training objectives: the Gaussian study (HVAE, mean-field VB and
//! planar NF on one global latent) and a Bernoulli-decoder VAE with an
//! amortised encoder.

use super::Objective;
use crate::adjoint::{
    backprop_his, backprop_planar, backprop_vanilla, planar_raw_len, TemperingKind,
    UnconstrainedParams,
};
use crate::error::{HviError, Result};
use crate::estimators::HisNoise;
use crate::flow::{FlowConfig, TemperingScheme};
use crate::math::{logit, softplus_inv};
use crate::model::{
    AmortizedGaussianPrior, BernoulliDecoder, Dataset, GaussianModel, GaussianModelParams,
    MeanFieldGaussian, StandardNormalPrior, TargetModel, VariationalPrior,
};
use crate::rng::{normal_vec, stream, StreamRng};

/// Starting point for θ = `[Δ, log σ²]` in the Gaussian study.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GaussianInit {
    /// `Δ = 0`, `σ² = 1`.
    Standard,
    /// `Δ = x̄`, `σ²` = per-coordinate sample variance minus the unit prior
    /// variance contribution, floored at 0.01.
    Moments,
}

impl std::str::FromStr for GaussianInit {
    type Err = HviError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(GaussianInit::Standard),
            "moments" => Ok(GaussianInit::Moments),
            other => Err(HviError::Config(format!("unknown initialisation '{other}'"))),
        }
    }
}

fn initial_theta(data: &Dataset, init: GaussianInit) -> Vec<f64> {
    let d = data.dim();
    match init {
        GaussianInit::Standard => vec![0.0; 2 * d],
        GaussianInit::Moments => {
            let n = data.len().max(2) as f64;
            let mut t = data.mean().to_vec();
            t.extend(data.centered_ss().iter().map(|ss| (ss / (n - 1.0)).max(0.01).ln()));
            t
        }
    }
}

fn concat(parts: &[&[f64]]) -> Vec<f64> {
    parts.concat()
}

/// HVAE on the Gaussian model: q⁰ is the standard normal model prior and the
/// trainable flow parameters are the step sizes and tempering.
///
/// Layout: `[Δ, log σ², ε_raw, tempering_raw]`.
#[derive(Debug, Clone)]
pub struct GaussianHvae<'a> {
    pub data: &'a Dataset,
    pub steps: usize,
    pub tempering: TemperingKind,
    pub xi: f64,
    pub init: GaussianInit,
    /// Initial step size shared by all coordinates.
    pub eps_init: f64,
    /// Initial inverse temperature (Fixed), or the product `Π α_k²` the free
    /// α's start from.
    pub beta0_init: f64,
}

impl<'a> GaussianHvae<'a> {
    pub fn new(data: &'a Dataset, steps: usize, tempering: TemperingKind) -> Self {
        Self {
            data,
            steps,
            tempering,
            xi: crate::flow::DEFAULT_XI,
            init: GaussianInit::Standard,
            eps_init: 0.005,
            beta0_init: 0.5,
        }
    }

    fn dim(&self) -> usize {
        self.data.dim()
    }

    pub fn flow_params(&self, params: &[f64]) -> Result<UnconstrainedParams> {
        let d = self.dim();
        let mut p = UnconstrainedParams::new(
            self.steps,
            self.xi,
            self.tempering,
            vec![0.0; d],
            vec![0.0; self.tempering.num_raw(self.steps)],
        )?;
        p.set_from_slice(&params[2 * d..])?;
        Ok(p)
    }

    pub fn flow_config(&self, params: &[f64]) -> Result<FlowConfig> {
        self.flow_params(params)?.constrain()
    }
}

impl Objective for GaussianHvae<'_> {
    fn num_params(&self) -> usize {
        3 * self.dim() + self.tempering.num_raw(self.steps)
    }

    fn num_items(&self) -> usize {
        1
    }

    fn initial_params(&self) -> Vec<f64> {
        let d = self.dim();
        let tempering = match self.tempering {
            TemperingKind::None => TemperingScheme::None,
            TemperingKind::Fixed => TemperingScheme::Fixed { beta0: self.beta0_init },
            TemperingKind::Free => {
                let a = self.beta0_init.powf(0.5 / self.steps.max(1) as f64);
                TemperingScheme::Free { alphas: vec![a; self.steps] }
            }
        };
        let cfg = FlowConfig { steps: self.steps, eps: vec![self.eps_init; d], tempering, xi: self.xi };
        let raw = UnconstrainedParams::unconstrain(&cfg).expect("valid initial flow");
        concat(&[&initial_theta(self.data, self.init), &raw.to_vec()])
    }

    fn draw(&self, params: &[f64], _item: usize, rng: &mut StreamRng) -> Result<(f64, Vec<f64>)> {
        let d = self.dim();
        let flow = self.flow_params(params)?;
        let noise = HisNoise::sample(rng, d, d);
        let prior = StandardNormalPrior::new(d);
        let (est, g) = backprop_his(&GaussianModel::new(d), &params[..2 * d], self.data, &flow, &prior, &[], &noise)?;
        Ok((est.value, concat(&[&g.d_theta, &g.d_flow()])))
    }
}

/// Mean-field VB on the Gaussian model. Layout: `[Δ, log σ², μ_Z, log diag Σ_Z]`.
#[derive(Debug, Clone)]
pub struct GaussianVb<'a> {
    pub data: &'a Dataset,
    pub init: GaussianInit,
}

impl<'a> GaussianVb<'a> {
    pub fn new(data: &'a Dataset) -> Self {
        Self { data, init: GaussianInit::Standard }
    }
}

impl Objective for GaussianVb<'_> {
    fn num_params(&self) -> usize {
        4 * self.data.dim()
    }

    fn num_items(&self) -> usize {
        1
    }

    fn initial_params(&self) -> Vec<f64> {
        let d = self.data.dim();
        concat(&[&initial_theta(self.data, self.init), &vec![0.0; 2 * d]])
    }

    fn draw(&self, params: &[f64], _item: usize, rng: &mut StreamRng) -> Result<(f64, Vec<f64>)> {
        let d = self.data.dim();
        let noise = normal_vec(rng, d);
        let prior = MeanFieldGaussian::new(d);
        let (est, g) =
            backprop_vanilla(&GaussianModel::new(d), &params[..2 * d], self.data, &prior, &params[2 * d..], &noise)?;
        Ok((est.value, concat(&[&g.d_theta, &g.d_prior])))
    }
}

/// Tied-parameter planar flow on the Gaussian model with a standard normal
/// base density. Layout: `[Δ, log σ², u_raw, w, b]`.
#[derive(Debug, Clone)]
pub struct GaussianNf<'a> {
    pub data: &'a Dataset,
    pub iterations: usize,
    pub init: GaussianInit,
}

impl<'a> GaussianNf<'a> {
    pub fn new(data: &'a Dataset, iterations: usize) -> Self {
        Self { data, iterations, init: GaussianInit::Standard }
    }
}

impl Objective for GaussianNf<'_> {
    fn num_params(&self) -> usize {
        2 * self.data.dim() + planar_raw_len(self.data.dim())
    }

    fn num_items(&self) -> usize {
        1
    }

    fn initial_params(&self) -> Vec<f64> {
        let d = self.data.dim();
        // u = 0, w ≠ 0: the identity map, away from the all-zero saddle
        let mut flow = vec![0.0; planar_raw_len(d)];
        flow[d..2 * d].iter_mut().for_each(|w| *w = 0.1);
        concat(&[&initial_theta(self.data, self.init), &flow])
    }

    fn draw(&self, params: &[f64], _item: usize, rng: &mut StreamRng) -> Result<(f64, Vec<f64>)> {
        let d = self.data.dim();
        let noise = normal_vec(rng, d);
        let prior = StandardNormalPrior::new(d);
        let (est, g) = backprop_planar(
            &GaussianModel::new(d),
            &params[..2 * d],
            self.data,
            &params[2 * d..],
            self.iterations,
            &prior,
            &[],
            &noise,
        )?;
        Ok((est.value, concat(&[&g.d_theta, &g.d_flow])))
    }
}

/// One of the three Gaussian-study methods behind a single type.
#[derive(Debug, Clone)]
pub enum GaussianObjective<'a> {
    Hvae(GaussianHvae<'a>),
    Vb(GaussianVb<'a>),
    Nf(GaussianNf<'a>),
}

impl GaussianObjective<'_> {
    fn inner(&self) -> &dyn Objective {
        match self {
            GaussianObjective::Hvae(o) => o,
            GaussianObjective::Vb(o) => o,
            GaussianObjective::Nf(o) => o,
        }
    }

    /// Model parameters `(Δ, σ²)` from a flat parameter vector.
    pub fn model_params(&self, params: &[f64]) -> GaussianModelParams {
        let d = match self {
            GaussianObjective::Hvae(o) => o.data.dim(),
            GaussianObjective::Vb(o) => o.data.dim(),
            GaussianObjective::Nf(o) => o.data.dim(),
        };
        GaussianModelParams::from_theta(&params[..2 * d])
    }
}

impl Objective for GaussianObjective<'_> {
    fn num_params(&self) -> usize {
        self.inner().num_params()
    }

    fn num_items(&self) -> usize {
        1
    }

    fn initial_params(&self) -> Vec<f64> {
        self.inner().initial_params()
    }

    fn draw(&self, params: &[f64], item: usize, rng: &mut StreamRng) -> Result<(f64, Vec<f64>)> {
        self.inner().draw(params, item, rng)
    }
}

/// VAE with a Bernoulli decoder and an affine Gaussian encoder, optionally
/// refined by the Hamiltonian flow (`steps > 0`).
///
/// Layout: `[W, b, ε_raw, tempering_raw, φ]`.
#[derive(Debug, Clone)]
pub struct BernoulliVae<'a> {
    pub data: &'a Dataset,
    pub latent_dim: usize,
    pub steps: usize,
    pub tempering: TemperingKind,
    pub xi: f64,
    pub eps_init: f64,
    pub beta0_init: f64,
    pub init_seed: u64,
}

impl<'a> BernoulliVae<'a> {
    pub fn new(data: &'a Dataset, latent_dim: usize, steps: usize, tempering: TemperingKind) -> Result<Self> {
        if !data.is_binary() {
            return Err(HviError::Domain("Bernoulli VAE needs binary data".into()));
        }
        Ok(Self {
            data,
            latent_dim,
            steps,
            tempering,
            xi: crate::flow::DEFAULT_XI,
            eps_init: 0.05,
            beta0_init: 0.5,
            init_seed: 0,
        })
    }

    pub fn decoder(&self) -> BernoulliDecoder {
        BernoulliDecoder::new(self.data.dim(), self.latent_dim)
    }

    pub fn encoder(&self) -> AmortizedGaussianPrior {
        AmortizedGaussianPrior::new(self.data.dim(), self.latent_dim)
    }

    fn flow_len(&self) -> usize {
        if self.steps == 0 {
            0
        } else {
            self.latent_dim + self.tempering.num_raw(self.steps)
        }
    }

    /// `(θ, flow_raw, φ)` views of a flat parameter vector.
    pub fn split<'p>(&self, params: &'p [f64]) -> (&'p [f64], &'p [f64], &'p [f64]) {
        let nt = self.decoder().num_params();
        let (theta, rest) = params.split_at(nt);
        let (flow, phi) = rest.split_at(self.flow_len());
        (theta, flow, phi)
    }

    pub fn flow_params(&self, flow: &[f64]) -> Result<UnconstrainedParams> {
        let l = self.latent_dim;
        UnconstrainedParams::new(self.steps, self.xi, self.tempering, flow[..l].to_vec(), flow[l..].to_vec())
    }
}

impl Objective for BernoulliVae<'_> {
    fn num_params(&self) -> usize {
        self.decoder().num_params() + self.flow_len() + VariationalPrior::<[f64]>::num_params(&self.encoder())
    }

    fn num_items(&self) -> usize {
        self.data.len()
    }

    fn initial_params(&self) -> Vec<f64> {
        let mut rng = stream(self.init_seed, &[0xDEC0]);
        let theta: Vec<f64> = normal_vec(&mut rng, self.decoder().num_params()).iter().map(|v| 0.01 * v).collect();
        let flow = if self.steps == 0 {
            vec![]
        } else {
            let mut f = vec![logit(self.eps_init / self.xi); self.latent_dim];
            match self.tempering {
                TemperingKind::None => {}
                TemperingKind::Fixed => f.push(logit(self.beta0_init)),
                TemperingKind::Free => {
                    let a = self.beta0_init.powf(0.5 / self.steps as f64);
                    f.extend(std::iter::repeat_n(logit(a), self.steps));
                }
            }
            f
        };
        let enc = self.encoder();
        let mut phi = vec![0.0; VariationalPrior::<[f64]>::num_params(&enc)];
        let (l, d) = (self.latent_dim, self.data.dim());
        let block = l * (d + 1);
        phi[block + l * d..].iter_mut().for_each(|c| *c = softplus_inv(1.0));
        concat(&[&theta, &flow, &phi])
    }

    fn draw(&self, params: &[f64], item: usize, rng: &mut StreamRng) -> Result<(f64, Vec<f64>)> {
        let (theta, flow, phi) = self.split(params);
        let x = self.data.row(item);
        let (model, enc) = (self.decoder(), self.encoder());
        if self.steps == 0 {
            let noise = normal_vec(rng, self.latent_dim);
            let (est, g) = backprop_vanilla(&model, theta, x, &enc, phi, &noise)?;
            return Ok((est.value, concat(&[&g.d_theta, &g.d_prior])));
        }
        let fp = self.flow_params(flow)?;
        let noise = HisNoise::sample(rng, self.latent_dim, self.latent_dim);
        let (est, g) = backprop_his(&model, theta, x, &fp, &enc, phi, &noise)?;
        Ok((est.value, concat(&[&g.d_theta, &g.d_flow(), &g.d_prior])))
    }
}
