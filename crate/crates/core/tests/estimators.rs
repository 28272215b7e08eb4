//! Statistical checks of the likelihood estimators on small Gaussian
//! instances where `log p(D)` is known in closed form.

use hvi::bench::generate_dataset;
use hvi::estimators::{
    ais_log_likelihood, his_elbo, his_elbo_rao_blackwell, iwae_bound, planar_nf_elbo, prior_log_weight,
    vanilla_elbo, AisConfig, HisNoise, PlanarFlowParams,
};
use hvi::flow::{FlowConfig, TemperingScheme};
use hvi::math::{mean, std_error};
use hvi::model::{
    gaussian_exact_log_marginal, gaussian_exact_posterior, make_true_params, Dataset, GaussianModel,
    MeanFieldGaussian, MeanFieldParams, StandardNormalPrior,
};
use hvi::rng::{normal_vec, stream};

struct Instance {
    data: Dataset,
    theta: Vec<f64>,
    exact: f64,
    model: GaussianModel,
    /// Mean-field proposal: the exact posterior with variances inflated.
    phi: Vec<f64>,
}

fn instance(d: usize, n: usize, seed: u64) -> Instance {
    let data = generate_dataset(d, n, seed).unwrap();
    let p = make_true_params(d);
    let (m, v) = gaussian_exact_posterior(&p, &data).unwrap();
    let phi = MeanFieldParams::new(m, v.iter().map(|v| 1.5 * v).collect()).unwrap().to_phi();
    Instance { exact: gaussian_exact_log_marginal(&p, &data).unwrap(), theta: p.to_theta(), data, model: GaussianModel::new(d), phi }
}

/// Mean and SE of `exp(lw - exact)`; unbiased estimators give mean 1.
fn ratio_stats(lw: &[f64], exact: f64) -> (f64, f64) {
    let w: Vec<f64> = lw.iter().map(|l| (l - exact).exp()).collect();
    (mean(&w), std_error(&w))
}

#[test]
fn weights_are_unbiased() {
    let inst = instance(2, 10, 1);
    let prior = MeanFieldGaussian::new(2);
    let flow = FlowConfig::new(3, vec![0.05; 2], TemperingScheme::Fixed { beta0: 0.6 }, 0.5).unwrap();
    let mut rng = stream(11, &[]);
    let n = 20_000;
    let mut his = Vec::with_capacity(n);
    let mut plain = Vec::with_capacity(n);
    for _ in 0..n {
        let noise = HisNoise::sample(&mut rng, 2, 2);
        his.push(his_elbo(&inst.model, &inst.theta, &inst.data, &flow, &prior, &inst.phi, &noise).unwrap().value);
        let e = normal_vec(&mut rng, 2);
        plain.push(prior_log_weight(&inst.model, &inst.theta, &inst.data, &prior, &inst.phi, &e).unwrap());
    }
    for (name, lw) in [("his", &his), ("prior", &plain)] {
        let (m, se) = ratio_stats(lw, inst.exact);
        assert!((m - 1.0).abs() <= 4.0 * se, "{name}: {m} ± {se}");
    }
}

#[test]
fn bounds_sit_below_the_log_marginal() {
    let inst = instance(3, 20, 2);
    let prior = MeanFieldGaussian::new(3);
    let std = StandardNormalPrior::new(3);
    let flow = FlowConfig::new(5, vec![0.03; 3], TemperingScheme::Fixed { beta0: 0.5 }, 0.5).unwrap();
    let nf = PlanarFlowParams::new(vec![0.2, -0.1, 0.3], vec![0.5, 0.5, -0.2], 0.1, 4).unwrap();
    let q = MeanFieldParams::from_phi(&inst.phi);
    let mut rng = stream(12, &[]);
    let n = 4000;
    let mut draws: [Vec<f64>; 5] = Default::default();
    for _ in 0..n {
        let noise = HisNoise::sample(&mut rng, 3, 3);
        draws[0].push(his_elbo(&inst.model, &inst.theta, &inst.data, &flow, &prior, &inst.phi, &noise).unwrap().value);
        draws[1].push(
            his_elbo_rao_blackwell(&inst.model, &inst.theta, &inst.data, &flow, &prior, &inst.phi, &noise).unwrap().value,
        );
        draws[2].push(vanilla_elbo(&inst.model, &inst.theta, &inst.data, &q, &noise.prior).unwrap().value);
        let noises: Vec<Vec<f64>> = (0..4).map(|_| normal_vec(&mut rng, 3)).collect();
        draws[3].push(iwae_bound(&inst.model, &inst.theta, &inst.data, &prior, &inst.phi, &noises).unwrap());
        draws[4].push(planar_nf_elbo(&inst.model, &inst.theta, &inst.data, &nf, &std, &[], &noise.prior).unwrap().value);
    }
    for (i, d) in draws.iter().enumerate() {
        assert!(mean(d) <= inst.exact + 3.0 * std_error(d), "estimator {i}: {} vs {}", mean(d), inst.exact);
    }
    // more importance samples tighten the bound
    assert!(mean(&draws[3]) > mean(&draws[2]));
}

#[test]
fn rao_blackwell_shift_has_zero_mean() {
    let inst = instance(4, 15, 3);
    let prior = MeanFieldGaussian::new(4);
    let flow = FlowConfig::new(4, vec![0.04; 4], TemperingScheme::Fixed { beta0: 0.3 }, 0.5).unwrap();
    let mut rng = stream(13, &[]);
    let diffs: Vec<f64> = (0..20_000)
        .map(|_| {
            let noise = HisNoise::sample(&mut rng, 4, 4);
            let a = his_elbo(&inst.model, &inst.theta, &inst.data, &flow, &prior, &inst.phi, &noise).unwrap().value;
            let b = his_elbo_rao_blackwell(&inst.model, &inst.theta, &inst.data, &flow, &prior, &inst.phi, &noise)
                .unwrap()
                .value;
            let g2: f64 = noise.gamma.iter().map(|g| g * g).sum();
            assert!((b - a - (2.0 - 0.5 * g2)).abs() < 1e-9);
            b - a
        })
        .collect();
    assert!(mean(&diffs).abs() <= 4.0 * std_error(&diffs));
}

#[test]
fn ais_improves_with_bridges() {
    let inst = instance(2, 30, 4);
    let prior = StandardNormalPrior::new(2);
    let gap = |bridges: usize| {
        let cfg = AisConfig { bridges, step_size: 0.05, leapfrog_steps: 2 };
        let mut rng = stream(14, &[bridges as u64]);
        let lw: Vec<f64> = (0..500)
            .map(|_| ais_log_likelihood(&inst.model, &inst.theta, &inst.data, &prior, &[], &cfg, &mut rng).unwrap())
            .collect();
        inst.exact - mean(&lw)
    };
    let (g1, g50) = (gap(1), gap(50));
    assert!(g50 >= -0.05 && g50 < g1, "{g1} {g50}");
}
