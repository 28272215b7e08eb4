use hvi::adjoint::{
    backprop_his, backprop_his_config, backprop_his_scaled, backprop_planar, backprop_vanilla,
    finite_diff_gradient, planar_from_raw, TemperingKind, UnconstrainedParams,
};
use hvi::estimators::{his_elbo, planar_nf_elbo, prior_log_weight, HisNoise};
use hvi::flow::{FlowConfig, TemperingScheme};
use hvi::model::{
    AmortizedGaussianPrior, BernoulliDecoder, Dataset, GaussianModel, MeanFieldGaussian,
    StandardNormalPrior, TargetModel, VariationalPrior,
};
use hvi::rng::{normal_vec, stream};
use rand::Rng;

fn close(analytic: &[f64], fd: &[f64], rel: f64) -> Result<(), String> {
    assert_eq!(analytic.len(), fd.len());
    for (i, (a, f)) in analytic.iter().zip(fd).enumerate() {
        let tol = (rel * a.abs().max(f.abs())).max(1e-8);
        if (a - f).abs() > tol {
            return Err(format!("coordinate {i}: analytic {a}, finite difference {f}"));
        }
    }
    Ok(())
}

struct Instance {
    model: GaussianModel,
    theta: Vec<f64>,
    data: Dataset,
    phi: Vec<f64>,
    params: UnconstrainedParams,
    noise: HisNoise,
}

fn instance(d: usize, k: usize, kind: TemperingKind, seed: u64) -> Instance {
    let mut rng = stream(seed, &[d as u64, k as u64]);
    let n = 5;
    let data = Dataset::from_flat(normal_vec(&mut rng, n * d), d).unwrap();
    let mut theta = normal_vec(&mut rng, d);
    theta.extend((0..d).map(|_| rng.random_range(-0.5..0.5)));
    let mut phi: Vec<f64> = normal_vec(&mut rng, d).iter().map(|v| 0.3 * v).collect();
    phi.extend((0..d).map(|_| rng.random_range(-2.0..0.0)));
    let eps_raw = (0..d).map(|_| rng.random_range(-2.0..-0.5)).collect();
    let temp_raw = (0..kind.num_raw(k)).map(|_| rng.random_range(-1.0..2.0)).collect();
    let params = UnconstrainedParams::new(k, 0.5, kind, eps_raw, temp_raw).unwrap();
    let noise = HisNoise::sample(&mut rng, d, d);
    Instance { model: GaussianModel::new(d), theta, data, phi, params, noise }
}

fn check_instance(inst: &Instance) -> Result<(), String> {
    let prior = MeanFieldGaussian::new(inst.model.dim);
    let (_, g) = backprop_his(&inst.model, &inst.theta, &inst.data, &inst.params, &prior, &inst.phi, &inst.noise)
        .map_err(|e| e.to_string())?;
    let value = |theta: &[f64], flow: &[f64], phi: &[f64]| {
        let mut p = inst.params.clone();
        p.set_from_slice(flow).unwrap();
        let cfg = p.constrain().unwrap();
        his_elbo(&inst.model, theta, &inst.data, &cfg, &prior, phi, &inst.noise).unwrap().value
    };
    let h = 1e-5;
    let flow = inst.params.to_vec();
    let fd_theta = finite_diff_gradient(|t| value(t, &flow, &inst.phi), &inst.theta, h);
    let fd_flow = finite_diff_gradient(|f| value(&inst.theta, f, &inst.phi), &flow, h);
    let fd_phi = finite_diff_gradient(|p| value(&inst.theta, &flow, p), &inst.phi, h);
    close(&g.d_theta, &fd_theta, 1e-5).map_err(|e| format!("theta {e}"))?;
    close(&g.d_flow(), &fd_flow, 1e-5).map_err(|e| format!("flow {e}"))?;
    close(&g.d_prior, &fd_phi, 1e-5).map_err(|e| format!("prior {e}"))?;
    Ok(())
}

#[test]
fn gaussian_grid_matches_finite_differences() {
    for d in [1, 2, 4] {
        for k in [0, 1, 5, 10] {
            for kind in [TemperingKind::None, TemperingKind::Fixed, TemperingKind::Free] {
                for seed in 0..3 {
                    let inst = instance(d, k, kind, seed);
                    if let Err(e) = check_instance(&inst) {
                        panic!("d={d} K={k} {kind:?} seed={seed}: {e}");
                    }
                }
            }
        }
    }
}

#[test]
fn zero_steps_reduce_to_vanilla() {
    let inst = instance(3, 0, TemperingKind::None, 4);
    let prior = MeanFieldGaussian::new(3);
    let (e, g) = backprop_his(&inst.model, &inst.theta, &inst.data, &inst.params, &prior, &inst.phi, &inst.noise)
        .unwrap();
    let (v, gv) = backprop_vanilla(&inst.model, &inst.theta, &inst.data, &prior, &inst.phi, &inst.noise.prior).unwrap();
    assert!(g.d_eps_raw.iter().all(|v| *v == 0.0));
    // the momentum terms of the Rao-Blackwellised value are parameter free
    let gg: f64 = inst.noise.gamma.iter().map(|g| g * g).sum();
    let rb_shift = 1.5 - 0.5 * gg;
    assert!((e.value - rb_shift - v.value).abs() < 1e-12);
    for (a, b) in g.d_theta.iter().zip(&gv.d_theta) {
        assert!((a - b).abs() < 1e-12);
    }
    for (a, b) in g.d_prior.iter().zip(&gv.d_prior) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn scaling_the_objective_scales_the_gradient() {
    let inst = instance(2, 5, TemperingKind::Fixed, 9);
    let prior = MeanFieldGaussian::new(2);
    let (_, g1) = backprop_his(&inst.model, &inst.theta, &inst.data, &inst.params, &prior, &inst.phi, &inst.noise)
        .unwrap();
    let (_, g2) =
        backprop_his_scaled(&inst.model, &inst.theta, &inst.data, &inst.params, &prior, &inst.phi, &inst.noise, 2.0)
            .unwrap();
    let a: Vec<f64> = [g1.d_theta.clone(), g1.d_flow(), g1.d_prior.clone()].concat();
    let b: Vec<f64> = [g2.d_theta.clone(), g2.d_flow(), g2.d_prior.clone()].concat();
    for (a, b) in a.iter().zip(&b) {
        assert!((2.0 * a - b).abs() <= 1e-12 * b.abs().max(1.0));
    }
}

#[test]
fn unit_alphas_match_untempered_flow() {
    let inst = instance(3, 5, TemperingKind::None, 11);
    let prior = MeanFieldGaussian::new(3);
    let eps = inst.params.eps();
    let none = FlowConfig::new(5, eps.clone(), TemperingScheme::None, 0.5).unwrap();
    let free = FlowConfig::new(5, eps, TemperingScheme::Free { alphas: vec![1.0; 5] }, 0.5).unwrap();
    let (_, a) = backprop_his_config(&inst.model, &inst.theta, &inst.data, &none, &prior, &inst.phi, &inst.noise, 1.0)
        .unwrap();
    let (_, b) = backprop_his_config(&inst.model, &inst.theta, &inst.data, &free, &prior, &inst.phi, &inst.noise, 1.0)
        .unwrap();
    let x = [a.d_theta, a.d_eps, a.d_prior].concat();
    let y = [b.d_theta, b.d_eps, b.d_prior].concat();
    for (x, y) in x.iter().zip(&y) {
        assert!((x - y).abs() < 1e-10);
    }
}

#[test]
fn planar_gradient_matches_finite_differences() {
    let mut rng = stream(21, &[]);
    for d in [1, 2, 4] {
        for iterations in [1, 3, 6] {
            let data = Dataset::from_flat(normal_vec(&mut rng, 4 * d), d).unwrap();
            let model = GaussianModel::new(d);
            let theta: Vec<f64> = normal_vec(&mut rng, 2 * d).iter().map(|v| 0.3 * v).collect();
            let raw: Vec<f64> = normal_vec(&mut rng, 2 * d + 1).iter().map(|v| 0.7 * v).collect();
            let prior = StandardNormalPrior::new(d);
            let noise = normal_vec(&mut rng, d);
            let (_, g) = backprop_planar(&model, &theta, &data, &raw, iterations, &prior, &[], &noise).unwrap();
            let f = |theta: &[f64], raw: &[f64]| {
                let nf = planar_from_raw(raw, d, iterations).unwrap();
                planar_nf_elbo(&model, theta, &data, &nf, &prior, &[], &noise).unwrap().value
            };
            close(&g.d_theta, &finite_diff_gradient(|t| f(t, &raw), &theta, 1e-5), 1e-5).unwrap();
            close(&g.d_flow, &finite_diff_gradient(|r| f(&theta, r), &raw, 1e-5), 1e-5)
                .unwrap_or_else(|e| panic!("d={d} T={iterations}: {e}"));
        }
    }
}

#[test]
fn bernoulli_decoder_with_amortised_prior() {
    let mut rng = stream(33, &[]);
    let (obs, lat) = (6, 2);
    let model = BernoulliDecoder::new(obs, lat);
    let prior = AmortizedGaussianPrior::new(obs, lat);
    let x: Vec<f64> = (0..obs).map(|_| if rng.random::<f64>() < 0.5 { 1.0 } else { 0.0 }).collect();
    let theta: Vec<f64> = normal_vec(&mut rng, model.num_params()).iter().map(|v| 0.5 * v).collect();
    let phi: Vec<f64> = normal_vec(&mut rng, VariationalPrior::<[f64]>::num_params(&prior)).iter().map(|v| 0.3 * v).collect();
    for kind in [TemperingKind::None, TemperingKind::Fixed, TemperingKind::Free] {
        let params =
            UnconstrainedParams::new(4, 0.5, kind, vec![-1.0, -0.5], vec![0.5; kind.num_raw(4)]).unwrap();
        let noise = HisNoise::sample(&mut rng, lat, lat);
        let (_, g) = backprop_his(&model, &theta, &x[..], &params, &prior, &phi, &noise).unwrap();
        let f = |theta: &[f64], flow: &[f64], phi: &[f64]| {
            let mut p = params.clone();
            p.set_from_slice(flow).unwrap();
            his_elbo(&model, theta, &x[..], &p.constrain().unwrap(), &prior, phi, &noise).unwrap().value
        };
        let flow = params.to_vec();
        close(&g.d_theta, &finite_diff_gradient(|t| f(t, &flow, &phi), &theta, 1e-5), 1e-5).unwrap();
        close(&g.d_flow(), &finite_diff_gradient(|v| f(&theta, v, &phi), &flow, 1e-5), 1e-5).unwrap();
        close(&g.d_prior, &finite_diff_gradient(|p| f(&theta, &flow, p), &phi, 1e-5), 1e-5).unwrap();
    }
    let noise = normal_vec(&mut rng, lat);
    let (_, g) = backprop_vanilla(&model, &theta, &x[..], &prior, &phi, &noise).unwrap();
    let fd = finite_diff_gradient(|p| prior_log_weight(&model, &theta, &x[..], &prior, p, &noise).unwrap(), &phi, 1e-5);
    close(&g.d_prior, &fd, 1e-5).unwrap();
}
