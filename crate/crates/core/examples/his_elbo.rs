//! Compares the single-draw bounds on a small Gaussian instance with the exact
//! log marginal: plain ELBO, HIS, its Rao-Blackwellised form, IWAE and AIS.

use hvi::estimators::{
    ais_log_likelihood, his_elbo, his_elbo_rao_blackwell, iwae_bound, vanilla_elbo, AisConfig, HisNoise,
};
use hvi::flow::{FlowConfig, TemperingScheme};
use hvi::math::{log_mean_exp, mean, std_error};
use hvi::model::{gaussian_exact_log_marginal, make_true_params, GaussianModel, MeanFieldParams, StandardNormalPrior};
use hvi::rng::{normal_vec, stream};

fn main() -> hvi::Result<()> {
    let d = 2;
    let data = hvi::bench::generate_dataset(d, 10, 3)?;
    let params = make_true_params(d);
    let theta = params.to_theta();
    let model = GaussianModel::new(d);
    let prior = StandardNormalPrior::new(d);
    let q = MeanFieldParams::standard(d);
    let exact = gaussian_exact_log_marginal(&params, &data)?;
    let flow = FlowConfig::new(5, vec![0.02; d], TemperingScheme::Fixed { beta0: 0.5 }, 0.5)?;

    let draws = 20_000;
    let mut rng = stream(1, &[]);
    let (mut van, mut his, mut rb, mut iw, mut ais) = (vec![], vec![], vec![], vec![], vec![]);
    let ais_cfg = AisConfig { bridges: 20, ..AisConfig::default() };
    for i in 0..draws {
        van.push(vanilla_elbo(&model, &theta, &data, &q, &normal_vec(&mut rng, d))?.value);
        let noise = HisNoise::sample(&mut rng, d, d);
        his.push(his_elbo(&model, &theta, &data, &flow, &prior, &[], &noise)?.value);
        rb.push(his_elbo_rao_blackwell(&model, &theta, &data, &flow, &prior, &[], &noise)?.value);
        let noises: Vec<Vec<f64>> = (0..5).map(|_| normal_vec(&mut rng, d)).collect();
        iw.push(iwae_bound(&model, &theta, &data, &prior, &[], &noises)?);
        if i < 2000 {
            ais.push(ais_log_likelihood(&model, &theta, &data, &prior, &[], &ais_cfg, &mut rng)?);
        }
    }
    println!("exact log p(x)        {exact:.4}");
    // the Rao-Blackwellised draw is still a lower bound in expectation, but its
    // exponential is no longer an unbiased likelihood estimate
    for (name, v, unbiased) in [
        ("ELBO", &van, true),
        ("HIS", &his, true),
        ("HIS (RB)", &rb, false),
        ("IWAE L=5", &iw, true),
        ("AIS B=20", &ais, true),
    ] {
        let lme = if unbiased { format!("{:>9.4}", log_mean_exp(v)) } else { "-".into() };
        println!("{name:<10} mean {:>9.4} ± {:.4}   log mean exp {lme}", mean(v), std_error(v));
    }
    Ok(())
}
