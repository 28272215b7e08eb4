//! Reference estimates of log p(D) for a trained model: AIS with increasing
//! numbers of bridges and importance sampling with each method's posterior,
//! all against the closed form.

use hvi::adjoint::TemperingKind;
use hvi::bench::{gaussian_nll, generate_dataset, train_gaussian, MethodSpec};
use hvi::estimators::{ais_log_likelihood, AisConfig};
use hvi::math::{log_mean_exp, std_error};
use hvi::model::{gaussian_exact_log_marginal, GaussianModel, StandardNormalPrior};
use hvi::rng::stream;
use hvi::trainer::{GaussianInit, TrainConfig};

fn main() -> hvi::Result<()> {
    let d = 3;
    let data = generate_dataset(d, 100, 5)?;
    let cfg = TrainConfig { max_epochs: 10_000, ..hvi::bench::gaussian_train_defaults() };
    let method = MethodSpec::hvae(10, TemperingKind::Fixed);
    let (est, r) = train_gaussian(&method, &data, GaussianInit::Standard, &cfg)?;
    let theta = est.to_theta();
    let exact = gaussian_exact_log_marginal(&est, &data)?;
    println!("exact log p(D) {exact:.4}");

    let model = GaussianModel::new(d);
    let prior = StandardNormalPrior::new(d);
    for bridges in [1, 10, 100] {
        let ais = AisConfig { bridges, step_size: 0.01, ..AisConfig::default() };
        let mut rng = stream(3, &[bridges as u64]);
        let w = (0..200)
            .map(|_| ais_log_likelihood(&model, &theta, &data, &prior, &[], &ais, &mut rng))
            .collect::<hvi::Result<Vec<_>>>()?;
        println!("AIS B={bridges:<4} log mean w {:.4}  (sd of log w / sqrt n {:.3})", log_mean_exp(&w), std_error(&w));
    }
    let nll = gaussian_nll(&method, &data, &r.params, 1000, 0)?;
    println!("importance sampling with the trained flow: log p(D) ≈ {:.4}", -nll);
    Ok(())
}
