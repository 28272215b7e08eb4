//! Trains HVAE (tempered and untempered), mean-field VB and a planar flow on
//! the same dataset and compares parameter error and the final bound.
//!
//! `cargo run --release --example compare_methods -- [d] [epochs]`

use hvi::adjoint::TemperingKind;
use hvi::bench::{final_elbo, generate_dataset, train_gaussian, MethodSpec};
use hvi::model::{gaussian_exact_log_marginal, gaussian_ml_params, make_true_params};
use hvi::trainer::{GaussianInit, TrainConfig};

fn main() -> hvi::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let d: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(11);
    let epochs: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(20_000);
    let data = generate_dataset(d, 10_000, 9)?;
    let truth = make_true_params(d);
    let ml = gaussian_ml_params(&data);
    let cfg = TrainConfig { max_epochs: epochs, ..hvi::bench::gaussian_train_defaults() };
    println!("log p(D) at ML {:.3}", gaussian_exact_log_marginal(&ml, &data)?);
    println!("{:<16} {:>10} {:>10} {:>12}", "method", "err truth", "err ML", "final ELBO");
    for m in [
        MethodSpec::hvae(10, TemperingKind::Fixed),
        MethodSpec::hvae(10, TemperingKind::Free),
        MethodSpec::hvae(10, TemperingKind::None),
        MethodSpec::vb(),
        MethodSpec::nf(10),
    ] {
        match train_gaussian(&m, &data, GaussianInit::Standard, &cfg) {
            Ok((est, r)) => {
                let (a, b) = est.block_sq_errors(&truth);
                let (c, e) = est.block_sq_errors(&ml);
                println!("{:<16} {:>10.4} {:>10.2e} {:>12.3}", m.label(), a + b, c + e, final_elbo(&r));
            }
            Err(e) => println!("{:<16} failed: {e}", m.label()),
        }
    }
    Ok(())
}
