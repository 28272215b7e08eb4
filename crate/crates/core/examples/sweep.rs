//! A reduced dimension sweep: every method over a few dimensions and seeds,
//! written to CSV and drawn as an SVG chart.
//!
//! `cargo run --release --example sweep -- [out_dir]`

use hvi::adjoint::TemperingKind;
use hvi::bench::{emit_plot, run_experiment, ExperimentSpec, MethodSpec};
use hvi::trainer::TrainConfig;

fn main() -> hvi::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "sweep_out".into());
    let spec = ExperimentSpec {
        dims: vec![1, 5, 11],
        methods: vec![
            MethodSpec::hvae(10, TemperingKind::Fixed),
            MethodSpec::hvae(10, TemperingKind::None),
            MethodSpec::vb(),
            MethodSpec::nf(10),
        ],
        runs: 3,
        n: 2000,
        out_dir: Some(out.clone().into()),
        train: TrainConfig { max_epochs: 5000, ..hvi::bench::gaussian_train_defaults() },
        ..ExperimentSpec::default()
    };
    let result = run_experiment(&spec)?;
    for a in &result.aggregate {
        println!("{:<16} d={:<3} mean ‖θ̂-θ‖² {:.4} ± {:.4} ({} ok, {} failed)", a.method, a.d, a.mean_sq_error, a.sd_sq_error, a.runs, a.failed);
    }
    let svg = std::path::Path::new(&out).join("error_vs_dim.svg");
    emit_plot(&result.aggregate, &svg)?;
    println!("wrote {}", svg.display());
    Ok(())
}
