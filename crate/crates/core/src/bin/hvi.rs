//! `hvi` command line: data generation, single training runs, the
//! dimension sweep, held-out NLL and plotting.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hvi::bench::{
    emit_plot, gaussian_nll, generate_dataset_with_latent, read_aggregate_csv, run_experiment, thread_pool,
    train_gaussian, Settings,
};
use hvi::model::{gaussian_exact_log_marginal, gaussian_ml_params, make_true_params, Dataset};
use hvi::trainer::Checkpoint;
use hvi::{HviError, Result};

#[derive(Parser)]
#[command(name = "hvi", version, about = "Hamiltonian variational inference experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a Gaussian dataset and write it as CSV (or binary for `.bin`).
    Gen(Common),
    /// Train one method on one dataset.
    Train(Common),
    /// Train every method over every dimension and seed, then plot.
    Sweep(Common),
    /// Importance-sampled negative log-likelihood of a trained checkpoint.
    EvalNll(Common),
    /// Draw the error-vs-dimension chart from an aggregate CSV.
    Plot(Common),
}

#[derive(Args, Default)]
struct Common {
    /// `key = value` settings file; flags given on the command line win.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dim: Option<usize>,
    /// Comma-separated dimensions for `sweep`.
    #[arg(long)]
    dims: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// hvae | vb | nf, or a full label such as hvae-none.
    #[arg(long)]
    method: Option<String>,
    /// Comma-separated method labels for `sweep`.
    #[arg(long)]
    methods: Option<String>,
    /// Leapfrog steps (HVAE) or planar iterations (NF).
    #[arg(long = "K")]
    k: Option<usize>,
    /// fixed | free | none
    #[arg(long)]
    tempering: Option<String>,
    #[arg(long)]
    beta0: Option<f64>,
    #[arg(long)]
    xi: Option<f64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Early-stopping patience in epochs (`none` disables).
    #[arg(long)]
    patience: Option<String>,
    #[arg(long)]
    runs: Option<usize>,
    /// Monte Carlo draws per gradient step.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    init: Option<String>,
    #[arg(long)]
    nll_samples: Option<usize>,
    #[arg(long)]
    threads: Option<usize>,
    /// Input dataset (CSV or binary).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Checkpoint for `eval-nll`.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Aggregate CSV for `plot`.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn settings(&self) -> Result<Settings> {
        let mut s = match &self.config {
            Some(path) => Settings::from_config_text(&fs::read_to_string(path)?)?,
            None => Settings::default(),
        };
        let overrides: [(&str, Option<String>); 20] = [
            ("dim", self.dim.map(|v| v.to_string())),
            ("dims", self.dims.clone()),
            ("n", self.n.map(|v| v.to_string())),
            ("seed", self.seed.map(|v| v.to_string())),
            ("method", self.method.clone()),
            ("methods", self.methods.clone()),
            ("k", self.k.map(|v| v.to_string())),
            ("tempering", self.tempering.clone()),
            ("beta0", self.beta0.map(|v| v.to_string())),
            ("xi", self.xi.map(|v| v.to_string())),
            ("lr", self.lr.map(|v| v.to_string())),
            ("epochs", self.epochs.map(|v| v.to_string())),
            ("patience", self.patience.clone()),
            ("runs", self.runs.map(|v| v.to_string())),
            ("samples", self.samples.map(|v| v.to_string())),
            ("init", self.init.clone()),
            ("nll_samples", self.nll_samples.map(|v| v.to_string())),
            ("threads", self.threads.map(|v| v.to_string())),
            ("data", self.data.as_ref().map(|p| p.display().to_string())),
            ("out", self.out.as_ref().map(|p| p.display().to_string())),
        ];
        for (key, value) in overrides {
            if let Some(v) = value {
                s.set(key, &v)?;
            }
        }
        Ok(s)
    }
}

fn write_dataset(data: &Dataset, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    if path.extension().is_some_and(|e| e == "bin") {
        data.save_binary(path)
    } else {
        data.write_csv(path)
    }
}

fn load_or_generate(s: &Settings) -> Result<Dataset> {
    match &s.data {
        Some(path) => Dataset::load(path),
        None => Ok(generate_dataset_with_latent(s.dim, s.n, s.seed)?.0),
    }
}

fn gen(s: &Settings) -> Result<()> {
    let (data, z) = generate_dataset_with_latent(s.dim, s.n, s.seed)?;
    let path = if s.out.extension().is_some() { s.out.clone() } else { s.out.join("data.csv") };
    write_dataset(&data, &path)?;
    println!("wrote {} rows of dimension {} to {}", data.len(), data.dim(), path.display());
    println!("latent z = {z:?}");
    Ok(())
}

fn train(s: &Settings) -> Result<()> {
    let data = load_or_generate(s)?;
    let method = s.method_spec()?;
    let cfg = s.train_config();
    let pool = thread_pool(s.threads)?;
    let (est, r) = pool.install(|| train_gaussian(&method, &data, s.init, &cfg))?;
    fs::create_dir_all(&s.out)?;
    r.trace.save_csv(s.out.join("trace.csv"))?;
    Checkpoint { epoch: r.epochs as u64, params: r.params.clone(), optimizer: r.optimizer.clone(), data: Some(data.clone()) }
        .save(s.out.join("checkpoint.bin"))?;

    let d = data.dim();
    let truth = make_true_params(d);
    let (de, se) = est.block_sq_errors(&truth);
    let (dm, sm) = est.block_sq_errors(&gaussian_ml_params(&data));
    let log_marginal = gaussian_exact_log_marginal(&est, &data)?;
    let summary = format!(
        "method = {}\nd = {d}\nn = {}\nepochs = {}\nbest_epoch = {}\nstopped_early = {}\n\
         final_train_elbo = {}\nexact_log_marginal = {log_marginal}\nsq_error = {}\nsq_error_ml = {}\n\
         delta = {:?}\nsigma_sq = {:?}\n",
        method.label(),
        data.len(),
        r.epochs,
        r.best_epoch,
        r.stopped_early,
        hvi::bench::final_elbo(&r),
        de + se,
        dm + sm,
        est.delta,
        est.sigma_sq,
    );
    fs::write(s.out.join("summary.txt"), &summary)?;
    print!("{summary}");
    Ok(())
}

fn sweep(s: &Settings) -> Result<()> {
    let spec = s.experiment_spec()?;
    let result = run_experiment(&spec)?;
    for row in &result.aggregate {
        println!(
            "{:<16} d={:<3} runs={:<3} failed={:<2} mean_sq_error={:.4} sd={:.4}",
            row.method, row.d, row.runs, row.failed, row.mean_sq_error, row.sd_sq_error
        );
    }
    emit_plot(&result.aggregate, s.out.join("error_vs_dim.svg"))?;
    println!("results in {}", s.out.display());
    Ok(())
}

fn eval_nll(s: &Settings, checkpoint: Option<&Path>) -> Result<()> {
    let path = checkpoint
        .map(Path::to_path_buf)
        .unwrap_or_else(|| s.out.join("checkpoint.bin"));
    let ck = Checkpoint::load(&path)?;
    let data = match (&s.data, ck.data) {
        (Some(p), _) => Dataset::load(p)?,
        (None, Some(d)) => d,
        (None, None) => return Err(HviError::Config("no --data given and the checkpoint holds none".into())),
    };
    let method = s.method_spec()?;
    let nll = gaussian_nll(&method, &data, &ck.params, s.nll_samples, s.seed)?;
    let est = hvi::model::GaussianModelParams::from_theta(&ck.params[..2 * data.dim()]);
    let exact = -gaussian_exact_log_marginal(&est, &data)?;
    println!("method = {}\nnll = {nll}\nexact_nll = {exact}\nsamples = {}", method.label(), s.nll_samples);
    Ok(())
}

fn plot(s: &Settings, input: Option<&Path>) -> Result<()> {
    let input = input.map(Path::to_path_buf).unwrap_or_else(|| s.out.join("aggregate.csv"));
    let rows = read_aggregate_csv(&input)?;
    let target = if s.out.extension().is_some() { s.out.clone() } else { s.out.join("error_vs_dim.svg") };
    if emit_plot(&rows, &target)? {
        println!("wrote {}", target.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Gen(c) => gen(&c.settings()?),
        Command::Train(c) => train(&c.settings()?),
        Command::Sweep(c) => sweep(&c.settings()?),
        Command::EvalNll(c) => eval_nll(&c.settings()?, c.checkpoint.as_deref()),
        Command::Plot(c) => plot(&c.settings()?, c.input.as_deref()),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
