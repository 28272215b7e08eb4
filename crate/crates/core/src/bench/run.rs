use std::fs;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

use super::data::generate_dataset;
use super::spec::{ExperimentSpec, Method, MethodSpec};
use crate::adjoint::planar_from_raw;
use crate::error::{HviError, Result};
use crate::estimators::{importance_sampled_nll, Proposal};
use crate::math::{mean, variance};
use crate::model::{make_true_params, Dataset, GaussianModel, GaussianModelParams, MeanFieldGaussian, StandardNormalPrior};
use crate::rng::{derive_seed, stream};
use crate::trainer::{
    train, GaussianHvae, GaussianInit, GaussianNf, GaussianObjective, GaussianVb, Objective, TrainConfig,
    TrainResult, RMSPROP_DECAY, STABILIZER,
};

const NLL_STREAM: u64 = 0x4e4c_4c00;

/// One trained `(method, d, run)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub method: String,
    pub d: usize,
    /// Seed of the run's dataset; shared by every method in the same
    /// `(d, run)` so methods see identical data.
    pub seed: u64,
    /// `‖θ̂ - θ‖²` over the concatenated `(Δ, σ²)` blocks.
    pub sq_error: f64,
    pub delta_sq_error: f64,
    pub sigma_sq_error: f64,
    pub final_elbo: f64,
    pub epochs: usize,
    pub wall_ms: f64,
    /// `ok`, or `failed: <reason>` with NaN metrics.
    pub status: String,
}

impl ResultRow {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

pub const RESULT_HEADER: [&str; 10] = [
    "method",
    "d",
    "seed",
    "sq_error",
    "delta_sq_error",
    "sigma_sq_error",
    "final_elbo",
    "epochs",
    "wall_ms",
    "status",
];

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub method: String,
    pub d: usize,
    /// Successful runs entering the statistics.
    pub runs: usize,
    pub failed: usize,
    pub mean_sq_error: f64,
    pub sd_sq_error: f64,
    pub mean_delta_sq_error: f64,
    pub mean_sigma_sq_error: f64,
}

pub const AGGREGATE_HEADER: [&str; 8] = [
    "method",
    "d",
    "runs",
    "failed",
    "mean_sq_error",
    "sd_sq_error",
    "mean_delta_sq_error",
    "mean_sigma_sq_error",
];

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub rows: Vec<ResultRow>,
    pub aggregate: Vec<AggregateRow>,
}

/// Effective worker count: the requested cap, lowered by `HVI_THREADS`.
pub fn worker_threads(requested: Option<usize>) -> usize {
    let env = std::env::var("HVI_THREADS").ok().and_then(|v| v.trim().parse::<usize>().ok());
    let default = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let cap = match (requested, env) {
        (Some(r), Some(e)) => r.min(e),
        (Some(r), None) => r,
        (None, Some(e)) => e,
        (None, None) => default,
    };
    cap.max(1)
}

pub fn thread_pool(requested: Option<usize>) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(worker_threads(requested))
        .build()
        .map_err(|e| HviError::Config(format!("cannot build worker pool: {e}")))
}

/// Objective for `method` on `data`.
pub fn gaussian_objective<'a>(method: &MethodSpec, data: &'a Dataset, init: GaussianInit) -> GaussianObjective<'a> {
    match method.method {
        Method::Hvae => GaussianObjective::Hvae(GaussianHvae {
            xi: method.xi,
            init,
            eps_init: method.eps0,
            beta0_init: method.beta0,
            ..GaussianHvae::new(data, method.steps, method.tempering)
        }),
        Method::Vb => GaussianObjective::Vb(GaussianVb { data, init }),
        Method::Nf => GaussianObjective::Nf(GaussianNf { data, iterations: method.steps, init }),
    }
}

/// Trains one method on one dataset and returns the estimated model
/// parameters with the training result.
pub fn train_gaussian(
    method: &MethodSpec,
    data: &Dataset,
    init: GaussianInit,
    cfg: &TrainConfig,
) -> Result<(GaussianModelParams, TrainResult)> {
    let obj = gaussian_objective(method, data, init);
    let r = train(&obj, cfg)?;
    Ok((obj.model_params(&r.params), r))
}

/// Importance-sampled `-log p(D)` under the trained parameters, using the
/// method's own approximate posterior as proposal.
pub fn gaussian_nll(method: &MethodSpec, data: &Dataset, params: &[f64], samples: usize, seed: u64) -> Result<f64> {
    let d = data.dim();
    let obj = gaussian_objective(method, data, GaussianInit::Standard);
    if params.len() != obj.num_params() {
        return Err(HviError::Config(format!(
            "{} expects {} parameters, got {}",
            method.label(),
            obj.num_params(),
            params.len()
        )));
    }
    let model = GaussianModel::new(d);
    let theta = &params[..2 * d];
    let mut rng = stream(seed, &[NLL_STREAM]);
    match &obj {
        GaussianObjective::Hvae(h) => {
            let flow = h.flow_config(params)?;
            let prior = StandardNormalPrior::new(d);
            let proposal = Proposal::Hamiltonian { prior: &prior, phi: &[], flow: &flow };
            importance_sampled_nll(&model, theta, data, &proposal, samples, &mut rng)
        }
        GaussianObjective::Vb(_) => {
            let prior = MeanFieldGaussian::new(d);
            let proposal = Proposal::Prior { prior: &prior, phi: &params[2 * d..] };
            importance_sampled_nll(&model, theta, data, &proposal, samples, &mut rng)
        }
        GaussianObjective::Nf(_) => {
            let flow = planar_from_raw(&params[2 * d..], d, method.steps)?;
            let prior = StandardNormalPrior::new(d);
            let proposal = Proposal::Planar { prior: &prior, phi: &[], flow: &flow };
            importance_sampled_nll(&model, theta, data, &proposal, samples, &mut rng)
        }
    }
}

/// Mean training ELBO over the last (up to) 100 epochs.
pub fn final_elbo(r: &TrainResult) -> f64 {
    let rows = &r.trace.rows;
    let tail = &rows[rows.len().saturating_sub(100)..];
    tail.iter().map(|t| t.train_elbo).sum::<f64>() / tail.len().max(1) as f64
}

fn run_cell(spec: &ExperimentSpec, m: usize, d: usize, run: usize) -> ResultRow {
    let method = &spec.methods[m];
    let data_seed = derive_seed(spec.seed_base, &[d as u64, run as u64]);
    let train_seed = derive_seed(spec.seed_base, &[m as u64, d as u64, run as u64, 1]);
    let start = Instant::now();
    let outcome = generate_dataset(d, spec.n, data_seed).and_then(|data| {
        let cfg = TrainConfig { seed: train_seed, ..spec.train.clone() };
        train_gaussian(method, &data, spec.init, &cfg)
    });
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    let base = ResultRow {
        method: method.label(),
        d,
        seed: data_seed,
        sq_error: f64::NAN,
        delta_sq_error: f64::NAN,
        sigma_sq_error: f64::NAN,
        final_elbo: f64::NAN,
        epochs: 0,
        wall_ms,
        status: String::new(),
    };
    match outcome {
        Ok((est, r)) => {
            let (de, se) = est.block_sq_errors(&make_true_params(d));
            ResultRow {
                sq_error: de + se,
                delta_sq_error: de,
                sigma_sq_error: se,
                final_elbo: final_elbo(&r),
                epochs: r.epochs,
                status: "ok".into(),
                ..base
            }
        }
        Err(e) => ResultRow { status: format!("failed: {e}"), ..base },
    }
}

/// Per-(method, d) means and sample SDs over successful runs, in first-seen
/// order of `rows`.
pub fn aggregate(rows: &[ResultRow]) -> Vec<AggregateRow> {
    let mut keys: Vec<(String, usize)> = Vec::new();
    for r in rows {
        let k = (r.method.clone(), r.d);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|(method, d)| {
            let cell: Vec<&ResultRow> = rows.iter().filter(|r| r.method == method && r.d == d).collect();
            let ok: Vec<&&ResultRow> = cell.iter().filter(|r| r.is_ok()).collect();
            let sq: Vec<f64> = ok.iter().map(|r| r.sq_error).collect();
            let de: Vec<f64> = ok.iter().map(|r| r.delta_sq_error).collect();
            let se: Vec<f64> = ok.iter().map(|r| r.sigma_sq_error).collect();
            let stat = |v: &[f64]| if v.is_empty() { f64::NAN } else { mean(v) };
            AggregateRow {
                method,
                d,
                runs: ok.len(),
                failed: cell.len() - ok.len(),
                mean_sq_error: stat(&sq),
                sd_sq_error: if sq.len() > 1 { variance(&sq).sqrt() } else if sq.len() == 1 { 0.0 } else { f64::NAN },
                mean_delta_sq_error: stat(&de),
                mean_sigma_sq_error: stat(&se),
            }
        })
        .collect()
}

fn fmt(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        v.to_string()
    }
}

pub fn write_results_csv(path: impl AsRef<Path>, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(RESULT_HEADER)?;
    for r in rows {
        w.write_record(&[
            r.method.clone(),
            r.d.to_string(),
            r.seed.to_string(),
            fmt(r.sq_error),
            fmt(r.delta_sq_error),
            fmt(r.sigma_sq_error),
            fmt(r.final_elbo),
            r.epochs.to_string(),
            fmt(r.wall_ms),
            r.status.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn parse_f64(s: &str) -> Result<f64> {
    if s.is_empty() {
        return Ok(f64::NAN);
    }
    s.parse().map_err(|_| HviError::Format(format!("bad number '{s}'")))
}

fn parse_usize(s: &str) -> Result<usize> {
    s.parse().map_err(|_| HviError::Format(format!("bad integer '{s}'")))
}

pub fn read_results_csv(path: impl AsRef<Path>) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.records()
        .map(|rec| {
            let rec = rec?;
            if rec.len() != RESULT_HEADER.len() {
                return Err(HviError::Format(format!("expected {} columns, got {}", RESULT_HEADER.len(), rec.len())));
            }
            Ok(ResultRow {
                method: rec[0].to_string(),
                d: parse_usize(&rec[1])?,
                seed: rec[2].parse().map_err(|_| HviError::Format(format!("bad seed '{}'", &rec[2])))?,
                sq_error: parse_f64(&rec[3])?,
                delta_sq_error: parse_f64(&rec[4])?,
                sigma_sq_error: parse_f64(&rec[5])?,
                final_elbo: parse_f64(&rec[6])?,
                epochs: parse_usize(&rec[7])?,
                wall_ms: parse_f64(&rec[8])?,
                status: rec[9].to_string(),
            })
        })
        .collect()
}

pub fn write_aggregate_csv(path: impl AsRef<Path>, rows: &[AggregateRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(AGGREGATE_HEADER)?;
    for r in rows {
        w.write_record(&[
            r.method.clone(),
            r.d.to_string(),
            r.runs.to_string(),
            r.failed.to_string(),
            fmt(r.mean_sq_error),
            fmt(r.sd_sq_error),
            fmt(r.mean_delta_sq_error),
            fmt(r.mean_sigma_sq_error),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_aggregate_csv(path: impl AsRef<Path>) -> Result<Vec<AggregateRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.records()
        .map(|rec| {
            let rec = rec?;
            if rec.len() != AGGREGATE_HEADER.len() {
                return Err(HviError::Format(format!("expected {} columns, got {}", AGGREGATE_HEADER.len(), rec.len())));
            }
            Ok(AggregateRow {
                method: rec[0].to_string(),
                d: parse_usize(&rec[1])?,
                runs: parse_usize(&rec[2])?,
                failed: parse_usize(&rec[3])?,
                mean_sq_error: parse_f64(&rec[4])?,
                sd_sq_error: parse_f64(&rec[5])?,
                mean_delta_sq_error: parse_f64(&rec[6])?,
                mean_sigma_sq_error: parse_f64(&rec[7])?,
            })
        })
        .collect()
}

fn write_metadata(dir: &Path, spec: &ExperimentSpec) -> Result<()> {
    let t = &spec.train;
    let text = format!(
        "# run metadata\noptimizer = {:?}\nlr = {}\nrmsprop_decay = {}\nstabilizer = {}\nepochs = {}\nsamples = {}\n\
         tail_average = {}\nrel_tol = {}\ninit = {:?}\nn = {}\nruns = {}\nseed = {}\ndims = {}\nmethods = {}\n",
        t.optimizer,
        t.lr,
        RMSPROP_DECAY,
        STABILIZER,
        t.max_epochs,
        t.samples,
        t.tail_average,
        t.rel_tol.map_or("none".to_string(), |v| v.to_string()),
        spec.init,
        spec.n,
        spec.runs,
        spec.seed_base,
        spec.dims.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(", "),
        spec.methods.iter().map(|m| m.label()).collect::<Vec<_>>().join(", "),
    );
    fs::write(dir.join("metadata.txt"), text)?;
    Ok(())
}

/// Trains every `(method, d, run)` cell on the worker pool. Rows come back
/// sorted by method order, then `d`, then run, whatever the scheduling. With
/// an output directory, writes `results.csv`, `aggregate.csv` and
/// `metadata.txt` there.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    spec.validate()?;
    let mut jobs = Vec::new();
    for m in 0..spec.methods.len() {
        for &d in &spec.dims {
            for run in 0..spec.runs {
                jobs.push((m, d, run));
            }
        }
    }
    let pool = thread_pool(spec.threads)?;
    let rows: Vec<ResultRow> = pool.install(|| jobs.par_iter().map(|&(m, d, run)| run_cell(spec, m, d, run)).collect());
    let agg = aggregate(&rows);
    if let Some(dir) = &spec.out_dir {
        fs::create_dir_all(dir)?;
        write_results_csv(dir.join("results.csv"), &rows)?;
        write_aggregate_csv(dir.join("aggregate.csv"), &agg)?;
        write_metadata(dir, spec)?;
    }
    Ok(ExperimentResult { rows, aggregate: agg })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_spec() -> ExperimentSpec {
        ExperimentSpec {
            dims: vec![2],
            methods: vec![MethodSpec::vb()],
            runs: 1,
            n: 200,
            train: TrainConfig { max_epochs: 50, ..crate::bench::gaussian_train_defaults() },
            ..ExperimentSpec::default()
        }
    }

    #[test]
    fn single_cell_gives_single_row() {
        let r = run_experiment(&tiny_spec()).unwrap();
        assert_eq!(r.rows.len(), 1);
        assert!(r.rows[0].is_ok());
        assert!(r.rows[0].sq_error >= 0.0);
        assert_eq!(r.aggregate.len(), 1);
        assert_eq!(r.aggregate[0].sd_sq_error, 0.0);
    }

    #[test]
    fn failures_are_recorded_not_raised() {
        let mut spec = tiny_spec();
        // a step size far beyond the stability limit of the stiff posterior
        let mut hv = MethodSpec::hvae(5, crate::adjoint::TemperingKind::None);
        hv.eps0 = 0.49;
        spec.n = 100_000;
        spec.methods = vec![hv, MethodSpec::vb()];
        let r = run_experiment(&spec).unwrap();
        assert_eq!(r.rows.len(), 2);
        assert!(r.rows[1].is_ok());
        if !r.rows[0].is_ok() {
            assert!(r.rows[0].status.starts_with("failed"));
            assert_eq!(r.aggregate[0].runs, 0);
            assert_eq!(r.aggregate[0].failed, 1);
        }
    }

    #[test]
    fn nll_of_trained_vb_is_near_exact() {
        let data = generate_dataset(2, 100, 4).unwrap();
        let cfg = TrainConfig { max_epochs: 20_000, ..crate::bench::gaussian_train_defaults() };
        let m = MethodSpec::vb();
        let (est, r) = train_gaussian(&m, &data, GaussianInit::Standard, &cfg).unwrap();
        let exact = -crate::model::gaussian_exact_log_marginal(&est, &data).unwrap();
        let nll = gaussian_nll(&m, &data, &r.params, 500, 0).unwrap();
        assert!((nll - exact).abs() < 0.05, "{nll} vs {exact}");
        assert!(gaussian_nll(&m, &data, &r.params[1..], 10, 0).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let spec = ExperimentSpec { out_dir: Some(dir.path().to_path_buf()), runs: 2, ..tiny_spec() };
        let r = run_experiment(&spec).unwrap();
        assert_eq!(read_results_csv(dir.path().join("results.csv")).unwrap(), r.rows);
        let agg = read_aggregate_csv(dir.path().join("aggregate.csv")).unwrap();
        assert_eq!(agg.len(), 1);
        assert!((agg[0].mean_sq_error - r.aggregate[0].mean_sq_error).abs() <= 1e-12 * agg[0].mean_sq_error.abs());
        assert!(dir.path().join("metadata.txt").exists());
    }
}
