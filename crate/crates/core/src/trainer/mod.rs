//! Stochastic gradient ascent on ELBO estimators.
//!
//! An [`Objective`] turns a flat parameter vector into one-draw ELBO estimates
//! and their gradients for individual training items. [`train`] averages them
//! over minibatches, applies an [`OptimizerState`] update, records a
//! [`LossTrace`] and optionally stops early on a held-out split.

mod checkpoint;
mod objectives;
mod optim;

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::error::{HviError, Result};
use crate::math::all_finite;
use crate::rng::{stream, StreamRng};

pub use checkpoint::{Checkpoint, CHECKPOINT_MAGIC};
pub use objectives::{
    BernoulliVae, GaussianHvae, GaussianInit, GaussianNf, GaussianObjective, GaussianVb,
};
pub use optim::{
    adamax_step, rmsprop_step, OptimizerKind, OptimizerState, ADAMAX_BETA1, ADAMAX_BETA2,
    RMSPROP_DECAY, STABILIZER,
};

/// Trainable ELBO objective over a fixed set of training items.
pub trait Objective: Sync {
    fn num_params(&self) -> usize;

    /// Number of independent items (rows for per-datapoint latents, 1 for a
    /// single global latent).
    fn num_items(&self) -> usize;

    fn initial_params(&self) -> Vec<f64>;

    /// One-draw ELBO estimate for `item` and its gradient with respect to the
    /// flat parameters.
    fn draw(&self, params: &[f64], item: usize, rng: &mut StreamRng) -> Result<(f64, Vec<f64>)>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Items per minibatch `n_B`.
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping; `None` never
    /// stops early.
    pub patience: Option<usize>,
    pub lr: f64,
    pub optimizer: OptimizerKind,
    pub seed: u64,
    /// Fraction of items held out for validation. Ignored when there is only
    /// one item.
    pub val_fraction: f64,
    /// Monte-Carlo draws per item and step.
    pub samples: usize,
    /// Stop when no parameter moves by more than this relative amount.
    pub rel_tol: Option<f64>,
    /// Fraction of the final epochs whose iterates are averaged into the
    /// returned parameters; 0 returns the last iterate.
    pub tail_average: f64,
    /// Evaluate minibatch items on the rayon pool. Results are identical
    /// either way because every item draws from its own stream and the
    /// reduction order is fixed.
    pub parallel: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 100,
            max_epochs: 20_000,
            patience: None,
            lr: 1e-3,
            optimizer: OptimizerKind::RmsProp,
            seed: 0,
            val_fraction: 0.1,
            samples: 1,
            rel_tol: Some(1e-8),
            tail_average: 0.0,
            parallel: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(HviError::Config("minibatch size must be at least 1".into()));
        }
        if self.samples == 0 {
            return Err(HviError::Config("need at least one Monte-Carlo sample per step".into()));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(HviError::Config(format!("learning rate must be non-negative, got {}", self.lr)));
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return Err(HviError::Config(format!("validation fraction must lie in [0, 1), got {}", self.val_fraction)));
        }
        if !(0.0..1.0).contains(&self.tail_average) {
            return Err(HviError::Config(format!("tail-average fraction must lie in [0, 1), got {}", self.tail_average)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub epoch: usize,
    pub train_elbo: f64,
    pub val_elbo: f64,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LossTrace {
    pub rows: Vec<TraceRow>,
}

impl LossTrace {
    pub fn val_elbos(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.val_elbo).collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["epoch", "train_elbo", "val_elbo", "wall_ms"])?;
        for r in &self.rows {
            out.write_record(&[
                r.epoch.to_string(),
                r.train_elbo.to_string(),
                r.val_elbo.to_string(),
                format!("{:.3}", r.wall_ms),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StopDecision {
    pub stop: bool,
    /// 1-based epoch with the best validation ELBO so far.
    pub best_epoch: usize,
}

/// Early-stopping rule on a validation ELBO trace (higher is better, epochs
/// 1-based): stop once the best value is `max(patience, 1)` epochs old.
/// With patience 100 a flat trace stops at epoch 101; with patience 0 it stops
/// after the first epoch that does not improve.
pub fn early_stop(val_elbos: &[f64], patience: usize) -> StopDecision {
    let mut best = f64::NEG_INFINITY;
    let mut best_epoch = 0;
    for (i, v) in val_elbos.iter().enumerate() {
        if *v > best || best_epoch == 0 {
            best = *v;
            best_epoch = i + 1;
        }
    }
    let since = val_elbos.len() - best_epoch.min(val_elbos.len());
    StopDecision { stop: best_epoch > 0 && since >= patience.max(1), best_epoch }
}

#[derive(Debug, Clone)]
pub struct TrainResult {
    /// Returned estimate: the best-validation iterate under early stopping,
    /// otherwise the last (or tail-averaged) iterate.
    pub params: Vec<f64>,
    pub last_params: Vec<f64>,
    pub trace: LossTrace,
    pub epochs: usize,
    pub best_epoch: usize,
    pub stopped_early: bool,
    pub converged: bool,
    pub optimizer: OptimizerState,
}

const SHUFFLE_STREAM: u64 = 0x5348_5546;
const TRAIN_STREAM: u64 = 0x5452_4149;
const VAL_STREAM: u64 = 0x5641_4c49;

fn snapshot(params: &[f64]) -> String {
    let head: Vec<String> = params.iter().take(8).map(|p| format!("{p:.6e}")).collect();
    let more = if params.len() > 8 { format!(", … ({} total)", params.len()) } else { String::new() };
    format!("[{}{more}]", head.join(", "))
}

/// `(Σ values, Σ gradients)` over `items`, reduced in item order.
fn evaluate_batch<O: Objective + ?Sized>(
    objective: &O,
    params: &[f64],
    items: &[usize],
    cfg: &TrainConfig,
    stream_ids: impl Fn(usize, usize) -> Vec<u64> + Sync,
) -> Result<(f64, Vec<f64>)> {
    let one = |item: usize| -> Result<(f64, Vec<f64>)> {
        let mut value = 0.0;
        let mut grad = vec![0.0; objective.num_params()];
        for s in 0..cfg.samples {
            let mut rng = stream(cfg.seed, &stream_ids(item, s));
            let (v, g) = objective.draw(params, item, &mut rng)?;
            value += v;
            grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
        }
        Ok((value, grad))
    };
    let parts: Vec<Result<(f64, Vec<f64>)>> = if cfg.parallel {
        items.par_iter().map(|&i| one(i)).collect()
    } else {
        items.iter().map(|&i| one(i)).collect()
    };
    let mut value = 0.0;
    let mut grad = vec![0.0; objective.num_params()];
    for p in parts {
        let (v, g) = p?;
        value += v;
        grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
    }
    Ok((value, grad))
}

/// Runs minibatch stochastic gradient ascent from `objective.initial_params()`.
pub fn train<O: Objective + ?Sized>(objective: &O, cfg: &TrainConfig) -> Result<TrainResult> {
    train_from(objective, cfg, objective.initial_params())
}

pub fn train_from<O: Objective + ?Sized>(objective: &O, cfg: &TrainConfig, init: Vec<f64>) -> Result<TrainResult> {
    cfg.validate()?;
    let n_items = objective.num_items();
    if n_items == 0 {
        return Err(HviError::Config("nothing to train on".into()));
    }
    crate::error::check_len("initial parameters", init.len(), objective.num_params())?;

    let mut order: Vec<usize> = (0..n_items).collect();
    order.shuffle(&mut stream(cfg.seed, &[SHUFFLE_STREAM]));
    let n_val = if n_items > 1 { ((n_items as f64) * cfg.val_fraction).round() as usize } else { 0 };
    let n_val = n_val.min(n_items - 1);
    let (val_items, train_items) = order.split_at(n_val);
    let (val_items, mut train_items) = (val_items.to_vec(), train_items.to_vec());

    let mut params = init;
    let mut opt = OptimizerState::new(cfg.optimizer, cfg.lr, params.len());
    let mut trace = LossTrace::default();
    let mut best_params = params.clone();
    let mut best_val = f64::NEG_INFINITY;
    let mut best_epoch = 0;
    let mut stopped_early = false;
    let mut converged = false;
    let avg_start = cfg.max_epochs - ((cfg.max_epochs as f64) * cfg.tail_average).floor() as usize;
    let mut avg_sum = vec![0.0; params.len()];
    let mut avg_count = 0usize;
    let start = Instant::now();

    for epoch in 1..=cfg.max_epochs {
        train_items.shuffle(&mut stream(cfg.seed, &[SHUFFLE_STREAM, epoch as u64]));
        let mut epoch_value = 0.0;
        let mut max_rel_change: f64 = 0.0;
        for (b, batch) in train_items.chunks(cfg.batch_size).enumerate() {
            let (value, mut grad) = evaluate_batch(objective, &params, batch, cfg, |item, s| {
                vec![TRAIN_STREAM, epoch as u64, b as u64, item as u64, s as u64]
            })?;
            let denom = (batch.len() * cfg.samples) as f64;
            grad.iter_mut().for_each(|g| *g /= denom);
            if !(value.is_finite() && all_finite(&grad)) {
                return Err(HviError::NonFiniteLoss { epoch, snapshot: snapshot(&params) });
            }
            epoch_value += value;
            let before = params.clone();
            opt.update(&mut params, &grad)?;
            if !all_finite(&params) {
                return Err(HviError::NonFiniteLoss { epoch, snapshot: snapshot(&before) });
            }
            for (a, b) in params.iter().zip(&before) {
                max_rel_change = max_rel_change.max((a - b).abs() / b.abs().max(1.0));
            }
        }
        let train_elbo = epoch_value / (train_items.len() * cfg.samples) as f64;
        let val_elbo = if val_items.is_empty() {
            train_elbo
        } else {
            let (v, _) = evaluate_batch(objective, &params, &val_items, cfg, |item, s| {
                vec![VAL_STREAM, epoch as u64, item as u64, s as u64]
            })?;
            v / (val_items.len() * cfg.samples) as f64
        };
        if !val_elbo.is_finite() {
            return Err(HviError::NonFiniteLoss { epoch, snapshot: snapshot(&params) });
        }
        trace.rows.push(TraceRow { epoch, train_elbo, val_elbo, wall_ms: start.elapsed().as_secs_f64() * 1e3 });

        if val_elbo > best_val {
            best_val = val_elbo;
            best_epoch = epoch;
            best_params.clone_from(&params);
        }
        if epoch > avg_start {
            avg_sum.iter_mut().zip(&params).for_each(|(s, p)| *s += p);
            avg_count += 1;
        }
        if let Some(patience) = cfg.patience {
            if early_stop(&trace.val_elbos(), patience).stop {
                stopped_early = true;
                break;
            }
        }
        if cfg.rel_tol.is_some_and(|tol| cfg.lr > 0.0 && max_rel_change < tol) {
            converged = true;
            break;
        }
    }

    let epochs = trace.rows.len();
    let returned = if cfg.patience.is_some() {
        best_params
    } else if avg_count > 0 && !converged {
        avg_sum.iter().map(|s| s / avg_count as f64).collect()
    } else {
        params.clone()
    };
    Ok(TrainResult {
        params: returned,
        last_params: params,
        trace,
        epochs,
        best_epoch,
        stopped_early,
        converged,
        optimizer: opt,
    })
}
