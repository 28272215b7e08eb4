//! First-order ascent rules. Both maximise: parameters move along `+grad`.

use crate::error::{check_len, HviError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    RmsProp,
    Adamax,
}

impl std::str::FromStr for OptimizerKind {
    type Err = HviError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rmsprop" => Ok(OptimizerKind::RmsProp),
            "adamax" => Ok(OptimizerKind::Adamax),
            other => Err(HviError::Config(format!("unknown optimizer '{other}'"))),
        }
    }
}

pub const RMSPROP_DECAY: f64 = 0.9;
pub const ADAMAX_BETA1: f64 = 0.9;
pub const ADAMAX_BETA2: f64 = 0.999;
pub const STABILIZER: f64 = 1e-8;

/// Per-parameter accumulators. For RMSProp `second` is the EMA of squared
/// gradients and `first` is unused; for Adamax `first` is the first-moment
/// EMA and `second` the infinity-norm accumulator.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub kind: OptimizerKind,
    pub lr: f64,
    pub step: u64,
    pub first: Vec<f64>,
    pub second: Vec<f64>,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, lr: f64, num_params: usize) -> Self {
        Self { kind, lr, step: 0, first: vec![0.0; num_params], second: vec![0.0; num_params] }
    }

    pub fn rmsprop(lr: f64, num_params: usize) -> Self {
        Self::new(OptimizerKind::RmsProp, lr, num_params)
    }

    pub fn adamax(lr: f64, num_params: usize) -> Self {
        Self::new(OptimizerKind::Adamax, lr, num_params)
    }

    pub fn update(&mut self, params: &mut [f64], grad: &[f64]) -> Result<()> {
        match self.kind {
            OptimizerKind::RmsProp => rmsprop_step(self, params, grad),
            OptimizerKind::Adamax => adamax_step(self, params, grad),
        }
    }
}

fn check_shapes(state: &OptimizerState, params: &[f64], grad: &[f64]) -> Result<()> {
    check_len("gradient", grad.len(), params.len())?;
    check_len("optimizer state", state.second.len(), params.len())?;
    check_len("optimizer state", state.first.len(), params.len())
}

/// `v ← 0.9 v + 0.1 g²`, `p ← p + lr g / (sqrt(v) + 1e-8)`.
pub fn rmsprop_step(state: &mut OptimizerState, params: &mut [f64], grad: &[f64]) -> Result<()> {
    check_shapes(state, params, grad)?;
    state.step += 1;
    for ((p, g), v) in params.iter_mut().zip(grad).zip(state.second.iter_mut()) {
        *v = RMSPROP_DECAY * *v + (1.0 - RMSPROP_DECAY) * g * g;
        *p += state.lr * g / (v.sqrt() + STABILIZER);
    }
    Ok(())
}

/// `m ← β₁ m + (1-β₁) g`, `u ← max(β₂ u, |g|)`,
/// `p ← p + lr / (1 - β₁ᵗ) · m / (u + 1e-8)`.
pub fn adamax_step(state: &mut OptimizerState, params: &mut [f64], grad: &[f64]) -> Result<()> {
    check_shapes(state, params, grad)?;
    state.step += 1;
    let rate = state.lr / (1.0 - ADAMAX_BETA1.powi(state.step.min(i32::MAX as u64) as i32));
    for (((p, g), m), u) in params.iter_mut().zip(grad).zip(state.first.iter_mut()).zip(state.second.iter_mut()) {
        *m = ADAMAX_BETA1 * *m + (1.0 - ADAMAX_BETA1) * g;
        *u = (ADAMAX_BETA2 * *u).max(g.abs());
        *p += rate * *m / (*u + STABILIZER);
    }
    Ok(())
}
