//! Smooth bijections between unconstrained reals and the flow's step sizes and
//! tempering parameters.

use crate::error::{check_len, HviError, Result};
use crate::flow::{FlowConfig, TemperingScheme};
use crate::math::{logit, sigmoid};

/// Closest representable inverse temperature below 1, so a saturated sigmoid
/// still yields a valid fixed schedule.
const BETA0_MAX: f64 = 1.0 - f64::EPSILON;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TemperingKind {
    None,
    Fixed,
    Free,
}

impl TemperingKind {
    pub fn of(scheme: &TemperingScheme) -> Self {
        match scheme {
            TemperingScheme::None => TemperingKind::None,
            TemperingScheme::Fixed { .. } => TemperingKind::Fixed,
            TemperingScheme::Free { .. } => TemperingKind::Free,
        }
    }

    /// Number of unconstrained tempering coordinates for a `steps`-step flow.
    pub fn num_raw(self, steps: usize) -> usize {
        match self {
            TemperingKind::None => 0,
            TemperingKind::Fixed => 1,
            TemperingKind::Free => steps,
        }
    }
}

/// Unconstrained flow parameters:
/// `ε_j = ξ σ(eps_raw_j)`, `β₀ = σ(raw)` (Fixed) or `α_k = σ(raw_k)` (Free),
/// with `σ` the logistic sigmoid.
#[derive(Debug, Clone, PartialEq)]
pub struct UnconstrainedParams {
    pub steps: usize,
    pub xi: f64,
    pub kind: TemperingKind,
    pub eps_raw: Vec<f64>,
    pub tempering_raw: Vec<f64>,
}

impl UnconstrainedParams {
    pub fn new(
        steps: usize,
        xi: f64,
        kind: TemperingKind,
        eps_raw: Vec<f64>,
        tempering_raw: Vec<f64>,
    ) -> Result<Self> {
        if !(xi > 0.0 && xi.is_finite()) {
            return Err(HviError::Domain(format!("step-size cap must be positive, got {xi}")));
        }
        check_len("tempering parameters", tempering_raw.len(), kind.num_raw(steps))?;
        Ok(Self { steps, xi, kind, eps_raw, tempering_raw })
    }

    pub fn dim(&self) -> usize {
        self.eps_raw.len()
    }

    pub fn num_params(&self) -> usize {
        self.eps_raw.len() + self.tempering_raw.len()
    }

    /// `[eps_raw, tempering_raw]`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.eps_raw.clone();
        v.extend_from_slice(&self.tempering_raw);
        v
    }

    pub fn set_from_slice(&mut self, v: &[f64]) -> Result<()> {
        check_len("flow parameters", v.len(), self.num_params())?;
        let (e, t) = v.split_at(self.eps_raw.len());
        self.eps_raw.copy_from_slice(e);
        self.tempering_raw.copy_from_slice(t);
        Ok(())
    }

    pub fn eps(&self) -> Vec<f64> {
        self.eps_raw.iter().map(|r| self.xi * sigmoid(*r)).collect()
    }

    /// `dε_j / d eps_raw_j = ε_j (1 - ε_j/ξ)`.
    pub fn eps_jacobian(&self) -> Vec<f64> {
        self.eps().iter().map(|e| e * (1.0 - e / self.xi)).collect()
    }

    /// Constrained tempering values: `[β₀]` (Fixed), `α_1..α_K` (Free), or
    /// nothing.
    pub fn tempering_values(&self) -> Vec<f64> {
        match self.kind {
            TemperingKind::None => vec![],
            TemperingKind::Fixed => vec![sigmoid(self.tempering_raw[0]).clamp(f64::MIN_POSITIVE, BETA0_MAX)],
            TemperingKind::Free => self.tempering_raw.iter().map(|r| sigmoid(*r)).collect(),
        }
    }

    /// Derivatives of [`Self::tempering_values`] with respect to their raw
    /// coordinates, `s (1 - s)` for each sigmoid.
    pub fn tempering_jacobian(&self) -> Vec<f64> {
        self.tempering_raw
            .iter()
            .map(|r| {
                let s = sigmoid(*r);
                s * (1.0 - s)
            })
            .collect()
    }

    pub fn constrain(&self) -> Result<FlowConfig> {
        let values = self.tempering_values();
        let tempering = match self.kind {
            TemperingKind::None => TemperingScheme::None,
            TemperingKind::Fixed => TemperingScheme::Fixed { beta0: values[0] },
            TemperingKind::Free => TemperingScheme::Free { alphas: values },
        };
        // a saturated step size sigmoid would land on the boundary
        let eps = self
            .eps()
            .into_iter()
            .map(|e| e.clamp(f64::MIN_POSITIVE, self.xi * BETA0_MAX))
            .collect();
        FlowConfig::new(self.steps, eps, tempering, self.xi)
    }

    pub fn unconstrain(config: &FlowConfig) -> Result<Self> {
        config.validate()?;
        let eps_raw = config.eps.iter().map(|e| logit(e / config.xi)).collect();
        let tempering_raw = match &config.tempering {
            TemperingScheme::None => vec![],
            TemperingScheme::Fixed { beta0 } => vec![logit(*beta0)],
            TemperingScheme::Free { alphas } => {
                if let Some(a) = alphas.iter().find(|a| **a >= 1.0) {
                    return Err(HviError::Domain(format!("alpha {a} has no unconstrained preimage")));
                }
                alphas.iter().map(|a| logit(*a)).collect()
            }
        };
        Ok(Self {
            steps: config.steps,
            xi: config.xi,
            kind: TemperingKind::of(&config.tempering),
            eps_raw,
            tempering_raw,
        })
    }
}
