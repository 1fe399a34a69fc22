//! Exact penalty objective `P(y) = J(y) + λ‖g(y)‖₁`.

use serde::{Deserialize, Serialize};

use crate::error::{Result, ScvxError};
use crate::problem::OptimalControlProblem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PenaltyMode {
    /// `g(y) = 0` kept as equality rows; needs affine dynamics.
    Equality,
    /// `g(y) ≥ 0` linearized like any other constraint, `λ‖g‖₁` in the cost.
    Penalty,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyConfig {
    pub lambda: f64,
    pub mode: PenaltyMode,
}

impl Default for PenaltyConfig {
    fn default() -> Self {
        Self {
            lambda: 0.0,
            mode: PenaltyMode::Equality,
        }
    }
}

impl PenaltyConfig {
    pub fn equality() -> Self {
        Self::default()
    }

    pub fn penalty(lambda: f64) -> Self {
        Self {
            lambda,
            mode: PenaltyMode::Penalty,
        }
    }

    pub fn validate(&self, problem: &OptimalControlProblem) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(ScvxError::InvalidProblem(format!(
                "penalty weight must be finite and ≥ 0, got {}",
                self.lambda
            )));
        }
        if self.mode == PenaltyMode::Equality && !problem.dynamics_affine() {
            return Err(ScvxError::Unsupported(
                "equality mode needs affine dynamics; use penalty mode".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "kebab-case")]
pub enum WeightCheck {
    Valid,
    Invalid { required_lambda: f64 },
    NotApplicable,
}

/// `J(y) + λ Σ |g_j(y)|`.
pub fn penalty_value(problem: &OptimalControlProblem, config: &PenaltyConfig, y: &[f64]) -> Result<f64> {
    let j = problem.objective_value(y);
    if config.lambda == 0.0 {
        return Ok(j);
    }
    let g1: f64 = problem.eval_g(y)?.iter().map(|v| v.abs()).sum();
    Ok(j + config.lambda * g1)
}

/// `λ ≥ ‖μ‖∞` for the multipliers of the relaxed dynamics rows.
pub fn validate_penalty_weight(config: &PenaltyConfig, multipliers: &[f64]) -> WeightCheck {
    if config.mode == PenaltyMode::Equality {
        return WeightCheck::NotApplicable;
    }
    let required = multipliers.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    if config.lambda >= required {
        WeightCheck::Valid
    } else {
        WeightCheck::Invalid {
            required_lambda: required,
        }
    }
}
