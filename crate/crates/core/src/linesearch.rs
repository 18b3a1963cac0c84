//! Step-size rules and the Armijo backtracking search shared by all solvers.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};
use crate::problems::Objective;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmijoParams {
    pub c1: f64,
    pub shrink: f64,
    pub alpha_init: f64,
    pub max_backtracks: usize,
}

impl Default for ArmijoParams {
    fn default() -> Self {
        Self { c1: 1e-4, shrink: 0.5, alpha_init: 1.0, max_backtracks: 60 }
    }
}

impl ArmijoParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.c1 > 0.0 && self.c1 < 1.0) {
            return config(format!("armijo: c1 must lie in (0,1), got {}", self.c1));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return config(format!("armijo: shrink must lie in (0,1), got {}", self.shrink));
        }
        if !(self.alpha_init > 0.0 && self.alpha_init.is_finite()) {
            return config(format!("armijo: alpha_init must be positive, got {}", self.alpha_init));
        }
        if self.max_backtracks == 0 {
            return config("armijo: max_backtracks must be at least 1");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepRule {
    Fixed(f64),
    /// The solver's analytic step from the objective's Lipschitz constant.
    Theoretical,
    Armijo(ArmijoParams),
}

impl StepRule {
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Fixed(alpha) if !(*alpha > 0.0 && alpha.is_finite()) => {
                config(format!("fixed step must be positive, got {alpha}"))
            }
            Self::Armijo(p) => p.validate(),
            _ => Ok(()),
        }
    }
}

/// Accepts `fixed:<alpha>`, `theory`, `armijo` or `armijo:<alpha_init>`.
impl FromStr for StepRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (s, None),
        };
        let number = |a: &str| {
            a.parse::<f64>()
                .map_err(|_| Error::Config(format!("step rule '{s}': '{a}' is not a number")))
        };
        let rule = match (head, arg) {
            ("fixed", Some(a)) => Self::Fixed(number(a)?),
            ("theory" | "theoretical", None) => Self::Theoretical,
            ("armijo", None) => Self::Armijo(ArmijoParams::default()),
            ("armijo", Some(a)) => {
                Self::Armijo(ArmijoParams { alpha_init: number(a)?, ..ArmijoParams::default() })
            }
            _ => {
                return config(format!(
                    "unknown step rule '{s}' (expected fixed:<alpha> | theory | armijo[:<alpha_init>])"
                ))
            }
        };
        rule.validate()?;
        Ok(rule)
    }
}

impl fmt::Display for StepRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Fixed(a) => write!(f, "fixed:{a}"),
            Self::Theoretical => f.write_str("theory"),
            Self::Armijo(p) => write!(
                f,
                "armijo(c1={},shrink={},alpha_init={},max_backtracks={})",
                p.c1, p.shrink, p.alpha_init, p.max_backtracks
            ),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum LineSearchOutcome {
    Accepted { alpha: f64, point: DVector<f64>, value: f64 },
    Failed,
    /// The evaluation budget ran out before a step was accepted.
    OutOfBudget,
}

/// Backtracks along `x − α·direction` from `alpha_init` until
/// `f(x − α·direction) ≤ fx − c1·α·slope`, where `slope` estimates the
/// decrease rate `∇f(x)ᵀdirection`. Every trial point is charged; at most
/// `budget` evaluations are spent.
pub fn armijo_backtrack(
    obj: &Objective,
    x: &DVector<f64>,
    fx: f64,
    direction: &DVector<f64>,
    slope: f64,
    params: &ArmijoParams,
    budget: u64,
) -> Result<LineSearchOutcome> {
    let mut alpha = params.alpha_init;
    for spent in 0..=params.max_backtracks as u64 {
        if spent >= budget {
            return Ok(LineSearchOutcome::OutOfBudget);
        }
        let mut trial = x.clone();
        trial.axpy(-alpha, direction, 1.0);
        let value = obj.evaluate(&trial)?;
        // NaN trial values fail the comparison and trigger a backtrack.
        if value <= fx - params.c1 * alpha * slope {
            return Ok(LineSearchOutcome::Accepted { alpha, point: trial, value });
        }
        alpha *= params.shrink;
    }
    Ok(LineSearchOutcome::Failed)
}
