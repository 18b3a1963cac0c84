//! Shared run loop bookkeeping: budget, trace recording and termination.

use nalgebra::DVector;

use crate::error::{config, Result};
use crate::linesearch::{armijo_backtrack, ArmijoParams, LineSearchOutcome, StepRule};
use crate::problems::Objective;
use crate::trace::{RunTrace, TerminalStatus, TraceEntry};

/// A step rule with the theoretical step already turned into a number.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) enum ResolvedStep {
    Fixed(f64),
    Armijo(ArmijoParams),
}

impl ResolvedStep {
    pub(crate) fn resolve(rule: &StepRule, theoretical: impl FnOnce() -> Result<f64>) -> Result<Self> {
        rule.validate()?;
        Ok(match rule {
            StepRule::Fixed(alpha) => Self::Fixed(*alpha),
            StepRule::Theoretical => Self::Fixed(theoretical()?),
            StepRule::Armijo(p) => Self::Armijo(*p),
        })
    }
}

pub(crate) fn lipschitz_of(obj: &Objective) -> Result<f64> {
    match obj.lipschitz_constant() {
        Some(l) if l > 0.0 => Ok(l),
        _ => config(format!(
            "theoretical step needs a known Lipschitz constant, objective '{}' has none",
            obj.name()
        )),
    }
}

/// Outcome of a single descent step.
#[derive(Clone, Debug, PartialEq)]
pub enum StepResult {
    Taken(StepTaken),
    /// No step was taken; the run should end with this status.
    Stopped(TerminalStatus),
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepTaken {
    pub x: DVector<f64>,
    pub f: f64,
    pub step: f64,
    pub dirnorm: f64,
}

/// Moves to `x − α·direction`. `slope` is the estimated `∇f(x)ᵀdirection`
/// used by the sufficient-decrease test.
pub(crate) fn descend(
    obj: &Objective,
    x: &DVector<f64>,
    fx: f64,
    direction: &DVector<f64>,
    slope: f64,
    step: &ResolvedStep,
    budget: u64,
) -> Result<StepResult> {
    let dirnorm = direction.norm();
    match step {
        ResolvedStep::Fixed(alpha) => {
            let mut next = x.clone();
            next.axpy(-alpha, direction, 1.0);
            let f = obj.evaluate_unmetered(&next)?;
            Ok(StepResult::Taken(StepTaken { x: next, f, step: *alpha, dirnorm }))
        }
        ResolvedStep::Armijo(params) => {
            match armijo_backtrack(obj, x, fx, direction, slope, params, budget)? {
                LineSearchOutcome::Accepted { alpha, point, value } => {
                    Ok(StepResult::Taken(StepTaken { x: point, f: value, step: alpha, dirnorm }))
                }
                LineSearchOutcome::Failed => Ok(StepResult::Stopped(TerminalStatus::LineSearchFailed)),
                LineSearchOutcome::OutOfBudget => {
                    Ok(StepResult::Stopped(TerminalStatus::BudgetExhausted))
                }
            }
        }
    }
}

pub(crate) struct Runner<'a> {
    pub obj: &'a Objective,
    start: u64,
    budget: u64,
    max_iters: usize,
    target: Option<f64>,
    pub x: DVector<f64>,
    pub fx: f64,
    pub iters: usize,
    trace: RunTrace,
}

impl<'a> Runner<'a> {
    pub(crate) fn new(
        obj: &'a Objective,
        x0: &DVector<f64>,
        solver: &str,
        budget: u64,
        max_iters: usize,
        target: Option<f64>,
    ) -> Result<Self> {
        if x0.len() != obj.dim() {
            return config(format!(
                "starting point has dimension {} but objective expects {}",
                x0.len(),
                obj.dim()
            ));
        }
        if budget == 0 {
            return config("evaluation budget must be positive");
        }
        if max_iters == 0 {
            return config("max_iters must be positive");
        }
        let fx = obj.evaluate_unmetered(x0)?;
        let mut trace = RunTrace::new(solver);
        trace.entries.push(TraceEntry { iter: 0, evals: 0, f: fx, step: 0.0, dirnorm: 0.0 });
        Ok(Self {
            obj,
            start: obj.eval_count(),
            budget,
            max_iters,
            target,
            x: x0.clone(),
            fx,
            iters: 0,
            trace,
        })
    }

    pub(crate) fn used(&self) -> u64 {
        self.obj.eval_count() - self.start
    }

    pub(crate) fn remaining(&self) -> u64 {
        self.budget.saturating_sub(self.used())
    }

    pub(crate) fn can_afford(&self, evals: u64) -> bool {
        evals <= self.remaining()
    }

    /// Status that ends the run before the next step, if any.
    pub(crate) fn pending_status(&self) -> Option<TerminalStatus> {
        if self.target.is_some_and(|t| self.fx <= t) {
            Some(TerminalStatus::TargetReached)
        } else if self.iters >= self.max_iters {
            Some(TerminalStatus::MaxIters)
        } else if self.remaining() == 0 {
            Some(TerminalStatus::BudgetExhausted)
        } else {
            None
        }
    }

    pub(crate) fn record(&mut self, step: StepTaken) {
        self.iters += 1;
        self.x = step.x;
        self.fx = step.f;
        self.trace.entries.push(TraceEntry {
            iter: self.iters,
            evals: self.used(),
            f: self.fx,
            step: step.step,
            dirnorm: step.dirnorm,
        });
    }

    pub(crate) fn finish(mut self, status: TerminalStatus) -> RunTrace {
        self.trace.status = status;
        self.trace
    }
}
