//! Performance profiles over function-evaluation counts.
//!
//! For each trial, every solver's cost `M` is the first cumulative
//! evaluation count at which its recorded value reaches the threshold. The
//! ratio `τ = M / min_solvers M` is taken within the trial; a solver's curve
//! `ρ(τ)` is the fraction of its trials with ratio at most `τ`. Unsuccessful
//! trials have ratio `∞` and stay in the denominator.

use std::collections::BTreeMap;

use crate::bench::experiment::ThresholdRule;
use crate::error::{Error, Result};
use crate::trace::RunTrace;

/// One solver's outcome on one trial.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialOutcome {
    pub solver: String,
    pub trial: u64,
    /// Evaluations to reach the threshold, `None` if never reached.
    pub evals: Option<u64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverProfile {
    pub solver: String,
    /// Per-trial ratios in trial order; `f64::INFINITY` for failures.
    pub ratios: Vec<f64>,
    /// Step points `(τ, ρ(τ))` at each distinct finite ratio.
    pub points: Vec<(f64, f64)>,
}

impl SolverProfile {
    pub fn rho(&self, tau: f64) -> f64 {
        if self.ratios.is_empty() {
            return 0.0;
        }
        self.ratios.iter().filter(|&&r| r <= tau).count() as f64 / self.ratios.len() as f64
    }

    /// `ρ(∞)`: fraction of trials that ever reached the threshold.
    pub fn success_fraction(&self) -> f64 {
        self.rho(f64::MAX)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PerformanceProfile {
    pub solvers: Vec<SolverProfile>,
}

impl PerformanceProfile {
    pub fn solver(&self, name: &str) -> Option<&SolverProfile> {
        self.solvers.iter().find(|s| s.solver == name)
    }

    /// CSV with header `solver,tau,rho`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("solver,tau,rho\n");
        for s in &self.solvers {
            for (tau, rho) in &s.points {
                out.push_str(&format!("{},{},{}\n", s.solver, tau, rho));
            }
        }
        out
    }
}

/// Builds the profile from raw outcomes. Solvers appear in first-seen order.
/// A zero evaluation count (threshold met at the start) is treated as one
/// evaluation so ratios stay finite.
pub fn profile_from_outcomes(outcomes: &[TrialOutcome], threshold_label: &str) -> Result<PerformanceProfile> {
    if !outcomes.iter().any(|o| o.evals.is_some()) {
        return Err(Error::NoSuccess { threshold: threshold_label.to_string() });
    }
    let mut best: BTreeMap<u64, u64> = BTreeMap::new();
    for o in outcomes {
        if let Some(m) = o.evals {
            let m = m.max(1);
            best.entry(o.trial).and_modify(|b| *b = (*b).min(m)).or_insert(m);
        }
    }

    let mut order: Vec<&str> = Vec::new();
    for o in outcomes {
        if !order.contains(&o.solver.as_str()) {
            order.push(&o.solver);
        }
    }

    let solvers = order
        .into_iter()
        .map(|name| {
            let ratios: Vec<f64> = outcomes
                .iter()
                .filter(|o| o.solver == name)
                .map(|o| match (o.evals, best.get(&o.trial)) {
                    (Some(m), Some(&b)) => m.max(1) as f64 / b as f64,
                    _ => f64::INFINITY,
                })
                .collect();
            let mut finite: Vec<f64> = ratios.iter().copied().filter(|r| r.is_finite()).collect();
            finite.sort_by(f64::total_cmp);
            finite.dedup();
            let n = ratios.len() as f64;
            let points = finite
                .into_iter()
                .map(|tau| (tau, ratios.iter().filter(|&&r| r <= tau).count() as f64 / n))
                .collect();
            SolverProfile { solver: name.to_string(), ratios, points }
        })
        .collect();
    Ok(PerformanceProfile { solvers })
}

/// Per-trace outcome against a threshold derived from the trace's own
/// starting value (its first entry).
pub fn outcomes_from_traces(
    traces: &[RunTrace],
    rule: &ThresholdRule,
    f_star: Option<f64>,
) -> Result<Vec<TrialOutcome>> {
    rule.validate(f_star)?;
    traces
        .iter()
        .map(|t| {
            let evals = match t.entries.first() {
                Some(first) => t.evals_to_reach(rule.threshold(first.f, f_star)?),
                None => None,
            };
            Ok(TrialOutcome { solver: t.solver.clone(), trial: t.trial, evals })
        })
        .collect()
}

pub fn performance_profile(
    traces: &[RunTrace],
    rule: &ThresholdRule,
    f_star: Option<f64>,
) -> Result<PerformanceProfile> {
    let outcomes = outcomes_from_traces(traces, rule, f_star)?;
    profile_from_outcomes(&outcomes, &rule.to_string())
}
