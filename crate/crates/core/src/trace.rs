//! Per-iteration run history.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iter: usize,
    /// Cumulative charged evaluations since the start of the run.
    pub evals: u64,
    pub f: f64,
    pub step: f64,
    pub dirnorm: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalStatus {
    BudgetExhausted,
    TargetReached,
    MaxIters,
    LineSearchFailed,
    /// The run aborted with an error; the message is kept on the trace.
    Error,
}

impl TerminalStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::BudgetExhausted => "budget_exhausted",
            Self::TargetReached => "target_reached",
            Self::MaxIters => "max_iters",
            Self::LineSearchFailed => "line_search_failed",
            Self::Error => "error",
        }
    }
}

impl fmt::Display for TerminalStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TerminalStatus {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "budget_exhausted" => Ok(Self::BudgetExhausted),
            "target_reached" => Ok(Self::TargetReached),
            "max_iters" => Ok(Self::MaxIters),
            "line_search_failed" => Ok(Self::LineSearchFailed),
            "error" => Ok(Self::Error),
            other => config(format!("unknown terminal status '{other}'")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub solver: String,
    pub trial: u64,
    pub entries: Vec<TraceEntry>,
    pub status: TerminalStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl RunTrace {
    pub fn new(solver: impl Into<String>) -> Self {
        Self {
            solver: solver.into(),
            trial: 0,
            entries: Vec::new(),
            status: TerminalStatus::MaxIters,
            error: None,
        }
    }

    pub fn failed(solver: impl Into<String>, trial: u64, error: &Error) -> Self {
        Self {
            solver: solver.into(),
            trial,
            entries: Vec::new(),
            status: TerminalStatus::Error,
            error: Some(error.to_string()),
        }
    }

    pub fn last(&self) -> Option<&TraceEntry> {
        self.entries.last()
    }

    pub fn final_value(&self) -> Option<f64> {
        self.last().map(|e| e.f)
    }

    pub fn total_evals(&self) -> u64 {
        self.last().map_or(0, |e| e.evals)
    }

    /// First cumulative evaluation count at which the recorded value is at or
    /// below `threshold`.
    pub fn evals_to_reach(&self, threshold: f64) -> Option<u64> {
        self.entries.iter().find(|e| e.f <= threshold).map(|e| e.evals)
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries.iter().map(|e| e.f)
    }
}
