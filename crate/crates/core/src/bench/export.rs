//! Trace persistence.
//!
//! CSV has exactly the columns `solver,trial,iter,evals,f,step,dirnorm`, one
//! row per entry. Floats are written in shortest round-trip form, so import
//! reproduces every entry bit for bit. The CSV layout carries no terminal
//! status; traces read back from CSV report `max_iters`. JSON mirrors
//! [`RunTrace`] in full.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{config, Error, Result};
use crate::trace::{RunTrace, TerminalStatus, TraceEntry};

pub const CSV_HEADER: &str = "solver,trial,iter,evals,f,step,dirnorm";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TraceFormat {
    Csv,
    Json,
}

impl FromStr for TraceFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => config(format!("unknown trace format '{other}' (expected csv | json)")),
        }
    }
}

impl fmt::Display for TraceFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Csv => "csv",
            Self::Json => "json",
        })
    }
}

pub fn traces_to_csv(traces: &[RunTrace]) -> String {
    let mut out = String::with_capacity(64 * (1 + traces.iter().map(|t| t.entries.len()).sum::<usize>()));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for t in traces {
        for e in &t.entries {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                t.solver, t.trial, e.iter, e.evals, e.f, e.step, e.dirnorm
            ));
        }
    }
    out
}

/// Parses CSV produced by [`traces_to_csv`]. Consecutive rows sharing
/// `(solver, trial)` form one trace.
pub fn traces_from_csv(text: &str) -> Result<Vec<RunTrace>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == CSV_HEADER => {}
        _ => return Err(Error::Parse { line: 1, message: format!("expected header '{CSV_HEADER}'") }),
    }
    let mut traces: Vec<RunTrace> = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(Error::Parse { line: line_no, message: format!("expected 7 fields, got {}", fields.len()) });
        }
        let bad = |what: &str| Error::Parse { line: line_no, message: format!("bad {what}") };
        let trial: u64 = fields[1].parse().map_err(|_| bad("trial"))?;
        let entry = TraceEntry {
            iter: fields[2].parse().map_err(|_| bad("iter"))?,
            evals: fields[3].parse().map_err(|_| bad("evals"))?,
            f: fields[4].parse().map_err(|_| bad("f"))?,
            step: fields[5].parse().map_err(|_| bad("step"))?,
            dirnorm: fields[6].parse().map_err(|_| bad("dirnorm"))?,
        };
        match traces.last_mut() {
            Some(t) if t.solver == fields[0] && t.trial == trial => t.entries.push(entry),
            _ => {
                let mut t = RunTrace::new(fields[0]);
                t.trial = trial;
                t.status = TerminalStatus::MaxIters;
                t.entries.push(entry);
                traces.push(t);
            }
        }
    }
    Ok(traces)
}

pub fn export_traces(traces: &[RunTrace], path: &Path, format: TraceFormat) -> Result<()> {
    let body = match format {
        TraceFormat::Csv => traces_to_csv(traces),
        TraceFormat::Json => {
            let mut s = serde_json::to_string_pretty(traces)?;
            s.push('\n');
            s
        }
    };
    fs::write(path, body)?;
    Ok(())
}

pub fn import_traces(path: &Path, format: TraceFormat) -> Result<Vec<RunTrace>> {
    let text = fs::read_to_string(path)?;
    match format {
        TraceFormat::Csv => traces_from_csv(&text),
        TraceFormat::Json => Ok(serde_json::from_str(&text)?),
    }
}
