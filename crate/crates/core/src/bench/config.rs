//! Flat `key = value` experiment files.
//!
//! ```text
//! # experiment-wide keys
//! problem   = nesterov:l=8,r=10,d=101
//! trials    = 20
//! x0        = zeros
//! threshold = fraction:0.95
//! seed      = 1
//!
//! [ssd-3]
//! solver = ssd
//! ell    = 3
//! step   = armijo
//! budget = 20000
//! ```
//!
//! Each `[name]` section defines one solver; its keys are the same as the
//! command-line solver flags. `#` starts a comment.

use crate::bench::experiment::{ExperimentSpec, ProblemSpec, SolverKind, SolverSpec, ThresholdRule, X0Sampler};
use crate::error::{Error, Result};

pub fn parse_experiment(text: &str) -> Result<ExperimentSpec> {
    let mut problem: Option<ProblemSpec> = None;
    let mut trials = 1usize;
    let mut x0 = X0Sampler::Zeros;
    let mut threshold = ThresholdRule::Fraction(0.95);
    let mut base_seed = 0u64;
    // (spec, line of the section header, saw a `solver` key)
    let mut solvers: Vec<(SolverSpec, usize, bool)> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let err = |message: String| Error::Parse { line: line_no, message };
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| err("unterminated section header".into()))?
                .trim();
            if name.is_empty() {
                return Err(err("empty section name".into()));
            }
            solvers.push((SolverSpec::new(name, SolverKind::Ssd), line_no, false));
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| err(format!("expected key = value, got '{line}'")))?;
        let wrap = |e: Error| err(e.to_string());
        match solvers.last_mut() {
            Some((spec, _, has_kind)) => {
                spec.set(key, value).map_err(wrap)?;
                if key == "solver" {
                    *has_kind = true;
                }
            }
            None => match key {
                "problem" => problem = Some(value.parse().map_err(wrap)?),
                "trials" => {
                    trials = value.parse().map_err(|_| err(format!("bad trials '{value}'")))?
                }
                "x0" => x0 = value.parse().map_err(wrap)?,
                "threshold" => threshold = value.parse().map_err(wrap)?,
                "seed" => base_seed = value.parse().map_err(|_| err(format!("bad seed '{value}'")))?,
                other => return Err(err(format!("unknown experiment key '{other}'"))),
            },
        }
    }

    let problem = problem.ok_or_else(|| Error::Parse { line: 0, message: "missing 'problem'".into() })?;
    let mut specs = Vec::with_capacity(solvers.len());
    for (spec, line, has_kind) in solvers {
        if !has_kind {
            return Err(Error::Parse { line, message: format!("section [{}] has no 'solver' key", spec.name) });
        }
        specs.push(spec);
    }
    let spec = ExperimentSpec { problem, solvers: specs, trials, x0, threshold, base_seed };
    spec.validate()?;
    Ok(spec)
}
