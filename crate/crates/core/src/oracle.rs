//! Finite-difference estimates of sketched directional derivatives `Pᵀ∇f(x)`
//! and of full gradients.
//!
//! Cost model: a forward call charges `ℓ + 1` evaluations (the base value is
//! shared by all columns), a centered call charges `2ℓ`.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};
use crate::problems::Objective;
use crate::sketch::Sketch;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FdKind {
    Forward,
    Centered,
}

impl FromStr for FdKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "forward" => Ok(Self::Forward),
            "centered" | "central" => Ok(Self::Centered),
            other => config(format!("unknown fd scheme '{other}' (expected forward | centered)")),
        }
    }
}

impl fmt::Display for FdKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Forward => "forward",
            Self::Centered => "centered",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FdStep {
    Fixed(f64),
    /// Scale-aware step from [`default_step`].
    Relative,
}

impl FromStr for FdStep {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" || s == "relative" {
            return Ok(Self::Relative);
        }
        match s.parse::<f64>() {
            Ok(h) if h > 0.0 && h.is_finite() => Ok(Self::Fixed(h)),
            _ => config(format!("fd step must be 'auto' or a positive number, got '{s}'")),
        }
    }
}

impl fmt::Display for FdStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Fixed(h) => write!(f, "{h}"),
            Self::Relative => f.write_str("auto"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FdScheme {
    pub kind: FdKind,
    pub step: FdStep,
    /// Evaluate the probe points of one call on the rayon pool.
    pub parallel: bool,
}

impl Default for FdScheme {
    fn default() -> Self {
        Self::forward()
    }
}

impl FdScheme {
    pub fn forward() -> Self {
        Self { kind: FdKind::Forward, step: FdStep::Relative, parallel: false }
    }

    pub fn centered() -> Self {
        Self { kind: FdKind::Centered, step: FdStep::Relative, parallel: false }
    }

    pub fn with_step(mut self, step: FdStep) -> Self {
        self.step = step;
        self
    }

    pub fn with_parallel(mut self, parallel: bool) -> Self {
        self.parallel = parallel;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if let FdStep::Fixed(h) = self.step {
            if !(h > 0.0 && h.is_finite()) {
                return config(format!("fd step must be positive, got {h}"));
            }
        }
        Ok(())
    }

    pub fn step_at(&self, x: &DVector<f64>) -> f64 {
        match self.step {
            FdStep::Fixed(h) => h,
            FdStep::Relative => default_step(x, self.kind),
        }
    }

    /// Evaluations charged for `n` directional derivatives.
    pub fn cost(&self, n: usize) -> u64 {
        match self.kind {
            FdKind::Forward => n as u64 + 1,
            FdKind::Centered => 2 * n as u64,
        }
    }
}

/// `√ε·(1 + ‖x‖∞)` for forward differences, `ε^{1/3}·(1 + ‖x‖∞)` for centered.
pub fn default_step(x: &DVector<f64>, kind: FdKind) -> f64 {
    let scale = 1.0 + x.amax();
    match kind {
        FdKind::Forward => f64::EPSILON.sqrt() * scale,
        FdKind::Centered => f64::EPSILON.cbrt() * scale,
    }
}

/// Estimates `p_jᵀ∇f(x)` for every column `p_j` of the sketch, probing along
/// the normalised column and rescaling by `‖p_j‖`.
pub fn directional_derivatives(
    obj: &Objective,
    x: &DVector<f64>,
    sketch: &Sketch,
    scheme: &FdScheme,
) -> Result<DVector<f64>> {
    if sketch.dim() != x.len() || x.len() != obj.dim() {
        return config(format!(
            "directional derivatives: x has length {}, sketch is {}x{}, objective dimension {}",
            x.len(),
            sketch.dim(),
            sketch.rank(),
            obj.dim()
        ));
    }
    let p = sketch.matrix();
    let norms: Vec<f64> = p.column_iter().map(|c| c.norm()).collect();
    if norms.contains(&0.0) {
        return config("directional derivatives: sketch has a zero column");
    }
    finite_differences(obj, x, sketch.rank(), scheme, |j, h| {
        let mut probe = x.clone();
        probe.axpy(h / norms[j], &p.column(j), 1.0);
        probe
    })
    .map(|raw| DVector::from_iterator(raw.len(), raw.iter().zip(&norms).map(|(g, n)| g * n)))
}

/// Coordinate-wise finite-difference gradient: `d + 1` (forward) or `2d`
/// (centered) evaluations.
pub fn full_gradient_fd(obj: &Objective, x: &DVector<f64>, scheme: &FdScheme) -> Result<DVector<f64>> {
    if x.len() != obj.dim() {
        return config(format!(
            "full gradient: x has length {}, objective dimension {}",
            x.len(),
            obj.dim()
        ));
    }
    finite_differences(obj, x, x.len(), scheme, |j, h| {
        let mut probe = x.clone();
        probe[j] += h;
        probe
    })
    .map(DVector::from_vec)
}

/// Shared driver: `probe(j, t)` returns `x + t·u_j` for a unit direction `u_j`.
fn finite_differences<F>(
    obj: &Objective,
    x: &DVector<f64>,
    n: usize,
    scheme: &FdScheme,
    probe: F,
) -> Result<Vec<f64>>
where
    F: Fn(usize, f64) -> DVector<f64> + Sync,
{
    scheme.validate()?;
    let h = scheme.step_at(x);
    match scheme.kind {
        FdKind::Forward => {
            let base = checked_eval(obj, x)?;
            let values = evaluate_all(obj, n, scheme.parallel, |j| probe(j, h))?;
            Ok(values.into_iter().map(|v| (v - base) / h).collect())
        }
        FdKind::Centered => {
            // Index 2j is the +h probe and 2j+1 the −h probe of direction j.
            let values = evaluate_all(obj, 2 * n, scheme.parallel, |k| {
                let t = if k % 2 == 0 { h } else { -h };
                probe(k / 2, t)
            })?;
            Ok(values.chunks_exact(2).map(|pair| (pair[0] - pair[1]) / (2.0 * h)).collect())
        }
    }
}

fn evaluate_all<F>(obj: &Objective, n: usize, parallel: bool, probe: F) -> Result<Vec<f64>>
where
    F: Fn(usize) -> DVector<f64> + Sync,
{
    let eval = |k: usize| {
        let point = probe(k);
        checked_eval(obj, &point)
    };
    if parallel {
        (0..n).into_par_iter().map(eval).collect()
    } else {
        (0..n).map(eval).collect()
    }
}

fn checked_eval(obj: &Objective, point: &DVector<f64>) -> Result<f64> {
    let value = obj.evaluate(point)?;
    if !value.is_finite() {
        return Err(Error::Evaluation { point: point.iter().copied().collect(), value });
    }
    Ok(value)
}
