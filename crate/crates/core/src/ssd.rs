//! Stochastic subspace descent: `x₊ = x − α·PPᵀ∇f(x)` with a fresh sketch
//! every iteration and `Pᵀ∇f(x)` estimated by finite differences.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{config, Result};
use crate::linesearch::{ArmijoParams, StepRule};
use crate::oracle::{directional_derivatives, FdScheme};
use crate::problems::Objective;
use crate::run::{descend, lipschitz_of, ResolvedStep, Runner};
pub use crate::run::{StepResult, StepTaken};
use crate::sketch::{RngStream, Sketch, SketchKind};
use crate::trace::{RunTrace, TerminalStatus};

/// Sketch streams for subspace steps use this `outer` lane, keyed by the
/// global step index.
pub(crate) const SKETCH_LANE: u64 = 0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SsdConfig {
    pub ell: usize,
    pub sketch: SketchKind,
    pub step: StepRule,
    pub fd: FdScheme,
    pub max_iters: usize,
    pub eval_budget: u64,
    pub target_value: Option<f64>,
    pub seed: u64,
}

impl Default for SsdConfig {
    fn default() -> Self {
        Self {
            ell: 1,
            sketch: SketchKind::Haar,
            step: StepRule::Armijo(ArmijoParams::default()),
            fd: FdScheme::forward(),
            max_iters: 100_000,
            eval_budget: 1_000_000,
            target_value: None,
            seed: 0,
        }
    }
}

impl SsdConfig {
    pub fn validate(&self, d: usize) -> Result<()> {
        if self.ell == 0 || self.ell > d {
            return config(format!("ell must satisfy 1 <= ell <= d = {d}, got {}", self.ell));
        }
        if self.max_iters == 0 {
            return config("max_iters must be positive");
        }
        if self.eval_budget == 0 {
            return config("eval_budget must be positive");
        }
        self.step.validate()?;
        self.fd.validate()
    }

    pub(crate) fn resolve_step(&self, obj: &Objective) -> Result<ResolvedStep> {
        ResolvedStep::resolve(&self.step, || {
            theoretical_step(self.ell, obj.dim(), lipschitz_of(obj)?)
        })
    }
}

/// `α = ℓ/(dλ)`.
pub fn theoretical_step(ell: usize, d: usize, lambda: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return config(format!("theoretical step: lambda must be positive, got {lambda}"));
    }
    if ell == 0 || ell > d {
        return config(format!("theoretical step: need 1 <= ell <= d, got ell={ell}, d={d}"));
    }
    Ok(ell as f64 / (d as f64 * lambda))
}

/// Expected per-iteration contraction `β = 1 − ℓγ/(dλ)` of `f − f*` under
/// the PL inequality with the theoretical step.
pub fn rate_bound_pl(ell: usize, d: usize, lambda: f64, gamma: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma <= lambda) {
        return config(format!("rate bound: need 0 < gamma <= lambda, got gamma={gamma}, lambda={lambda}"));
    }
    if ell == 0 || ell > d {
        return config(format!("rate bound: need 1 <= ell <= d, got ell={ell}, d={d}"));
    }
    Ok(1.0 - ell as f64 * gamma / (d as f64 * lambda))
}

/// Sublinear bound `2dλR²/(kℓ)` on `E f(x_k) − f*` for convex objectives.
pub fn convex_bound(ell: usize, d: usize, lambda: f64, radius: f64, k: usize) -> Result<f64> {
    if ell == 0 || k == 0 || !(lambda > 0.0) || !(radius >= 0.0) {
        return config(format!(
            "convex bound: need ell, k >= 1, lambda > 0, R >= 0 (ell={ell}, k={k}, lambda={lambda}, R={radius})"
        ));
    }
    Ok(2.0 * d as f64 * lambda * radius * radius / (k as f64 * ell as f64))
}

/// The sketched gradient estimate for one step: `s ≈ Pᵀ∇f(x)` and the
/// search direction `P s`.
pub(crate) struct SketchedGradient {
    pub sketch: Sketch,
    pub s: DVector<f64>,
    pub direction: DVector<f64>,
}

pub(crate) fn sketched_gradient(
    obj: &Objective,
    x: &DVector<f64>,
    cfg: &SsdConfig,
    stream: RngStream,
) -> Result<SketchedGradient> {
    let sketch = Sketch::draw(cfg.sketch, obj.dim(), cfg.ell, stream)?;
    let s = directional_derivatives(obj, x, &sketch, &cfg.fd)?;
    let direction = sketch.apply(&s)?;
    Ok(SketchedGradient { sketch, s, direction })
}

/// One SSD iteration from `x` (with known value `fx`), spending at most
/// `budget` evaluations. A step that cannot be paid for in full is discarded.
pub fn ssd_step(
    obj: &Objective,
    x: &DVector<f64>,
    fx: f64,
    cfg: &SsdConfig,
    stream: RngStream,
    budget: u64,
) -> Result<StepResult> {
    cfg.validate(obj.dim())?;
    let step = cfg.resolve_step(obj)?;
    ssd_step_resolved(obj, x, fx, cfg, &step, stream, budget)
}

pub(crate) fn ssd_step_resolved(
    obj: &Objective,
    x: &DVector<f64>,
    fx: f64,
    cfg: &SsdConfig,
    step: &ResolvedStep,
    stream: RngStream,
    budget: u64,
) -> Result<StepResult> {
    let oracle_cost = cfg.fd.cost(cfg.ell);
    if oracle_cost > budget {
        return Ok(StepResult::Stopped(TerminalStatus::BudgetExhausted));
    }
    let est = sketched_gradient(obj, x, cfg, stream)?;
    // ∇fᵀ(P s) = (Pᵀ∇f)ᵀ s ≈ sᵀs.
    let slope = est.s.norm_squared();
    descend(obj, x, fx, &est.direction, slope, step, budget - oracle_cost)
}

pub fn run_ssd(obj: &Objective, x0: &DVector<f64>, cfg: &SsdConfig) -> Result<RunTrace> {
    cfg.validate(obj.dim())?;
    let step = cfg.resolve_step(obj)?;
    let mut run = Runner::new(obj, x0, "ssd", cfg.eval_budget, cfg.max_iters, cfg.target_value)?;
    loop {
        if let Some(status) = run.pending_status() {
            return Ok(run.finish(status));
        }
        let stream = RngStream::new(cfg.seed, SKETCH_LANE, run.iters as u64);
        match ssd_step_resolved(obj, &run.x, run.fx, cfg, &step, stream, run.remaining())? {
            StepResult::Taken(taken) => run.record(taken),
            StepResult::Stopped(status) => return Ok(run.finish(status)),
        }
    }
}
