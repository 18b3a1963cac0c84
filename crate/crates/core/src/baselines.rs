//! Full-gradient zeroth-order baselines: gradient descent and BFGS, both on
//! forward- or centered-difference gradients.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::linesearch::{ArmijoParams, StepRule};
use crate::oracle::full_gradient_fd;
use crate::problems::Objective;
use crate::run::{descend, lipschitz_of, ResolvedStep, Runner, StepResult, StepTaken};
use crate::ssd::SsdConfig;
use crate::trace::{RunTrace, TerminalStatus};

/// Relative curvature threshold below which a BFGS update is skipped.
pub const CURVATURE_SKIP: f64 = 1e-10;

/// `x₊ = x − α·∇̂f(x)`. The theoretical step is `1/λ`; `ell` and `sketch`
/// in the config are ignored.
pub fn run_fd_gd(obj: &Objective, x0: &DVector<f64>, cfg: &SsdConfig) -> Result<RunTrace> {
    let d = obj.dim();
    let cfg = SsdConfig { ell: d, ..cfg.clone() };
    cfg.validate(d)?;
    let step = ResolvedStep::resolve(&cfg.step, || Ok(1.0 / lipschitz_of(obj)?))?;
    let gradient_cost = cfg.fd.cost(d);
    let mut run = Runner::new(obj, x0, "gd", cfg.eval_budget, cfg.max_iters, cfg.target_value)?;
    loop {
        if let Some(status) = run.pending_status() {
            return Ok(run.finish(status));
        }
        if !run.can_afford(gradient_cost) {
            return Ok(run.finish(TerminalStatus::BudgetExhausted));
        }
        let g = full_gradient_fd(obj, &run.x, &cfg.fd)?;
        let slope = g.norm_squared();
        match descend(obj, &run.x, run.fx, &g, slope, &step, run.remaining())? {
            StepResult::Taken(taken) => run.record(taken),
            StepResult::Stopped(status) => return Ok(run.finish(status)),
        }
    }
}

/// Inverse-Hessian approximation with the previous point and gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct BfgsState {
    pub inverse_hessian: DMatrix<f64>,
    pub skipped_updates: usize,
}

impl BfgsState {
    pub fn new(d: usize) -> Self {
        Self { inverse_hessian: DMatrix::identity(d, d), skipped_updates: 0 }
    }

    /// Search direction `H g`; the solver steps along `−H g`.
    pub fn direction(&self, gradient: &DVector<f64>) -> DVector<f64> {
        &self.inverse_hessian * gradient
    }

    /// Inverse BFGS update with `s = Δx`, `y = Δg`:
    /// `H₊ = H − ρ(s(Hy)ᵀ + (Hy)sᵀ) + (ρ²yᵀHy + ρ)ssᵀ`, `ρ = 1/sᵀy`.
    /// Written in symmetric form so `H₊` stays exactly symmetric. Returns
    /// `false` when the curvature guard skipped the update.
    pub fn update(&mut self, s: &DVector<f64>, y: &DVector<f64>) -> bool {
        let sy = s.dot(y);
        if !(sy > CURVATURE_SKIP * s.norm() * y.norm()) {
            self.skipped_updates += 1;
            return false;
        }
        let rho = 1.0 / sy;
        let hy = &self.inverse_hessian * y;
        let yhy = y.dot(&hy);
        let h = &mut self.inverse_hessian;
        let n = s.len();
        let ss_coeff = rho * rho * yhy + rho;
        for j in 0..n {
            for i in 0..n {
                h[(i, j)] += ss_coeff * s[i] * s[j] - rho * (s[i] * hy[j] + hy[i] * s[j]);
            }
        }
        true
    }
}

/// FD-BFGS with Armijo backtracking. A non-Armijo step rule in `cfg` is
/// replaced by the default Armijo parameters.
pub fn run_fd_bfgs(obj: &Objective, x0: &DVector<f64>, cfg: &SsdConfig) -> Result<RunTrace> {
    run_fd_bfgs_with_state(obj, x0, cfg).map(|(trace, _)| trace)
}

/// As [`run_fd_bfgs`], also returning the final quasi-Newton state.
pub fn run_fd_bfgs_with_state(
    obj: &Objective,
    x0: &DVector<f64>,
    cfg: &SsdConfig,
) -> Result<(RunTrace, BfgsState)> {
    let d = obj.dim();
    let cfg = SsdConfig { ell: d, ..cfg.clone() };
    cfg.validate(d)?;
    let params = match cfg.step {
        StepRule::Armijo(p) => p,
        _ => ArmijoParams::default(),
    };
    let step = ResolvedStep::Armijo(params);
    let gradient_cost = cfg.fd.cost(d);
    let mut state = BfgsState::new(d);
    let mut run = Runner::new(obj, x0, "bfgs", cfg.eval_budget, cfg.max_iters, cfg.target_value)?;

    if !run.can_afford(gradient_cost) {
        return Ok((run.finish(TerminalStatus::BudgetExhausted), state));
    }
    let mut g = full_gradient_fd(obj, &run.x, &cfg.fd)?;
    loop {
        if let Some(status) = run.pending_status() {
            return Ok((run.finish(status), state));
        }
        let mut direction = state.direction(&g);
        let mut slope = g.dot(&direction);
        if !(slope > 0.0) {
            // Lost descent: restart from the identity.
            state.inverse_hessian = DMatrix::identity(d, d);
            direction = g.clone();
            slope = g.norm_squared();
        }
        let taken = match descend(obj, &run.x, run.fx, &direction, slope, &step, run.remaining())? {
            StepResult::Taken(taken) => taken,
            StepResult::Stopped(status) => return Ok((run.finish(status), state)),
        };
        let StepTaken { x: ref next, .. } = taken;
        let s = next - &run.x;
        run.record(taken);
        if let Some(status) = run.pending_status() {
            return Ok((run.finish(status), state));
        }
        // The gradient at the new point is the next iteration's gradient, so
        // it is only paid for when another iteration can follow.
        if !run.can_afford(gradient_cost) {
            return Ok((run.finish(TerminalStatus::BudgetExhausted), state));
        }
        let g_next = full_gradient_fd(obj, &run.x, &cfg.fd)?;
        let y = &g_next - &g;
        state.update(&s, &y);
        g = g_next;
    }
}
