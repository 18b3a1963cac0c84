//! Variance-reduced stochastic subspace descent.
//!
//! Every `m` inner steps a full finite-difference gradient `g̃` is taken at an
//! anchor `x̃`. Inner steps use the control-variate direction
//!
//! ```text
//! v = PPᵀ∇f(x) − η (PPᵀ − I) g̃ = P(s − η Pᵀg̃) + η g̃
//! ```
//!
//! where `s ≈ Pᵀ∇f(x)` comes from `ℓ` directional derivatives. `Pᵀg̃` needs
//! no function evaluations, so an inner step costs the same as an SSD step
//! (plus `d + 1` in the diagnostic `exact` η mode).

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};
use crate::oracle::full_gradient_fd;
use crate::problems::Objective;
use crate::run::{descend, lipschitz_of, ResolvedStep, Runner, StepResult};
use crate::sketch::{RngStream, Sketch};
use crate::ssd::{sketched_gradient, ssd_step_resolved, theoretical_step, SsdConfig, SKETCH_LANE};
use crate::trace::{RunTrace, TerminalStatus};

/// `outer` lane for the Option-2 anchor index draws, keyed by epoch.
const ANCHOR_LANE: u64 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EtaMode {
    Zero,
    One,
    /// `∇f(x)ᵀg̃/‖g̃‖²` with `∇f(x)` from a full finite-difference gradient.
    Exact,
    /// `∇f(x)` replaced by its sketched estimate `PPᵀ∇f(x)`.
    Approx,
}

impl FromStr for EtaMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "0" | "zero" => Ok(Self::Zero),
            "1" | "one" => Ok(Self::One),
            "exact" | "optimal" => Ok(Self::Exact),
            "approx" => Ok(Self::Approx),
            other => config(format!("unknown eta mode '{other}' (expected 0 | 1 | exact | approx)")),
        }
    }
}

impl fmt::Display for EtaMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Zero => "0",
            Self::One => "1",
            Self::Exact => "exact",
            Self::Approx => "approx",
        })
    }
}

/// Which inner iterate becomes the next anchor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnchorOption {
    /// The last inner iterate, `J = m`.
    One,
    /// A uniformly drawn inner iterate, `J ~ unif{1..m}`.
    Two,
}

impl FromStr for AnchorOption {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1" | "one" => Ok(Self::One),
            "2" | "two" => Ok(Self::Two),
            other => config(format!("unknown anchor option '{other}' (expected 1 | 2)")),
        }
    }
}

impl fmt::Display for AnchorOption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::One => "1",
            Self::Two => "2",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VrssdConfig {
    pub base: SsdConfig,
    pub memory: usize,
    pub option: AnchorOption,
    pub eta: EtaMode,
    /// Plain SSD iterations before the first anchor is formed.
    pub warmup_iters: usize,
}

impl Default for VrssdConfig {
    fn default() -> Self {
        Self {
            base: SsdConfig::default(),
            memory: 10,
            option: AnchorOption::One,
            eta: EtaMode::Approx,
            warmup_iters: 0,
        }
    }
}

impl VrssdConfig {
    pub fn validate(&self, d: usize) -> Result<()> {
        self.base.validate(d)?;
        if self.memory == 0 {
            return config("memory m must be positive");
        }
        Ok(())
    }

    /// The theoretical step here is `ℓ/(2dλ)`, the minimiser over `α` of the
    /// optimal-η epoch bound `1/(αγm(1 − αλρ))`.
    fn resolve_step(&self, obj: &Objective) -> Result<ResolvedStep> {
        ResolvedStep::resolve(&self.base.step, || {
            Ok(theoretical_step(self.base.ell, obj.dim(), lipschitz_of(obj)?)? / 2.0)
        })
    }
}

/// Anchor point `x̃` with its full finite-difference gradient `g̃`.
#[derive(Clone, Debug, PartialEq)]
pub struct AnchorState {
    pub x: DVector<f64>,
    pub gradient: DVector<f64>,
    pub epoch: usize,
}

impl AnchorState {
    /// Charges `d + 1` (forward) or `2d` (centered) evaluations.
    pub fn refresh(obj: &Objective, x: &DVector<f64>, cfg: &SsdConfig, epoch: usize) -> Result<Self> {
        let gradient = full_gradient_fd(obj, x, &cfg.fd)?;
        Ok(Self { x: x.clone(), gradient, epoch })
    }
}

/// Control-variate weight. `s` and `t` are `Pᵀ∇f(x)` (estimated) and
/// `Pᵀg̃`; `full_gradient` is only consulted in `Exact` mode. A vanishing
/// anchor gradient yields `η = 0`.
pub fn eta_value(
    mode: EtaMode,
    s: &DVector<f64>,
    t: &DVector<f64>,
    anchor_gradient: &DVector<f64>,
    full_gradient: Option<&DVector<f64>>,
) -> Result<f64> {
    let anchor_sq = anchor_gradient.norm_squared();
    match mode {
        EtaMode::Zero => Ok(0.0),
        EtaMode::One => Ok(1.0),
        _ if anchor_sq == 0.0 => Ok(0.0),
        EtaMode::Exact => {
            let g = full_gradient.ok_or_else(|| {
                Error::Config("exact eta mode needs the full gradient at the current point".into())
            })?;
            if g.len() != anchor_gradient.len() {
                return config("eta: gradient and anchor gradient lengths differ");
            }
            Ok(g.dot(anchor_gradient) / anchor_sq)
        }
        EtaMode::Approx => {
            if s.len() != t.len() {
                return config("eta: sketched vectors have different lengths");
            }
            // (PPᵀ∇f)ᵀg̃ = (Pᵀ∇f)ᵀ(Pᵀg̃).
            Ok(s.dot(t) / anchor_sq)
        }
    }
}

/// `v = P(s − η·Pᵀg̃) + η·g̃`.
pub fn control_variate_direction(
    sketch: &Sketch,
    s: &DVector<f64>,
    anchor_gradient: &DVector<f64>,
    eta: f64,
) -> Result<DVector<f64>> {
    let t = sketch.apply_transpose(anchor_gradient)?;
    let mut v = sketch.apply(&(s - t * eta))?;
    v.axpy(eta, anchor_gradient, 1.0);
    Ok(v)
}

/// One inner step from `x` (value `fx`) against `anchor`.
pub fn vrssd_inner_step(
    obj: &Objective,
    x: &DVector<f64>,
    fx: f64,
    anchor: &AnchorState,
    cfg: &VrssdConfig,
    stream: RngStream,
    budget: u64,
) -> Result<StepResult> {
    cfg.validate(obj.dim())?;
    let step = cfg.resolve_step(obj)?;
    inner_step_resolved(obj, x, fx, anchor, cfg, &step, stream, budget)
}

#[allow(clippy::too_many_arguments)]
fn inner_step_resolved(
    obj: &Objective,
    x: &DVector<f64>,
    fx: f64,
    anchor: &AnchorState,
    cfg: &VrssdConfig,
    step: &ResolvedStep,
    stream: RngStream,
    budget: u64,
) -> Result<StepResult> {
    let fd = &cfg.base.fd;
    let mut cost = fd.cost(cfg.base.ell);
    if cfg.eta == EtaMode::Exact {
        cost += fd.cost(obj.dim());
    }
    if cost > budget {
        return Ok(StepResult::Stopped(TerminalStatus::BudgetExhausted));
    }
    let est = sketched_gradient(obj, x, &cfg.base, stream)?;
    let full = match cfg.eta {
        EtaMode::Exact => Some(full_gradient_fd(obj, x, fd)?),
        _ => None,
    };
    let t = est.sketch.apply_transpose(&anchor.gradient)?;
    let eta = eta_value(cfg.eta, &est.s, &t, &anchor.gradient, full.as_ref())?;
    let direction = control_variate_direction(&est.sketch, &est.s, &anchor.gradient, eta)?;
    // ∇fᵀv = sᵀ(s − ηt) + η∇fᵀg̃, and sᵀt estimates ∇fᵀg̃ without bias.
    let slope = est.s.norm_squared();
    descend(obj, x, fx, &direction, slope, step, budget - cost)
}

/// Index `J ∈ {1..m}` of the inner iterate that becomes the next anchor.
pub fn anchor_index(option: AnchorOption, memory: usize, stream: RngStream) -> usize {
    match option {
        AnchorOption::One => memory,
        AnchorOption::Two => stream.rng().gen_range(1..=memory),
    }
}

pub fn run_vrssd(obj: &Objective, x0: &DVector<f64>, cfg: &VrssdConfig) -> Result<RunTrace> {
    cfg.validate(obj.dim())?;
    let step = cfg.resolve_step(obj)?;
    let base = &cfg.base;
    let mut run = Runner::new(obj, x0, "vrssd", base.eval_budget, base.max_iters, base.target_value)?;
    // Sketches are keyed by the global subspace-step count so that η = 0
    // replays the SSD sketch sequence.
    let mut sketch_index = 0u64;

    while run.iters < cfg.warmup_iters {
        if let Some(status) = run.pending_status() {
            return Ok(run.finish(status));
        }
        let stream = RngStream::new(base.seed, SKETCH_LANE, sketch_index);
        sketch_index += 1;
        match ssd_step_resolved(obj, &run.x, run.fx, base, &step, stream, run.remaining())? {
            StepResult::Taken(taken) => run.record(taken),
            StepResult::Stopped(status) => return Ok(run.finish(status)),
        }
    }

    let mut epoch = 0usize;
    loop {
        if let Some(status) = run.pending_status() {
            return Ok(run.finish(status));
        }
        epoch += 1;
        if !run.can_afford(base.fd.cost(obj.dim())) {
            return Ok(run.finish(TerminalStatus::BudgetExhausted));
        }
        let anchor = AnchorState::refresh(obj, &run.x, base, epoch)?;
        let chosen = anchor_index(cfg.option, cfg.memory, RngStream::new(base.seed, ANCHOR_LANE, epoch as u64));
        let mut next_anchor = None;

        for k in 1..=cfg.memory {
            if let Some(status) = run.pending_status() {
                return Ok(run.finish(status));
            }
            let stream = RngStream::new(base.seed, SKETCH_LANE, sketch_index);
            sketch_index += 1;
            match inner_step_resolved(obj, &run.x, run.fx, &anchor, cfg, &step, stream, run.remaining())? {
                StepResult::Taken(taken) => run.record(taken),
                StepResult::Stopped(status) => return Ok(run.finish(status)),
            }
            if k == chosen {
                next_anchor = Some((run.x.clone(), run.fx));
            }
        }
        if let Some((x, fx)) = next_anchor {
            run.x = x;
            run.fx = fx;
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RatePart {
    /// `η ≡ 1`.
    I,
    /// Optimal `η`.
    II,
}

/// Per-epoch contraction factor of `E f(x̃_s) − f*`:
/// part I `1/(αγm(1−αλρ)) + αλ(ρ−1)/(1−αλρ)`, part II `1/(αγm(1−αλρ))`.
pub fn rate_bound_vrssd(
    alpha: f64,
    gamma: f64,
    lambda: f64,
    memory: usize,
    rho: f64,
    part: RatePart,
) -> Result<f64> {
    if !(rho > 2.0) {
        return config(format!("vrssd rate bound requires rho > 2, got {rho}"));
    }
    if !(alpha > 0.0 && gamma > 0.0 && lambda > 0.0) || memory == 0 {
        return config("vrssd rate bound requires alpha, gamma, lambda, m > 0");
    }
    let slack = 1.0 - alpha * lambda * rho;
    if !(slack > 0.0) {
        return config(format!("vrssd rate bound requires alpha*lambda*rho < 1, got {}", 1.0 - slack));
    }
    let base = 1.0 / (alpha * gamma * memory as f64 * slack);
    Ok(match part {
        RatePart::II => base,
        RatePart::I => base + alpha * lambda * (rho - 1.0) / slack,
    })
}

/// Conditional mean-squared error `E‖v − g‖²` of the control-variate
/// direction around the true gradient `g`, for sketches with `PᵀP = ρI`.
/// `Exact` stands for the optimal weight `gᵀg̃/‖g̃‖²`.
pub fn cmse(mode: EtaMode, g: &DVector<f64>, anchor_gradient: &DVector<f64>, rho: f64) -> Result<f64> {
    if !(rho >= 1.0) {
        return config(format!("cmse requires rho >= 1, got {rho}"));
    }
    if g.len() != anchor_gradient.len() {
        return config("cmse: gradient lengths differ");
    }
    let g_sq = g.norm_squared();
    match mode {
        EtaMode::Zero => Ok((rho - 1.0) * g_sq),
        EtaMode::One => {
            Ok((rho - 1.0) * (g_sq + anchor_gradient.norm_squared() - 2.0 * g.dot(anchor_gradient)))
        }
        EtaMode::Exact => {
            let anchor_norm = anchor_gradient.norm();
            if anchor_norm == 0.0 {
                return config("cmse: optimal eta needs a nonzero anchor gradient");
            }
            let proj = anchor_gradient.dot(g) / anchor_norm;
            Ok((rho - 1.0) * (g_sq - proj * proj))
        }
        EtaMode::Approx => config("cmse has no closed form for the approximate eta"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linesearch::StepRule;
    use crate::oracle::FdScheme;
    use crate::problems::{isotropic_quadratic, nesterov_worst};
    use crate::sketch::SketchKind;
    use crate::ssd::run_ssd;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    #[test]
    fn eta_modes() {
        let s = v(&[1.0, 2.0]);
        let t = v(&[3.0, -1.0]);
        let anchor = v(&[1.0, 1.0, 0.0]);
        assert_eq!(eta_value(EtaMode::Zero, &s, &t, &anchor, None).unwrap(), 0.0);
        assert_eq!(eta_value(EtaMode::One, &s, &t, &anchor, None).unwrap(), 1.0);
        assert_eq!(eta_value(EtaMode::Exact, &s, &t, &anchor, Some(&anchor)).unwrap(), 1.0);
        assert_eq!(eta_value(EtaMode::Approx, &s, &t, &anchor, None).unwrap(), 0.5);
        assert!(eta_value(EtaMode::Exact, &s, &t, &anchor, None).is_err());
        let zero = DVector::zeros(3);
        assert_eq!(eta_value(EtaMode::Approx, &s, &t, &zero, None).unwrap(), 0.0);
        assert_eq!(eta_value(EtaMode::Exact, &s, &t, &zero, Some(&anchor)).unwrap(), 0.0);
    }

    #[test]
    fn zero_eta_direction_is_ssd_direction() {
        let p = Sketch::draw(SketchKind::Haar, 6, 2, RngStream::new(1, 0, 0)).unwrap();
        let s = v(&[0.3, -1.2]);
        let anchor = DVector::from_fn(6, |i, _| i as f64);
        let dir = control_variate_direction(&p, &s, &anchor, 0.0).unwrap();
        assert_eq!(dir, p.apply(&s).unwrap());
    }

    #[test]
    fn full_rank_sketch_ignores_eta() {
        let d = 5;
        let p = Sketch::draw(SketchKind::Haar, d, d, RngStream::new(4, 0, 0)).unwrap();
        let g = DVector::from_fn(d, |i, _| (i as f64).cos());
        let anchor = DVector::from_fn(d, |i, _| 1.0 + i as f64);
        let s = p.apply_transpose(&g).unwrap();
        for eta in [0.0, 0.5, 1.0, -2.0] {
            let dir = control_variate_direction(&p, &s, &anchor, eta).unwrap();
            assert!((dir - &g).amax() < 1e-10);
        }
    }

    #[test]
    fn anchor_point_with_exact_eta_recovers_anchor_gradient() {
        let d = 12;
        let f = nesterov_worst(8.0, 6, d).unwrap();
        let x = DVector::from_fn(d, |i, _| 0.1 * i as f64 - 0.4);
        let base = SsdConfig { ell: 3, step: StepRule::Fixed(1e-3), ..SsdConfig::default() };
        let cfg = VrssdConfig { base: base.clone(), eta: EtaMode::Exact, ..VrssdConfig::default() };
        let anchor = AnchorState::refresh(&f, &x, &base, 1).unwrap();
        let fx = f.evaluate_unmetered(&x).unwrap();
        for k in 0..5 {
            let StepResult::Taken(taken) =
                vrssd_inner_step(&f, &x, fx, &anchor, &cfg, RngStream::new(7, 0, k), u64::MAX).unwrap()
            else {
                panic!()
            };
            let direction = (&x - &taken.x) / 1e-3;
            let rel = (&direction - &anchor.gradient).norm() / anchor.gradient.norm();
            assert!(rel < 1e-5, "relative error {rel}");
        }
    }

    #[test]
    fn rate_bound_values() {
        let b = rate_bound_vrssd(0.1, 1.0, 1.0, 50, 4.0, RatePart::II).unwrap();
        assert!((b - 1.0 / 3.0).abs() < 1e-14);
        let b = rate_bound_vrssd(0.05, 1.0, 1.0, 100, 4.0, RatePart::I).unwrap();
        assert!((b - 0.4375).abs() < 1e-14);
        // Part I exceeds part II by αλ(ρ−1)/(1−αλρ), linear in ρ − 1.
        for rho in [2.5, 3.0, 5.0] {
            let i = rate_bound_vrssd(0.01, 1.0, 2.0, 10, rho, RatePart::I).unwrap();
            let ii = rate_bound_vrssd(0.01, 1.0, 2.0, 10, rho, RatePart::II).unwrap();
            let expected = 0.02 * (rho - 1.0) / (1.0 - 0.02 * rho);
            assert!((i - ii - expected).abs() < 1e-12);
        }
        assert!(rate_bound_vrssd(0.1, 1.0, 1.0, 50, 2.0, RatePart::II).is_err());
        assert!(rate_bound_vrssd(0.3, 1.0, 1.0, 50, 4.0, RatePart::II).is_err());
        assert!(rate_bound_vrssd(0.1, 0.0, 1.0, 50, 4.0, RatePart::II).is_err());
        assert!(rate_bound_vrssd(0.1, 1.0, 1.0, 0, 4.0, RatePart::II).is_err());
    }

    #[test]
    fn cmse_closed_forms() {
        let g = v(&[1.0, 2.0, 0.0]);
        let parallel = v(&[-2.0, -4.0, 0.0]);
        assert!(cmse(EtaMode::Exact, &g, &parallel, 5.0).unwrap().abs() < 1e-12);
        assert_eq!(cmse(EtaMode::One, &g, &g, 5.0).unwrap(), 0.0);

        let orth = v(&[0.0, 0.0, 3.0]);
        let zero = cmse(EtaMode::Zero, &g, &orth, 4.0).unwrap();
        assert_eq!(zero, 15.0);
        assert_eq!(cmse(EtaMode::Exact, &g, &orth, 4.0).unwrap(), zero);
        assert_eq!(cmse(EtaMode::One, &g, &orth, 4.0).unwrap(), 3.0 * 14.0);

        assert!(cmse(EtaMode::Exact, &g, &DVector::zeros(3), 4.0).is_err());
        assert!(cmse(EtaMode::Approx, &g, &orth, 4.0).is_err());
        assert!(cmse(EtaMode::Zero, &g, &orth, 0.5).is_err());
    }

    #[test]
    fn option_one_picks_last_iterate() {
        for epoch in 0..20 {
            assert_eq!(anchor_index(AnchorOption::One, 7, RngStream::new(0, 1, epoch)), 7);
            let j = anchor_index(AnchorOption::Two, 7, RngStream::new(0, 1, epoch));
            assert!((1..=7).contains(&j));
        }
    }

    #[test]
    fn zero_eta_replays_ssd_trajectory() {
        let d = 30;
        let f = nesterov_worst(8.0, 8, d).unwrap();
        let x0 = DVector::zeros(d);
        let base = SsdConfig { ell: 3, max_iters: 40, seed: 21, ..SsdConfig::default() };
        let ssd = run_ssd(&f.fresh(), &x0, &base).unwrap();
        for memory in [1, 4] {
            let cfg = VrssdConfig { base: base.clone(), memory, eta: EtaMode::Zero, warmup_iters: 3, ..VrssdConfig::default() };
            let vr = run_vrssd(&f.fresh(), &x0, &cfg).unwrap();
            assert_eq!(vr.entries.len(), ssd.entries.len());
            for (a, b) in ssd.entries.iter().zip(&vr.entries) {
                assert_eq!(a.f, b.f);
                assert_eq!(a.step, b.step);
                assert_eq!(a.dirnorm, b.dirnorm);
            }
        }
    }

    #[test]
    fn epoch_cost_without_line_search() {
        let (d, ell, m) = (9usize, 2usize, 4usize);
        let f = isotropic_quadratic(d).unwrap();
        let x0 = DVector::from_element(d, 1.0);
        let base = SsdConfig { ell, step: StepRule::Fixed(0.05), max_iters: 3 * m, ..SsdConfig::default() };
        let cfg = VrssdConfig { base, memory: m, ..VrssdConfig::default() };
        let trace = run_vrssd(&f, &x0, &cfg).unwrap();
        let per_epoch = (d as u64 + 1) + m as u64 * (ell as u64 + 1);
        assert_eq!(trace.total_evals(), 3 * per_epoch);
        // First inner step of each epoch also pays the anchor refresh.
        assert_eq!(trace.entries[1].evals, (d as u64 + 1) + ell as u64 + 1);
        assert_eq!(trace.entries[m + 1].evals, per_epoch + (d as u64 + 1) + ell as u64 + 1);
    }

    #[test]
    fn vrssd_armijo_run_decreases() {
        let d = 40;
        let f = nesterov_worst(8.0, 10, d).unwrap();
        let x0 = DVector::zeros(d);
        let base = SsdConfig { ell: 4, eval_budget: 4000, seed: 3, fd: FdScheme::centered(), ..SsdConfig::default() };
        let cfg = VrssdConfig { base, memory: 10, warmup_iters: 20, ..VrssdConfig::default() };
        let trace = run_vrssd(&f, &x0, &cfg).unwrap();
        assert!(matches!(
            trace.status,
            TerminalStatus::BudgetExhausted | TerminalStatus::LineSearchFailed
        ));
        assert!(trace.values().collect::<Vec<_>>().windows(2).all(|w| w[1] <= w[0]));
        assert!(trace.final_value().unwrap() < 0.5 * f.minimum_value().unwrap());
    }

    #[test]
    fn rejects_zero_memory() {
        let f = isotropic_quadratic(3).unwrap();
        let cfg = VrssdConfig { memory: 0, ..VrssdConfig::default() };
        assert!(run_vrssd(&f, &DVector::zeros(3), &cfg).is_err());
    }
}
