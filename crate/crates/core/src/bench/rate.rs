//! Empirical linear-rate estimation from a trace.

use crate::error::{config, Result};
use crate::trace::RunTrace;

/// Minimum number of usable entries for a fit.
pub const MIN_POINTS: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateEstimate {
    /// `exp(slope)`: estimated per-iteration contraction of `f − f*`.
    pub beta: f64,
    pub slope: f64,
    pub r_squared: f64,
    pub points: usize,
}

/// Least-squares fit of `log(f_k − f*)` against the iteration index.
/// Entries with `f_k ≤ f*` are dropped.
pub fn estimate_linear_rate(trace: &RunTrace, f_star: f64) -> Result<RateEstimate> {
    let pts: Vec<(f64, f64)> = trace
        .entries
        .iter()
        .filter(|e| e.f > f_star)
        .map(|e| (e.iter as f64, (e.f - f_star).ln()))
        .collect();
    fit_log_gaps(&pts)
}

/// Same fit on raw `(k, log gap)` pairs.
pub fn fit_log_gaps(pts: &[(f64, f64)]) -> Result<RateEstimate> {
    if pts.len() < MIN_POINTS {
        return config(format!(
            "rate estimate needs at least {MIN_POINTS} entries above f*, got {}",
            pts.len()
        ));
    }
    let n = pts.len() as f64;
    let mean_x = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    if sxx == 0.0 {
        return config("rate estimate needs distinct iteration indices");
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ss_res: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let ss_tot: f64 = pts.iter().map(|p| (p.1 - mean_y).powi(2)).sum();
    // A constant series is fitted exactly by a flat line.
    let r_squared = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok(RateEstimate { beta: slope.exp(), slope, r_squared, points: pts.len() })
}
