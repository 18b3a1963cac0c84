//! Derivative-free optimization by stochastic subspace descent.
//!
//! Each iteration draws a random `d × ℓ` sketch `P` with `E[PPᵀ] = I`,
//! estimates the `ℓ` directional derivatives `Pᵀ∇f(x)` by finite
//! differences and steps along `PPᵀ∇f(x)`. The variance-reduced variant adds
//! a control variate built from an occasionally refreshed full gradient.
//!
//! Modules:
//! - [`problems`]: objectives with evaluation accounting and analytic test problems
//! - [`sketch`]: Haar, coordinate and Gaussian sketches
//! - [`oracle`]: finite-difference directional derivatives and gradients
//! - [`ssd`], [`vrssd`], [`baselines`]: solvers
//! - [`bench`]: experiments, performance profiles, rate estimation, trace I/O

pub mod baselines;
pub mod bench;
pub mod error;
pub mod linesearch;
pub mod oracle;
pub mod problems;
mod run;
pub mod sketch;
pub mod ssd;
pub mod trace;
pub mod vrssd;

pub use error::{Error, Result};
pub use linesearch::{ArmijoParams, StepRule};
pub use oracle::{FdKind, FdScheme, FdStep};
pub use problems::Objective;
pub use sketch::{RngStream, Sketch, SketchKind};
pub use ssd::SsdConfig;
pub use trace::{RunTrace, TerminalStatus, TraceEntry};
pub use vrssd::{EtaMode, VrssdConfig};
