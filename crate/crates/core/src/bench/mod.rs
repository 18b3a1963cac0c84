//! Experiment running, performance profiles, rate diagnostics and trace I/O.

pub mod config;
pub mod experiment;
pub mod export;
pub mod profile;
pub mod rate;

pub use config::parse_experiment;
pub use experiment::{run_experiment, ExperimentSpec, ProblemSpec, SolverKind, SolverSpec, ThresholdRule, X0Sampler};
pub use export::{export_traces, import_traces, traces_from_csv, traces_to_csv, TraceFormat, CSV_HEADER};
pub use profile::{outcomes_from_traces, performance_profile, profile_from_outcomes, PerformanceProfile, SolverProfile, TrialOutcome};
pub use rate::{estimate_linear_rate, fit_log_gaps, RateEstimate};
