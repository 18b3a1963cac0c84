use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::baselines::{run_fd_bfgs, run_fd_gd};
use crate::error::{config, Error, Result};
use crate::linesearch::StepRule;
use crate::oracle::{FdKind, FdStep};
use crate::problems::{isotropic_quadratic, nesterov_worst, rank_deficient_least_squares, Objective};
use crate::sketch::{RngStream, SketchKind};
use crate::ssd::run_ssd;
use crate::trace::RunTrace;
use crate::vrssd::{run_vrssd, AnchorOption, EtaMode, VrssdConfig};

/// `outer` lane for starting-point draws, keyed by trial seed.
const X0_LANE: u64 = 2;
/// `outer` lane for generated least-squares data.
const DATA_LANE: u64 = 3;

#[derive(Clone, Debug, PartialEq)]
pub enum ProblemSpec {
    Nesterov { lambda: f64, r: usize, d: usize },
    Quadratic { d: usize },
    /// `½‖Ax − b‖²` with `A = G₁G₂` for Gaussian `G₁ (m×rank)`, `G₂ (rank×d)`
    /// and Gaussian `b`, all drawn from `seed`.
    LeastSquares { rows: usize, d: usize, rank: usize, seed: u64 },
}

impl ProblemSpec {
    pub fn build(&self) -> Result<Objective> {
        match *self {
            Self::Nesterov { lambda, r, d } => nesterov_worst(lambda, r, d),
            Self::Quadratic { d } => isotropic_quadratic(d),
            Self::LeastSquares { rows, d, rank, seed } => {
                if rows == 0 || d == 0 || rank == 0 {
                    return config("lsq: m, d and rank must be positive");
                }
                let mut rng = RngStream::new(seed, DATA_LANE, 0).rng();
                let mut normal = || rng.sample::<f64, _>(StandardNormal);
                let left = DMatrix::from_fn(rows, rank, |_, _| normal());
                let right = DMatrix::from_fn(rank, d, |_, _| normal());
                let b = DVector::from_fn(rows, |_, _| normal());
                rank_deficient_least_squares(left * right, b)
            }
        }
    }

    pub fn dim(&self) -> usize {
        match *self {
            Self::Nesterov { d, .. } | Self::Quadratic { d } | Self::LeastSquares { d, .. } => d,
        }
    }
}

/// `nesterov:l=<λ>,r=<r>,d=<d>`, `quadratic:d=<d>` or
/// `lsq:m=<rows>,d=<d>,rank=<k>,seed=<s>`.
impl FromStr for ProblemSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, args) = s.split_once(':').unwrap_or((s, ""));
        let mut pairs = Vec::new();
        for part in args.split(',').filter(|p| !p.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("problem '{s}': expected key=value, got '{part}'")))?;
            pairs.push((k.trim(), v.trim()));
        }
        let get = |key: &str| -> Result<&str> {
            pairs
                .iter()
                .find(|(k, _)| *k == key)
                .map(|(_, v)| *v)
                .ok_or_else(|| Error::Config(format!("problem '{s}': missing parameter '{key}'")))
        };
        let num = |key: &str| -> Result<f64> {
            get(key)?
                .parse()
                .map_err(|_| Error::Config(format!("problem '{s}': '{key}' is not a number")))
        };
        let int = |key: &str| -> Result<usize> {
            get(key)?
                .parse()
                .map_err(|_| Error::Config(format!("problem '{s}': '{key}' is not an integer")))
        };
        let spec = match name {
            "nesterov" => Self::Nesterov { lambda: num("l")?, r: int("r")?, d: int("d")? },
            "quadratic" => Self::Quadratic { d: int("d")? },
            "lsq" => Self::LeastSquares {
                rows: int("m")?,
                d: int("d")?,
                rank: int("rank")?,
                seed: get("seed")
                    .unwrap_or("0")
                    .parse()
                    .map_err(|_| Error::Config(format!("problem '{s}': bad seed")))?,
            },
            other => {
                return config(format!("unknown problem '{other}' (expected nesterov | quadratic | lsq)"))
            }
        };
        Ok(spec)
    }
}

impl fmt::Display for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Nesterov { lambda, r, d } => write!(f, "nesterov:l={lambda},r={r},d={d}"),
            Self::Quadratic { d } => write!(f, "quadratic:d={d}"),
            Self::LeastSquares { rows, d, rank, seed } => {
                write!(f, "lsq:m={rows},d={d},rank={rank},seed={seed}")
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum X0Sampler {
    Zeros,
    Uniform { lo: f64, hi: f64 },
    Gaussian { sigma: f64 },
}

impl X0Sampler {
    pub fn sample(&self, d: usize, stream: RngStream) -> DVector<f64> {
        let mut rng = stream.rng();
        match *self {
            Self::Zeros => DVector::zeros(d),
            Self::Uniform { lo, hi } => DVector::from_fn(d, |_, _| rng.gen_range(lo..hi)),
            Self::Gaussian { sigma } => {
                DVector::from_fn(d, |_, _| sigma * rng.sample::<f64, _>(StandardNormal))
            }
        }
    }
}

/// `zeros`, `uniform:<lo>,<hi>` or `gaussian:<sigma>`.
impl FromStr for X0Sampler {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, args) = s.split_once(':').unwrap_or((s, ""));
        let nums: Vec<f64> = args
            .split(',')
            .filter(|a| !a.is_empty())
            .map(|a| a.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Config(format!("x0 sampler '{s}': bad number")))?;
        match (name, nums.as_slice()) {
            ("zeros", []) => Ok(Self::Zeros),
            ("uniform", [lo, hi]) if lo < hi => Ok(Self::Uniform { lo: *lo, hi: *hi }),
            ("gaussian", [sigma]) if *sigma > 0.0 => Ok(Self::Gaussian { sigma: *sigma }),
            _ => config(format!(
                "bad x0 sampler '{s}' (expected zeros | uniform:<lo>,<hi> | gaussian:<sigma>)"
            )),
        }
    }
}

impl fmt::Display for X0Sampler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Zeros => f.write_str("zeros"),
            Self::Uniform { lo, hi } => write!(f, "uniform:{lo},{hi}"),
            Self::Gaussian { sigma } => write!(f, "gaussian:{sigma}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ThresholdRule {
    Absolute(f64),
    /// `f(x₀) − p·(f(x₀) − f*)`: a fraction `p` of the initial gap closed.
    Fraction(f64),
}

impl ThresholdRule {
    pub fn validate(&self, f_star: Option<f64>) -> Result<()> {
        match self {
            Self::Absolute(v) if !v.is_finite() => config("absolute threshold must be finite"),
            Self::Fraction(p) if !(*p > 0.0 && *p <= 1.0) => {
                config(format!("fraction threshold must lie in (0, 1], got {p}"))
            }
            Self::Fraction(_) if f_star.is_none() => {
                config("fraction threshold needs a known minimum value")
            }
            _ => Ok(()),
        }
    }

    pub fn threshold(&self, f0: f64, f_star: Option<f64>) -> Result<f64> {
        self.validate(f_star)?;
        Ok(match *self {
            Self::Absolute(v) => v,
            Self::Fraction(p) => {
                let f_star = f_star.expect("validated");
                f0 - p * (f0 - f_star)
            }
        })
    }
}

/// `absolute:<value>` or `fraction:<p>`.
impl FromStr for ThresholdRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("bad threshold '{s}' (expected absolute:<v> | fraction:<p>)"));
        let (name, arg) = s.split_once(':').ok_or_else(bad)?;
        let value: f64 = arg.trim().parse().map_err(|_| bad())?;
        let rule = match name {
            "absolute" | "abs" => Self::Absolute(value),
            "fraction" | "frac" => Self::Fraction(value),
            _ => return Err(bad()),
        };
        match rule {
            Self::Fraction(p) if !(p > 0.0 && p <= 1.0) => Err(bad()),
            Self::Absolute(v) if !v.is_finite() => Err(bad()),
            _ => Ok(rule),
        }
    }
}

impl fmt::Display for ThresholdRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Absolute(v) => write!(f, "absolute:{v}"),
            Self::Fraction(p) => write!(f, "fraction:{p}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SolverKind {
    Ssd,
    Vrssd,
    Gd,
    Bfgs,
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ssd" => Ok(Self::Ssd),
            "vrssd" => Ok(Self::Vrssd),
            "gd" => Ok(Self::Gd),
            "bfgs" => Ok(Self::Bfgs),
            other => config(format!("unknown solver '{other}' (expected ssd | vrssd | gd | bfgs)")),
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Ssd => "ssd",
            Self::Vrssd => "vrssd",
            Self::Gd => "gd",
            Self::Bfgs => "bfgs",
        })
    }
}

/// A named solver with its full configuration. Non-VR solvers ignore the
/// variance-reduction fields.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverSpec {
    pub name: String,
    pub kind: SolverKind,
    pub config: VrssdConfig,
}

impl SolverSpec {
    pub fn new(name: impl Into<String>, kind: SolverKind) -> Self {
        Self { name: name.into(), kind, config: VrssdConfig::default() }
    }

    /// Sets one option by its flag/config-file key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let base = &mut self.config.base;
        let int = |v: &str| -> Result<u64> {
            v.parse().map_err(|_| Error::Config(format!("'{key}': '{v}' is not a non-negative integer")))
        };
        match key {
            "solver" => self.kind = value.parse()?,
            "ell" => base.ell = int(value)? as usize,
            "sketch" => base.sketch = value.parse::<SketchKind>()?,
            "step" => base.step = value.parse::<StepRule>()?,
            "fd" => base.fd.kind = value.parse::<FdKind>()?,
            "fd-step" | "fd_step" => base.fd.step = value.parse::<FdStep>()?,
            "iters" => base.max_iters = int(value)? as usize,
            "budget" => base.eval_budget = int(value)?,
            "target" => {
                base.target_value = Some(value.parse().map_err(|_| {
                    Error::Config(format!("'target': '{value}' is not a number"))
                })?)
            }
            "seed" => base.seed = int(value)?,
            "m" => self.config.memory = int(value)? as usize,
            "option" => self.config.option = value.parse::<AnchorOption>()?,
            "eta" => self.config.eta = value.parse::<EtaMode>()?,
            "warmup" => self.config.warmup_iters = int(value)? as usize,
            other => return config(format!("unknown solver option '{other}'")),
        }
        Ok(())
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        if self.name.is_empty() || self.name.contains([',', '\n', '"']) {
            return config(format!("solver name '{}' must be non-empty without commas or quotes", self.name));
        }
        match self.kind {
            SolverKind::Vrssd => self.config.validate(d),
            SolverKind::Ssd => self.config.base.validate(d),
            SolverKind::Gd | SolverKind::Bfgs => {
                crate::ssd::SsdConfig { ell: d, ..self.config.base.clone() }.validate(d)
            }
        }
    }

    pub fn run(&self, obj: &Objective, x0: &DVector<f64>) -> Result<RunTrace> {
        let base = &self.config.base;
        let mut trace = match self.kind {
            SolverKind::Ssd => run_ssd(obj, x0, base)?,
            SolverKind::Vrssd => run_vrssd(obj, x0, &self.config)?,
            SolverKind::Gd => run_fd_gd(obj, x0, base)?,
            SolverKind::Bfgs => run_fd_bfgs(obj, x0, base)?,
        };
        trace.solver = self.name.clone();
        Ok(trace)
    }

    /// Resolved configuration as `key=value` lines, defaults included.
    pub fn describe(&self) -> Vec<(String, String)> {
        let b = &self.config.base;
        let mut out = vec![
            ("solver".to_string(), self.kind.to_string()),
            ("ell".into(), b.ell.to_string()),
            ("sketch".into(), b.sketch.to_string()),
            ("step".into(), b.step.to_string()),
            ("fd".into(), b.fd.kind.to_string()),
            ("fd-step".into(), b.fd.step.to_string()),
            ("iters".into(), b.max_iters.to_string()),
            ("budget".into(), b.eval_budget.to_string()),
            ("target".into(), b.target_value.map_or("none".into(), |t| t.to_string())),
            ("seed".into(), b.seed.to_string()),
        ];
        if self.kind == SolverKind::Vrssd {
            out.push(("m".into(), self.config.memory.to_string()));
            out.push(("option".into(), self.config.option.to_string()));
            out.push(("eta".into(), self.config.eta.to_string()));
            out.push(("warmup".into(), self.config.warmup_iters.to_string()));
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub problem: ProblemSpec,
    pub solvers: Vec<SolverSpec>,
    pub trials: usize,
    pub x0: X0Sampler,
    pub threshold: ThresholdRule,
    pub base_seed: u64,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.solvers.is_empty() {
            return config("experiment has no solvers");
        }
        if self.trials == 0 {
            return config("trials must be positive");
        }
        let d = self.problem.dim();
        let mut names = std::collections::HashSet::new();
        for s in &self.solvers {
            s.validate(d)?;
            if !names.insert(&s.name) {
                return config(format!("duplicate solver name '{}'", s.name));
            }
        }
        Ok(())
    }

    pub fn trial_seed(&self, trial: usize) -> u64 {
        self.base_seed.wrapping_add(trial as u64)
    }

    pub fn starting_point(&self, trial: usize) -> DVector<f64> {
        self.x0.sample(self.problem.dim(), RngStream::new(self.trial_seed(trial), X0_LANE, 0))
    }
}

/// Runs every solver on every trial. Trial `t` uses seed `base_seed + t` and
/// one starting point shared by all solvers. Runs are independent, so `jobs`
/// only changes wall-clock time; traces come back ordered by trial, then
/// solver. A run that errors yields a trace with status `error`.
pub fn run_experiment(spec: &ExperimentSpec, jobs: usize) -> Result<Vec<RunTrace>> {
    spec.validate()?;
    let objective = spec.problem.build()?;
    let f_star = objective.minimum_value();
    spec.threshold.validate(f_star)?;

    let tasks: Vec<(usize, usize)> = (0..spec.trials)
        .flat_map(|t| (0..spec.solvers.len()).map(move |s| (t, s)))
        .collect();
    let run_one = |&(trial, solver_idx): &(usize, usize)| -> Result<RunTrace> {
        let solver = &spec.solvers[solver_idx];
        let x0 = spec.starting_point(trial);
        let obj = objective.fresh();
        let f0 = obj.evaluate_unmetered(&x0)?;
        let mut configured = solver.clone();
        configured.config.base.seed = spec.trial_seed(trial);
        if configured.config.base.target_value.is_none() {
            configured.config.base.target_value = Some(spec.threshold.threshold(f0, f_star)?);
        }
        let mut trace = configured
            .run(&obj, &x0)
            .unwrap_or_else(|e| RunTrace::failed(solver.name.clone(), trial as u64, &e));
        trace.trial = trial as u64;
        Ok(trace)
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| tasks.par_iter().map(run_one).collect())
}
