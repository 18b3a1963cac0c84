use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use subspace_descent::bench::{
    export_traces, outcomes_from_traces, parse_experiment, performance_profile, run_experiment, traces_from_csv,
    ExperimentSpec, ProblemSpec, SolverKind, SolverSpec, ThresholdRule, TraceFormat, X0Sampler, CSV_HEADER,
};
use subspace_descent::{Error, RunTrace};

const EXIT_NO_SUCCESS: u8 = 1;
const EXIT_CONFIG: u8 = 2;

#[derive(Parser)]
#[command(name = "ssd", version, about = "Stochastic subspace descent runs, sweeps and performance profiles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
#[allow(clippy::large_enum_variant)]
enum Command {
    /// Run one solver on one problem and write its trace.
    Run(RunArgs),
    /// Run every solver in a config file over several trials.
    Sweep(SweepArgs),
    /// Build a performance profile from exported CSV traces.
    Profile(ProfileArgs),
}

#[derive(Args)]
struct RunArgs {
    /// nesterov:l=<λ>,r=<r>,d=<d> | quadratic:d=<d> | lsq:m=<rows>,d=<d>,rank=<k>,seed=<s>
    #[arg(long, default_value = "nesterov:l=8,r=10,d=101")]
    problem: String,
    /// zeros | uniform:<lo>,<hi> | gaussian:<sigma>
    #[arg(long, default_value = "zeros")]
    x0: String,
    #[arg(long, env = "SSD_SEED", default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    solver: SolverArgs,
    /// Trace file; defaults to trace.<format> in the working directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "csv", value_parser = ["csv", "json"])]
    format: String,
}

#[derive(Args)]
struct SolverArgs {
    /// ssd | vrssd | gd | bfgs
    #[arg(long, default_value = "ssd")]
    solver: String,
    #[arg(long)]
    ell: Option<String>,
    /// haar | coordinate | gaussian
    #[arg(long)]
    sketch: Option<String>,
    /// fixed:<α> | theory | armijo | armijo:<initial α>
    #[arg(long)]
    step: Option<String>,
    /// forward | centered
    #[arg(long)]
    fd: Option<String>,
    /// <h> | auto
    #[arg(long)]
    fd_step: Option<String>,
    #[arg(long)]
    iters: Option<String>,
    #[arg(long)]
    budget: Option<String>,
    #[arg(long)]
    target: Option<String>,
    #[arg(long)]
    m: Option<String>,
    /// 1 | 2
    #[arg(long)]
    option: Option<String>,
    /// 0 | 1 | exact | approx
    #[arg(long)]
    eta: Option<String>,
    #[arg(long)]
    warmup: Option<String>,
}

impl SolverArgs {
    fn build(&self, seed: u64) -> Result<SolverSpec, Error> {
        let kind: SolverKind = self.solver.parse()?;
        let mut spec = SolverSpec::new(kind.to_string(), kind);
        spec.set("seed", &seed.to_string())?;
        let pairs = [
            ("ell", &self.ell),
            ("sketch", &self.sketch),
            ("step", &self.step),
            ("fd", &self.fd),
            ("fd-step", &self.fd_step),
            ("iters", &self.iters),
            ("budget", &self.budget),
            ("target", &self.target),
            ("m", &self.m),
            ("option", &self.option),
            ("eta", &self.eta),
            ("warmup", &self.warmup),
        ];
        for (key, value) in pairs {
            if let Some(v) = value {
                spec.set(key, v)?;
            }
        }
        Ok(spec)
    }
}

#[derive(Args)]
struct SweepArgs {
    /// Experiment file of `key = value` lines with one `[name]` section per solver.
    config: PathBuf,
    /// Output directory for traces.csv, traces.json and summary.csv.
    #[arg(long, default_value = "sweep-out")]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Overrides the file's `seed`.
    #[arg(long, env = "SSD_SEED")]
    seed: Option<u64>,
}

#[derive(Args)]
struct ProfileArgs {
    /// Directory holding exported trace CSV files.
    dir: PathBuf,
    /// absolute:<value> | fraction:<p>
    #[arg(long, default_value = "fraction:0.95")]
    threshold: String,
    /// Minimum value used by fraction thresholds.
    #[arg(long, allow_hyphen_values = true)]
    fstar: Option<f64>,
    /// Takes the minimum value from a problem description instead of --fstar.
    #[arg(long, conflicts_with = "fstar")]
    problem: Option<String>,
    /// Profile CSV; printed to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Profile(args) => cmd_profile(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::NoSuccess { .. } => ExitCode::from(EXIT_NO_SUCCESS),
                _ => ExitCode::from(EXIT_CONFIG),
            }
        }
    }
}

fn print_pairs(pairs: &[(String, String)]) {
    for (k, v) in pairs {
        println!("{k} = {v}");
    }
}

fn eprint_pairs(pairs: &[(String, String)]) {
    for (k, v) in pairs {
        eprintln!("{k} = {v}");
    }
}

fn cmd_run(args: RunArgs) -> Result<(), Error> {
    let problem: ProblemSpec = args.problem.parse()?;
    let x0_sampler: X0Sampler = args.x0.parse()?;
    let format: TraceFormat = args.format.parse()?;
    let solver = args.solver.build(args.seed)?;
    let out = args.out.unwrap_or_else(|| PathBuf::from(format!("trace.{format}")));

    let spec = ExperimentSpec {
        problem,
        solvers: vec![solver],
        trials: 1,
        x0: x0_sampler,
        threshold: ThresholdRule::Absolute(f64::MIN),
        base_seed: args.seed,
    };
    spec.validate()?;
    let solver = &spec.solvers[0];

    print_pairs(&[
        ("problem".into(), spec.problem.to_string()),
        ("x0".into(), spec.x0.to_string()),
        ("out".into(), out.display().to_string()),
        ("format".into(), format.to_string()),
    ]);
    print_pairs(&solver.describe());

    let obj = spec.problem.build()?;
    let x0 = spec.starting_point(0);
    let trace = match solver.run(&obj, &x0) {
        Ok(t) => t,
        Err(e @ Error::Config(_)) => return Err(e),
        Err(e) => RunTrace::failed(solver.name.clone(), 0, &e),
    };
    export_traces(std::slice::from_ref(&trace), &out, format)?;
    let final_f = trace.final_value().map_or("none".to_string(), |f| f.to_string());
    println!(
        "final f = {final_f}, evals = {}, status = {}",
        trace.total_evals(),
        trace.status.as_str()
    );
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<(), Error> {
    let text = fs::read_to_string(&args.config)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", args.config.display())))?;
    let mut spec = parse_experiment(&text)?;
    if let Some(seed) = args.seed {
        spec.base_seed = seed;
    }
    if args.jobs == 0 {
        return Err(Error::Config("--jobs must be positive".into()));
    }

    print_pairs(&[
        ("problem".into(), spec.problem.to_string()),
        ("trials".into(), spec.trials.to_string()),
        ("x0".into(), spec.x0.to_string()),
        ("threshold".into(), spec.threshold.to_string()),
        ("seed".into(), spec.base_seed.to_string()),
        ("out".into(), args.out.display().to_string()),
        ("jobs".into(), args.jobs.to_string()),
    ]);
    for s in &spec.solvers {
        println!("\n[{}]", s.name);
        // Per-trial seeds replace the solver's own.
        let pairs: Vec<_> = s.describe().into_iter().filter(|(k, _)| k != "seed").collect();
        print_pairs(&pairs);
    }

    let traces = run_experiment(&spec, args.jobs)?;
    fs::create_dir_all(&args.out)?;
    export_traces(&traces, &args.out.join("traces.csv"), TraceFormat::Csv)?;
    export_traces(&traces, &args.out.join("traces.json"), TraceFormat::Json)?;

    let f_star = spec.problem.build()?.minimum_value();
    let summary = summarize(&spec, &traces, f_star)?;
    fs::write(args.out.join("summary.csv"), &summary)?;
    print!("\n{summary}");
    Ok(())
}

/// One row per solver: trials, successes, success fraction and the median
/// evaluations to threshold (failures count as infinite).
fn summarize(spec: &ExperimentSpec, traces: &[RunTrace], f_star: Option<f64>) -> Result<String, Error> {
    let outcomes = outcomes_from_traces(traces, &spec.threshold, f_star)?;
    let mut out = String::from("solver,trials,successes,success_fraction,median_evals\n");
    for s in &spec.solvers {
        let mut evals: Vec<f64> = outcomes
            .iter()
            .filter(|o| o.solver == s.name)
            .map(|o| o.evals.map_or(f64::INFINITY, |m| m as f64))
            .collect();
        evals.sort_by(f64::total_cmp);
        let n = evals.len();
        let successes = evals.iter().filter(|e| e.is_finite()).count();
        let median = if n == 0 {
            f64::NAN
        } else if n % 2 == 1 {
            evals[n / 2]
        } else {
            (evals[n / 2 - 1] + evals[n / 2]) / 2.0
        };
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            s.name,
            n,
            successes,
            successes as f64 / n.max(1) as f64,
            median
        ));
    }
    Ok(out)
}

fn trace_files(dir: &Path) -> Result<Vec<PathBuf>, Error> {
    if !dir.is_dir() {
        return Err(Error::Config(format!("trace directory {} does not exist", dir.display())));
    }
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "csv"))
        .collect();
    files.sort();
    Ok(files)
}

fn cmd_profile(args: ProfileArgs) -> Result<(), Error> {
    let rule: ThresholdRule = args.threshold.parse()?;
    let f_star = match &args.problem {
        Some(p) => p.parse::<ProblemSpec>()?.build()?.minimum_value(),
        None => args.fstar,
    };
    rule.validate(f_star)?;

    // stdout may carry the profile itself.
    eprint_pairs(&[
        ("dir".into(), args.dir.display().to_string()),
        ("threshold".into(), rule.to_string()),
        ("fstar".into(), f_star.map_or("none".into(), |f| f.to_string())),
        ("out".into(), args.out.as_ref().map_or("stdout".into(), |p| p.display().to_string())),
    ]);

    let mut traces = Vec::new();
    for path in trace_files(&args.dir)? {
        let text = fs::read_to_string(&path)?;
        // Summaries and earlier profiles share the directory; only trace files count.
        if text.lines().next().map(str::trim) != Some(CSV_HEADER) {
            continue;
        }
        let parsed = traces_from_csv(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        traces.extend(parsed);
    }
    let profile = performance_profile(&traces, &rule, f_star)?;
    let csv = profile.to_csv();
    match &args.out {
        Some(path) => fs::write(path, &csv)?,
        None => print!("{csv}"),
    }
    Ok(())
}
