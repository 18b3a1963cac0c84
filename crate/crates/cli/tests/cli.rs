use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ssd(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ssd"))
        .current_dir(dir)
        .env_remove("SSD_SEED")
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

const SMOKE: &[&str] = &[
    "run", "--problem", "nesterov:l=8,r=10,d=101", "--solver", "ssd", "--ell", "3", "--step", "armijo", "--budget",
    "20000", "--seed", "7",
];

const SWEEP: &str = "\
# two solvers, three trials
problem = nesterov:l=8,r=10,d=51
trials = 3
x0 = uniform:-0.5,0.5
threshold = fraction:0.5
seed = 4

[ssd-3]
solver = ssd
ell = 3
budget = 3000

[vr]
solver = vrssd
ell = 3
m = 5
eta = approx
budget = 3000
";

#[test]
fn run_smoke_writes_trace_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = ssd(dir.path(), SMOKE);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("seed = 7"));
    assert!(stdout.contains("sketch = haar"), "defaults are printed");
    let summary = stdout.lines().last().unwrap();
    assert!(summary.starts_with("final f = "));
    assert!(
        summary.ends_with("status = budget_exhausted") || summary.ends_with("status = target_reached"),
        "{summary}"
    );
    let csv = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert!(csv.starts_with("solver,trial,iter,evals,f,step,dirnorm\n"));
    let last_evals: u64 = csv.lines().last().unwrap().split(',').nth(3).unwrap().parse().unwrap();
    assert!(last_evals <= 20000);
}

#[test]
fn run_json_format() {
    let dir = tempfile::tempdir().unwrap();
    let out = ssd(
        dir.path(),
        &[
            "run", "--problem", "quadratic:d=10", "--x0", "gaussian:1", "--solver", "bfgs", "--iters", "5", "--format", "json",
            "--out", "t.json",
        ],
    );
    assert_eq!(code(&out), 0);
    let text = fs::read_to_string(dir.path().join("t.json")).unwrap();
    assert!(text.contains("\"status\": \"max_iters\""));
}

#[test]
fn invalid_configuration_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&ssd(dir.path(), &["run", "--solver", "ssd", "--ell", "0"])), 2);
    assert_eq!(code(&ssd(dir.path(), &["run", "--no-such-flag"])), 2);
    assert_eq!(code(&ssd(dir.path(), &["run", "--solver", "newton"])), 2);
    assert_eq!(code(&ssd(dir.path(), &["run", "--step", "fixed:-1"])), 2);
    assert_eq!(code(&ssd(dir.path(), &["run", "--problem", "quadratic:d=4", "--ell", "5"])), 2);
}

#[test]
fn seed_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_ssd"))
        .current_dir(dir.path())
        .env("SSD_SEED", "31")
        .args(["run", "--problem", "quadratic:d=5", "--iters", "3"])
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8(out.stdout).unwrap().contains("seed = 31"));
}

#[test]
fn repeated_run_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mut a = SMOKE.to_vec();
    a.extend(["--out", "a.csv"]);
    let mut b = SMOKE.to_vec();
    b.extend(["--out", "b.csv"]);
    assert_eq!(code(&ssd(dir.path(), &a)), 0);
    assert_eq!(code(&ssd(dir.path(), &b)), 0);
    assert_eq!(fs::read(dir.path().join("a.csv")).unwrap(), fs::read(dir.path().join("b.csv")).unwrap());
}

#[test]
fn sweep_emits_one_trace_per_solver_and_trial() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("exp.cfg"), SWEEP).unwrap();
    let out = ssd(dir.path(), &["sweep", "exp.cfg", "--out", "o"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("o/traces.csv")).unwrap();
    let mut keys: Vec<(String, String)> = csv
        .lines()
        .skip(1)
        .map(|l| {
            let mut it = l.split(',');
            (it.next().unwrap().to_string(), it.next().unwrap().to_string())
        })
        .collect();
    keys.dedup();
    assert_eq!(keys.len(), 6);

    let summary = fs::read_to_string(dir.path().join("o/summary.csv")).unwrap();
    let rows: Vec<&str> = summary.lines().collect();
    assert_eq!(rows[0], "solver,trials,successes,success_fraction,median_evals");
    assert_eq!(rows.len(), 3);
    assert!(rows[1].starts_with("ssd-3,3,"));
    assert!(rows[2].starts_with("vr,3,"));
}

#[test]
fn sweep_is_deterministic_across_job_counts() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("exp.cfg"), SWEEP).unwrap();
    assert_eq!(code(&ssd(dir.path(), &["sweep", "exp.cfg", "--out", "one", "--jobs", "1"])), 0);
    assert_eq!(code(&ssd(dir.path(), &["sweep", "exp.cfg", "--out", "four", "--jobs", "4"])), 0);
    assert_eq!(code(&ssd(dir.path(), &["sweep", "exp.cfg", "--out", "again", "--jobs", "4"])), 0);
    for file in ["traces.csv", "traces.json", "summary.csv"] {
        let one = fs::read(dir.path().join("one").join(file)).unwrap();
        assert_eq!(one, fs::read(dir.path().join("four").join(file)).unwrap(), "{file}");
        assert_eq!(one, fs::read(dir.path().join("again").join(file)).unwrap(), "{file}");
    }
}

#[test]
fn sweep_config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("empty.cfg"), "problem = quadratic:d=4\ntrials = 2\n").unwrap();
    assert_eq!(code(&ssd(dir.path(), &["sweep", "empty.cfg"])), 2);

    fs::write(dir.path().join("bad.cfg"), "problem = quadratic:d=4\n\n[a]\nsolver = ssd\nell = three\n").unwrap();
    let out = ssd(dir.path(), &["sweep", "bad.cfg"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 5"));

    assert_eq!(code(&ssd(dir.path(), &["sweep", "missing.cfg"])), 2);
}

fn write_trace(dir: &Path, name: &str, rows: &[&str]) {
    let mut text = String::from("solver,trial,iter,evals,f,step,dirnorm\n");
    for r in rows {
        text.push_str(r);
        text.push('\n');
    }
    fs::write(dir.join(name), text).unwrap();
}

#[test]
fn profile_single_success_is_one_row() {
    let dir = tempfile::tempdir().unwrap();
    write_trace(dir.path(), "a.csv", &["ssd,0,0,0,10,0,0", "ssd,0,1,4,0.5,1,1"]);
    let out = ssd(dir.path(), &["profile", ".", "--threshold", "absolute:1"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "solver,tau,rho\nssd,1,1\n");
}

#[test]
fn profile_mixed_success() {
    let dir = tempfile::tempdir().unwrap();
    write_trace(
        dir.path(),
        "t.csv",
        &[
            "a,0,0,0,10,0,0",
            "a,0,1,100,0,1,1",
            "b,0,0,0,10,0,0",
            "b,0,1,100,0,1,1",
            "a,1,0,0,10,0,0",
            "a,1,1,200,0,1,1",
            "b,1,0,0,10,0,0",
            "b,1,1,100,5,1,1",
        ],
    );
    fs::write(dir.path().join("notes.csv"), "unrelated,header\n1,2\n").unwrap();
    let out = ssd(dir.path(), &["profile", ".", "--threshold", "fraction:0.9", "--fstar", "0", "--out", "p.csv"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    // Trial 1: b never reaches 1.0, so a is best there.
    assert_eq!(fs::read_to_string(dir.path().join("p.csv")).unwrap(), "solver,tau,rho\na,1,1\nb,1,0.5\n");
}

#[test]
fn profile_errors() {
    let dir = tempfile::tempdir().unwrap();
    write_trace(dir.path(), "a.csv", &["ssd,0,0,0,10,0,0", "ssd,0,1,4,5,1,1"]);
    let out = ssd(dir.path(), &["profile", ".", "--threshold", "absolute:1"]);
    assert_eq!(code(&out), 1);
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
    assert_eq!(code(&ssd(dir.path(), &["profile", "does-not-exist", "--fstar", "0"])), 2);
    assert_eq!(code(&ssd(dir.path(), &["profile", ".", "--threshold", "fraction:0.5"])), 2);
}

#[test]
fn profile_of_a_sweep_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("exp.cfg"), SWEEP).unwrap();
    assert_eq!(code(&ssd(dir.path(), &["sweep", "exp.cfg", "--out", "o", "--jobs", "2"])), 0);
    let args = ["profile", "o", "--problem", "nesterov:l=8,r=10,d=51", "--threshold", "fraction:0.5"];
    let first = ssd(dir.path(), &args);
    assert_eq!(code(&first), 0, "{}", String::from_utf8_lossy(&first.stderr));
    assert_eq!(first.stdout, ssd(dir.path(), &args).stdout);
}
