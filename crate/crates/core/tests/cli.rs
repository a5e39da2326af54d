use std::fs;
use std::path::Path;
use std::process::Command;

use clap::Parser;
use fracperim::analysis::comparison_experiment;
use fracperim::cli::{self, RunConfig, EXIT_INVALID, EXIT_NONCONVERGENCE, EXIT_OK};
use fracperim::energy::energy_profile;
use fracperim::io::{profile_csv, report_csv, Record};
use fracperim::minimize::minimize;

fn argv(out: &Path, args: &[&str]) -> Vec<String> {
    let mut v = vec!["fracperim".to_string(), "--out".into(), out.display().to_string()];
    v.extend(args.iter().map(|a| a.to_string()));
    v
}

fn record(dir: &Path) -> Record {
    Record::parse(&fs::read_to_string(dir.join("record.txt")).unwrap()).unwrap()
}

#[test]
fn energy_command_reproduces_the_library_call() {
    let dir = tempfile::tempdir().unwrap();
    let args = argv(dir.path(), &["energy", "--profile", "cyl:0.25", "--n", "3", "--s", "0.5"]);
    assert_eq!(cli::run(&args), EXIT_OK);
    let cfg = RunConfig::try_parse_from(&args).unwrap();
    let c = &cfg.common;
    let lib = energy_profile(&c.profile("cyl:0.25").unwrap(), &c.quad().unwrap()).unwrap();
    let rec = record(dir.path());
    assert_eq!(rec.get("energy.value").unwrap().parse::<f64>().unwrap(), lib.value);
    assert_eq!(rec.get("energy.error").unwrap().parse::<f64>().unwrap(), lib.error);
    assert_eq!(rec.get("energy.method"), Some("quadrature"));
}

#[test]
fn minimize_command_reproduces_the_library_call() {
    let dir = tempfile::tempdir().unwrap();
    let args = argv(
        dir.path(),
        &["--grid", "8", "minimize", "--mu", "0.02", "--restarts", "2", "--seed", "4"],
    );
    let code = cli::run(&args);
    let cfg = RunConfig::try_parse_from(&args).unwrap();
    let res = minimize(&cfg.minimize_config().unwrap()).unwrap();
    assert_eq!(code, if res.converged { EXIT_OK } else { EXIT_NONCONVERGENCE });
    assert_eq!(fs::read_to_string(dir.path().join("profile.csv")).unwrap(), profile_csv(&res.profile));
    let trace = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), res.energy_trace.len() + 1);
    assert!(trace.starts_with("iter,energy,volume_residual,grad_norm\n"));
}

#[test]
fn comparison_experiment_reproduces_the_library_call() {
    let dir = tempfile::tempdir().unwrap();
    let args = argv(
        dir.path(),
        &["experiment", "comparison", "--profile", "cyl:0.2", "--profile", "rand:3:8", "--radii", "0.2,0.1"],
    );
    assert_eq!(cli::run(&args), EXIT_OK);
    let cfg = RunConfig::try_parse_from(&args).unwrap();
    let c = &cfg.common;
    let profiles = vec![c.profile("cyl:0.2").unwrap(), c.profile("rand:3:8").unwrap()];
    let r = comparison_experiment(&profiles, &[0.2, 0.1], &c.quad().unwrap()).unwrap();
    assert_eq!(fs::read_to_string(dir.path().join("comparison.csv")).unwrap(), report_csv(&r));
    assert_eq!(record(dir.path()).get("summary"), Some("comparison: all 4 checks passed"));
}

#[test]
fn deficit_experiment_writes_mu_deficit_error_columns() {
    let dir = tempfile::tempdir().unwrap();
    let args = argv(
        dir.path(),
        &["experiment", "deficit", "--mu", "1e-2,5e-3", "--m-ref", "10", "--max-iters", "15", "--restarts", "1"],
    );
    let code = cli::run(&args);
    assert!(code == EXIT_OK || code == EXIT_NONCONVERGENCE);
    let table = fs::read_to_string(dir.path().join("deficit.csv")).unwrap();
    let header = table.lines().nth(1).unwrap();
    assert!(header.starts_with("mu,deficit,deficit_error"));
    assert_eq!(table.lines().count(), 4);
    let summary = Record::parse(&fs::read_to_string(dir.path().join("deficit.txt")).unwrap()).unwrap();
    assert!(summary.get("fit.c_fit").unwrap().parse::<f64>().unwrap().is_finite());
}

#[test]
fn exhausted_iterations_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let args = argv(dir.path(), &["--grid", "8", "minimize", "--mu", "0.02", "--max-iters", "1", "--restarts", "1"]);
    assert_eq!(cli::run(&args), EXIT_NONCONVERGENCE);
    assert!(dir.path().join("profile.csv").exists());
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_fracperim");
    let code = |args: &[&str]| Command::new(bin).args(args).output().unwrap().status.code();
    assert_eq!(code(&["--help"]), Some(EXIT_OK));
    assert_eq!(code(&["--no-such-flag"]), Some(EXIT_INVALID));
    assert_eq!(code(&["energy"]), Some(EXIT_INVALID));
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().display().to_string();
    let run = Command::new(bin)
        .args(["--out", &out, "pi-term", "--profile", "cyl:0.1"])
        .output()
        .unwrap();
    assert_eq!(run.status.code(), Some(EXIT_OK));
    let line = String::from_utf8(run.stdout).unwrap();
    assert!(line.starts_with("pi-term "), "{line}");
    assert_eq!(line.lines().count(), 1);
}
