//! Command-line behaviour: exit codes, report contents and determinism.

use std::fs;
use std::path::Path;
use std::process::Command;

use serde_json::Value;

fn run_in(dir: &Path, args: &[&str]) -> i32 {
    let mut argv = vec!["fkwave".to_string()];
    argv.extend(args.iter().map(|s| s.to_string()));
    argv.push("--out".into());
    argv.push(dir.to_string_lossy().into_owned());
    fkwave_cli::run(argv)
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn solve_main_run() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        run_in(dir.path(), &["solve", "--c2", "0.9", "--eps", "0.01"]),
        0
    );
    let r = report(dir.path());
    assert_eq!(r["status"], "ok");
    assert_eq!(r["schema_version"], 1);
    let res = r["result"]["stage2"]["diagnostics"]["residual_independent"]
        .as_f64()
        .unwrap();
    assert!(res <= 1e-8);
    assert_eq!(r["config"]["provenance"]["epsilon"], "flag");
    assert_eq!(r["config"]["provenance"]["points_per_unit"], "default");
    for f in [
        "fields.csv",
        "fields.json",
        "corrector.csv",
        "u.svg",
        "r.svg",
        "residual.svg",
    ] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn stage1_reports_bound_comparison() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run_in(dir.path(), &["stage1", "--c2", "0.95"]), 0);
    let r = report(dir.path());
    let cmp = &r["result"]["bound_comparison"];
    assert_eq!(cmp["bound_sup_r"], 0.257);
    assert_eq!(cmp["sup_r_within"], true);
    assert!(r["result"]["diagnostics"]["scaled_sup_r"].as_f64().unwrap() < 0.257);
}

#[test]
fn invalid_speed_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run_in(dir.path(), &["solve", "--c2", "0.5"]), 2);
    let r = report(dir.path());
    assert_eq!(r["error"]["name"], "InvalidParams");
}

#[test]
fn solver_error_exits_one_with_name() {
    let dir = tempfile::tempdir().unwrap();
    // At m = 16 the mollification window is below grid resolution.
    assert_eq!(run_in(dir.path(), &["solve", "--m", "16"]), 1);
    let r = report(dir.path());
    assert_eq!(r["status"], "error");
    assert_eq!(r["error"]["name"], "UnderResolved");
}

#[test]
fn reports_are_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["two-trans", "--x0", "12", "--m", "64", "--seed", "7"];
    assert_eq!(run_in(a.path(), &args), 0);
    assert_eq!(run_in(b.path(), &args), 0);
    let strip = |d: &Path| {
        let mut v = report(d);
        v["argv"] = Value::Null;
        v["config"]["out"] = Value::Null;
        serde_json::to_string(&v).unwrap()
    };
    assert_eq!(strip(a.path()), strip(b.path()));
    assert_eq!(
        fs::read(a.path().join("fields.csv")).unwrap(),
        fs::read(b.path().join("fields.csv")).unwrap()
    );
}

#[test]
fn validate_writes_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        run_in(
            dir.path(),
            &[
                "validate",
                "--eps",
                "0.02",
                "--t-final",
                "1",
                "--dt",
                "0.01"
            ]
        ),
        0
    );
    let text = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert!(text.starts_with("t,max_error,energy\n"));
    assert_eq!(text.lines().count(), 12);
    let r = report(dir.path());
    assert!(r["result"]["simulation"]["max_error"].as_f64().unwrap() < 1e-3);
}

#[test]
fn sweep_over_x0() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        run_in(
            dir.path(),
            &["sweep", "x0", "--values", "8,12", "--m", "64"]
        ),
        0
    );
    let r = report(dir.path());
    assert_eq!(r["result"]["entries"].as_array().unwrap().len(), 2);
    assert!(dir.path().join("sweep.svg").exists());
}

#[test]
fn sweep_entry_failure_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        run_in(dir.path(), &["sweep", "x0", "--values", "8,9", "--m", "64"]),
        1
    );
    let r = report(dir.path());
    assert_eq!(r["error"]["name"], "SweepEntryFailed");
    assert_eq!(r["result"]["entries"][1]["error"]["name"], "InvalidParams");
}

#[test]
fn dispersion_table() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run_in(dir.path(), &["dispersion"]), 0);
    let r = report(dir.path());
    assert_eq!(r["result"]["rows"].as_array().unwrap().len(), 5);
    assert!(dir.path().join("dispersion.csv").exists());
}

#[test]
fn named_check_target() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        run_in(dir.path(), &["check", "dispersion,orthogonality"]),
        0
    );
    let r = report(dir.path());
    assert_eq!(r["result"]["criteria"].as_array().unwrap().len(), 2);
    assert_eq!(run_in(dir.path(), &["check", "bogus"]), 2);
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_fkwave");
    let dir = tempfile::tempdir().unwrap();
    let status = Command::new(bin)
        .args(["solve", "--c2", "0.5", "--out"])
        .arg(dir.path())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
    let status = Command::new(bin)
        .args(["solve", "--bogus"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
    let status = Command::new(bin).arg("--help").output().unwrap().status;
    assert_eq!(status.code(), Some(0));
}
