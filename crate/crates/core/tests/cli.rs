use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const SMALL: &str = r#"{
  "teacher": { "width": 2, "seed": 1 },
  "student": { "width": 6, "input_dim": 3, "activation": "relu", "scale_rule": "inv_sqrt_width",
               "init": { "dist": "normal", "std": 1.0, "seed": 2 } },
  "data": { "n_train": 8, "n_test": 50, "seed": 3 },
  "flow": { "alpha": 2.0, "steps": 200 },
  "sweep": { "variable": "tau", "grid": [0.5, 1.0], "repeats": 2 },
  "kernel": { "grid_points": 7, "seeds": 3 }
}"#;

fn lazyflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lazyflow"))
        .args(args)
        .output()
        .unwrap()
}

fn write_config(dir: &Path, json: &str) -> PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, json).unwrap();
    path
}

fn run_ok(args: &[&str], out: &Path, extra: &[&str]) {
    let res = lazyflow(args);
    assert_eq!(
        res.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    for f in [
        "config-echo.json",
        "results.csv",
        "diagnostics.json",
        "summary.txt",
    ]
    .iter()
    .chain(extra)
    {
        assert!(out.join(f).exists(), "{f} missing after {args:?}");
    }
}

#[test]
fn every_command_writes_its_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let cfg = cfg.to_str().unwrap();
    let out = |name: &str| tmp.path().join(name);
    let o = out("run");
    run_ok(
        &["run", cfg, "--out", o.to_str().unwrap()],
        &o,
        &["trajectory.csv", "snapshots.bin"],
    );
    let o = out("sweep");
    run_ok(
        &["sweep", "--var", "alpha", cfg, "--out", o.to_str().unwrap()],
        &o,
        &[],
    );
    let rows = std::fs::read_to_string(o.join("results.csv")).unwrap();
    assert_eq!(rows.lines().count(), 5);
    assert!(rows.lines().skip(1).all(|l| l.starts_with("alpha,")));
    let o = out("diagnose");
    run_ok(
        &["diagnose", "--csv", cfg, "--out", o.to_str().unwrap()],
        &o,
        &["deviation.csv"],
    );
    let o = out("section");
    run_ok(
        &["kernel", "--section", cfg, "--out", o.to_str().unwrap()],
        &o,
        &[],
    );
    let header = std::fs::read_to_string(o.join("results.csv")).unwrap();
    assert!(header.starts_with("phi,K_limit,K_a,K_b,seed_"));
    let o = out("spectrum");
    run_ok(
        &["kernel", "--spectrum", cfg, "--out", o.to_str().unwrap()],
        &o,
        &[],
    );
}

#[test]
fn config_problems_exit_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = write_config(
        tmp.path(),
        &SMALL.replace(r#""width": 6"#, r#""width": -6"#),
    );
    let res = lazyflow(&[
        "run",
        bad.to_str().unwrap(),
        "--out",
        tmp.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("student.width"));
    let missing = tmp.path().join("nope.json");
    assert_eq!(
        lazyflow(&["run", missing.to_str().unwrap()]).status.code(),
        Some(1)
    );
    let cfg = write_config(tmp.path(), SMALL);
    assert_eq!(
        lazyflow(&["sweep", "--var", "depth", cfg.to_str().unwrap()])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        lazyflow(&["kernel", cfg.to_str().unwrap()]).status.code(),
        Some(1)
    );
    assert_eq!(lazyflow(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(lazyflow(&["--help"]).status.code(), Some(0));
}

#[test]
fn numerical_failures_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let json = SMALL.replace(
        r#""steps": 200"#,
        r#""steps": 200, "integrator": "euler", "step": { "fixed": 1000.0 }"#,
    );
    let cfg = write_config(tmp.path(), &json);
    let res = lazyflow(&[
        "run",
        cfg.to_str().unwrap(),
        "--out",
        tmp.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(
        res.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
}
