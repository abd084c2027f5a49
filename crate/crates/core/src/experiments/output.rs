use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::Result;
use crate::flow::{write_snapshots, write_trajectory_csv, TrajectoryMeta};

use super::config::ExperimentConfig;
use super::run::RunOutcome;
use super::sweep::{summarize, SweepRow};

#[derive(Serialize)]
struct ResultRecord<'a> {
    variable: &'a str,
    value: Option<f64>,
    repeat: usize,
    teacher_seed: u64,
    data_seed: u64,
    init_seed: u64,
    train_loss: Option<f64>,
    test_loss: f64,
    best_test_loss: f64,
    stability: Option<f64>,
    kappa: Option<f64>,
    relative_displacement: f64,
    step_size: f64,
    steps: usize,
    stop_reason: &'static str,
    converged: &'static str,
}

impl<'a> ResultRecord<'a> {
    fn new(variable: &'a str, value: Option<f64>, o: &RunOutcome) -> Self {
        ResultRecord {
            variable,
            value,
            repeat: o.repeat,
            teacher_seed: o.seeds.teacher,
            data_seed: o.seeds.data,
            init_seed: o.seeds.init,
            train_loss: o.train_loss,
            test_loss: o.test_loss,
            best_test_loss: o.best_test_loss,
            stability: o.stability,
            kappa: o.kappa,
            relative_displacement: o.relative_displacement,
            step_size: o.step_size,
            steps: o.steps,
            stop_reason: stop_name(o),
            converged: if o.converged {
                "converged"
            } else {
                "unconverged"
            },
        }
    }
}

fn stop_name(o: &RunOutcome) -> &'static str {
    use crate::flow::StopReason::*;
    match o.stop_reason {
        Horizon => "horizon",
        LossBelow => "loss_below",
        GradBelow => "grad_below",
        GradRelBelow => "grad_rel_below",
    }
}

fn write_results<'a>(path: &Path, records: impl Iterator<Item = ResultRecord<'a>>) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path)?;
    for r in records {
        wtr.serialize(r)?;
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct RunDiagnostics<'a> {
    outcome: &'a RunOutcome,
    trajectory: &'a TrajectoryMeta,
}

/// Writes `config-echo.json`, `results.csv`, `diagnostics.json`,
/// `summary.txt`, `trajectory.csv` and `snapshots.bin` into `dir`.
pub fn write_run(dir: &Path, config: &ExperimentConfig, outcome: &RunOutcome) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("config-echo.json"), config.to_json()?)?;
    write_results(
        &dir.join("results.csv"),
        std::iter::once(ResultRecord::new("none", None, outcome)),
    )?;
    let diag = RunDiagnostics {
        outcome,
        trajectory: &outcome.trajectory.meta,
    };
    fs::write(
        dir.join("diagnostics.json"),
        serde_json::to_string_pretty(&diag)?,
    )?;
    fs::write(dir.join("summary.txt"), run_summary(outcome))?;
    write_trajectory_csv(&outcome.trajectory, &dir.join("trajectory.csv"))?;
    write_snapshots(&outcome.trajectory, &dir.join("snapshots.bin"))?;
    Ok(())
}

/// Writes `config-echo.json`, `results.csv`, `diagnostics.json` (the
/// per-value aggregates) and `summary.txt` into `dir`.
pub fn write_sweep(dir: &Path, config: &ExperimentConfig, rows: &[SweepRow]) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("config-echo.json"), config.to_json()?)?;
    write_results(
        &dir.join("results.csv"),
        rows.iter()
            .map(|r| ResultRecord::new(r.variable.name(), Some(r.value), &r.outcome)),
    )?;
    let summary = summarize(rows);
    fs::write(
        dir.join("diagnostics.json"),
        serde_json::to_string_pretty(&summary)?,
    )?;
    fs::write(dir.join("summary.txt"), sweep_summary(rows))?;
    Ok(())
}

pub fn run_summary(o: &RunOutcome) -> String {
    let mut s = String::new();
    if let Some(l) = o.train_loss {
        let _ = writeln!(s, "train loss      {l:.6e}");
    }
    let _ = writeln!(s, "test loss       {:.6e}", o.test_loss);
    let _ = writeln!(s, "best test loss  {:.6e}", o.best_test_loss);
    if let Some(st) = o.stability {
        let _ = writeln!(s, "stability       {st:.4}");
    }
    if let Some(k) = o.kappa {
        let _ = writeln!(s, "kappa           {k:.4e}");
    }
    let _ = writeln!(s, "displacement    {:.4e}", o.relative_displacement);
    let _ = writeln!(
        s,
        "steps           {} (step size {:.3e}, {})",
        o.steps,
        o.step_size,
        stop_name(o)
    );
    if !o.converged {
        let _ = writeln!(
            s,
            "unconverged: the step budget ran out before any stop rule fired"
        );
    }
    s
}

pub fn sweep_summary(rows: &[SweepRow]) -> String {
    let mut s = String::new();
    let var = rows.first().map_or("value", |r| r.variable.name());
    let _ = writeln!(
        s,
        "{var:>10}  {:>5}  {:>12}  {:>12}  {:>12}  {:>9}  {:>9}",
        "runs", "test loss", "std", "best test", "stability", "converged"
    );
    for a in summarize(rows) {
        let stab = a
            .mean_stability
            .map_or("-".to_string(), |v| format!("{v:.4}"));
        let _ = writeln!(
            s,
            "{:>10.4e}  {:>5}  {:>12.4e}  {:>12.4e}  {:>12.4e}  {:>9}  {:>6}/{}",
            a.value,
            a.runs,
            a.mean_test_loss,
            a.std_test_loss,
            a.mean_best_test_loss,
            stab,
            a.converged,
            a.runs
        );
    }
    s
}
