use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::ScaleRule;

use super::config::{ExperimentConfig, SweepVariable};
use super::run::{run_teacher_student, RunOutcome};

/// One run of a sweep.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub variable: SweepVariable,
    pub value: f64,
    #[serde(flatten)]
    pub outcome: RunOutcome,
}

/// Mean and spread of the runs at one grid value.
#[derive(Debug, Clone, Serialize)]
pub struct SweepSummary {
    pub value: f64,
    pub runs: usize,
    pub converged: usize,
    pub mean_test_loss: f64,
    pub std_test_loss: f64,
    pub mean_best_test_loss: f64,
    pub mean_stability: Option<f64>,
    pub mean_displacement: f64,
}

/// Runs every `(value, repeat)` pair of the grid. Jobs are spread over the
/// rayon pool; the result order is grid-major, then by repeat, whatever
/// the thread count.
pub fn sweep(
    config: &ExperimentConfig,
    variable: SweepVariable,
    grid: &[f64],
    repeats: usize,
) -> Result<Vec<SweepRow>> {
    if grid.is_empty() || repeats == 0 {
        return Err(Error::invalid(
            "a sweep needs a non-empty grid and at least one repeat",
        ));
    }
    let configs: Vec<ExperimentConfig> = grid
        .iter()
        .map(|v| config.with_value(variable, *v))
        .collect();
    for c in &configs {
        c.validate()?;
    }
    let jobs: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|g| (0..repeats).map(move |r| (g, r)))
        .collect();
    jobs.par_iter()
        .map(|&(g, r)| {
            Ok(SweepRow {
                variable,
                value: grid[g],
                outcome: run_teacher_student(&configs[g], r)?,
            })
        })
        .collect()
}

/// The sweep described by `config.sweep`, with `variable` overriding the
/// configured one when given.
pub fn sweep_from_config(
    config: &ExperimentConfig,
    variable: Option<SweepVariable>,
) -> Result<Vec<SweepRow>> {
    let spec = config
        .sweep
        .as_ref()
        .ok_or_else(|| Error::config("sweep", "the config has no sweep section"))?;
    sweep(
        config,
        variable.unwrap_or(spec.variable),
        &spec.grid,
        spec.repeats,
    )
}

/// Width sweep under one output normalization.
#[derive(Debug, Clone, Serialize)]
pub struct WidthSweep {
    pub scale_rule: ScaleRule,
    pub rows: Vec<SweepRow>,
}

/// Sweeps the student width `m` once per normalization `alpha(m)` in
/// `rules`, with the same repeats (hence the same teachers, data and
/// initialization seeds) for every rule.
pub fn sweep_width(
    config: &ExperimentConfig,
    rules: &[ScaleRule],
    widths: &[usize],
    repeats: usize,
) -> Result<Vec<WidthSweep>> {
    let grid: Vec<f64> = widths.iter().map(|&m| m as f64).collect();
    rules
        .iter()
        .map(|&rule| {
            let mut c = config.clone();
            c.student.scale_rule = rule;
            Ok(WidthSweep {
                scale_rule: rule,
                rows: sweep(&c, SweepVariable::M, &grid, repeats)?,
            })
        })
        .collect()
}

/// Per-value aggregates, in grid order.
pub fn summarize(rows: &[SweepRow]) -> Vec<SweepSummary> {
    let mut values: Vec<f64> = Vec::new();
    for r in rows {
        if !values.contains(&r.value) {
            values.push(r.value);
        }
    }
    values
        .into_iter()
        .map(|value| {
            let runs: Vec<&RunOutcome> = rows
                .iter()
                .filter(|r| r.value == value)
                .map(|r| &r.outcome)
                .collect();
            let n = runs.len() as f64;
            let mean = |f: &dyn Fn(&RunOutcome) -> f64| runs.iter().map(|o| f(o)).sum::<f64>() / n;
            let mean_test = mean(&|o| o.test_loss);
            let var = runs
                .iter()
                .map(|o| (o.test_loss - mean_test).powi(2))
                .sum::<f64>()
                / (n - 1.0).max(1.0);
            let stab: Vec<f64> = runs.iter().filter_map(|o| o.stability).collect();
            SweepSummary {
                value,
                runs: runs.len(),
                converged: runs.iter().filter(|o| o.converged).count(),
                mean_test_loss: mean_test,
                std_test_loss: var.sqrt(),
                mean_best_test_loss: mean(&|o| o.best_test_loss),
                mean_stability: (!stab.is_empty())
                    .then(|| stab.iter().sum::<f64>() / stab.len() as f64),
                mean_displacement: mean(&|o| o.relative_displacement),
            }
        })
        .collect()
}
