//! Test loss against the initialization scale tau in the teacher-student
//! setting, next to the linearized model at the largest tau.
//!
//! cargo run --release --example teacher_student_tau [-- <repeats> <out dir>]

use lazyflow::experiments::{
    summarize, sweep, sweep_summary, write_sweep, ExperimentConfig, SweepVariable,
};

fn main() -> lazyflow::Result<()> {
    let mut config =
        ExperimentConfig::from_json_str(include_str!("configs/teacher_student_tau.json"))?;
    let mut args = std::env::args().skip(1);
    let repeats = args.next().and_then(|s| s.parse().ok()).unwrap_or(2);
    let spec = config.sweep.as_mut().expect("config has a sweep");
    spec.repeats = repeats;
    let grid = spec.grid.clone();

    let rows = sweep(&config, SweepVariable::Tau, &grid, repeats)?;
    print!("{}", sweep_summary(&rows));

    let top = *grid.last().unwrap();
    let mut linearized = config.with_value(SweepVariable::Tau, top);
    linearized.linearized = true;
    let lin = summarize(&sweep(&linearized, SweepVariable::Tau, &[top], repeats)?);
    println!(
        "linearized model at tau = {top}: mean test loss {:.4e}",
        lin[0].mean_test_loss
    );

    if let Some(dir) = args.next() {
        write_sweep(std::path::Path::new(&dir), &config, &rows)?;
    }
    Ok(())
}
