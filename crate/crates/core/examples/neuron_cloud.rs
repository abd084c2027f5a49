//! Trajectories of the units of a two-layer ReLU network on 2-D inputs,
//! as points |b| a. Small tau: units travel to the teacher directions.
//! Large tau: they barely move.
//!
//! cargo run --release --example neuron_cloud [-- <out dir>]

use lazyflow::experiments::{
    export_neuron_cloud, neuron_cloud, run_teacher_student, ExperimentConfig, SweepVariable,
};

fn main() -> lazyflow::Result<()> {
    let base = ExperimentConfig::from_json_str(include_str!("configs/teacher_student_small.json"))?;
    let out = std::env::args().nth(1);
    for tau in [0.1, 2.0] {
        let config = base.with_value(SweepVariable::Tau, tau);
        let run = run_teacher_student(&config, 0)?;
        let (student, _) = config.student.build_with_seed(run.seeds.init);
        let points = neuron_cloud(student.as_ref(), &run.trajectory)?;
        let (t0, t1) = (run.trajectory.initial().t, run.trajectory.last().t);
        let radius = |t: f64| -> f64 {
            points
                .iter()
                .filter(|p| p.t == t)
                .map(|p| p.x.hypot(p.y))
                .fold(0.0, f64::max)
        };
        println!(
            "tau = {tau}: train {:.2e}, test {:.2e}, displacement {:.3}, largest unit {:.3} -> {:.3}",
            run.train_loss.unwrap_or(f64::NAN),
            run.test_loss,
            run.relative_displacement,
            radius(t0),
            radius(t1)
        );
        if let Some(dir) = &out {
            std::fs::create_dir_all(dir)?;
            let path = std::path::Path::new(dir).join(format!("cloud_tau_{tau}.csv"));
            export_neuron_cloud(student.as_ref(), &run.trajectory, &path)?;
        }
    }
    Ok(())
}
