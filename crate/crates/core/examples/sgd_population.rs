//! Under-parameterized teacher-student training with mini-batch SGD on
//! fresh samples: a small initialization finds the teacher, a large one
//! stalls at the optimum of the tangent model.
//!
//! cargo run --release --example sgd_population [-- <least-squares samples>]

use lazyflow::diagnostics::{check_under_param_plateau, tangent_least_squares};
use lazyflow::experiments::{
    run_teacher_student, ExperimentConfig, RunSeeds, SweepVariable, Teacher, TeacherSampler,
    TeacherSpec,
};
use lazyflow::flow::Sampler;
use lazyflow::rng::{self, labels};

fn main() -> lazyflow::Result<()> {
    let base = ExperimentConfig::from_json_str(include_str!("configs/sgd_population.json"))?;
    let ls_samples: usize = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(20_000);

    let small = base.with_value(SweepVariable::Tau, 0.1);
    let large = base.with_value(SweepVariable::Tau, 3.0);
    let rich = run_teacher_student(&small, 0)?;
    let lazy = run_teacher_student(&large, 0)?;

    // Least-squares optimum of the tangent model at the lazy initialization.
    let seeds = RunSeeds::for_repeat(&large, 0);
    let teacher = Teacher::generate(&TeacherSpec {
        width: large.teacher.width,
        input_dim: large.student.input_dim,
        seed: seeds.teacher,
    })?;
    let holdout = TeacherSampler::new(teacher.clone(), seeds.data, large.data.n_test)?
        .holdout()
        .clone();
    let fit = teacher.sample(
        ls_samples,
        &mut rng::stream(seeds.data, labels::LEAST_SQUARES),
    )?;
    let (model, w0) = large.student.build_with_seed(seeds.init);
    let t = std::time::Instant::now();
    let ls = tangent_least_squares(&model, &w0, large.flow.alpha, &fit, &holdout, 1e-8, 2000)?;
    println!(
        "least squares on {ls_samples} samples: {} CG iterations, residual {:.1e}, {:.1?}",
        ls.iterations,
        ls.relative_residual,
        t.elapsed()
    );

    let report = check_under_param_plateau(&lazy.trajectory, &rich.trajectory, Some(ls.eval_loss));
    println!(
        "population loss, tau = 0.1   {:.4e}",
        report.nonlazy_final_loss
    );
    println!(
        "population loss, tau = 3     {:.4e}",
        report.lazy_final_loss
    );
    println!(
        "tangent least squares        {:.4e} (fit {:.4e})",
        ls.eval_loss, ls.train_loss
    );
    println!("lazy / rich                  {:.1}", report.gap_ratio);
    println!(
        "lazy vs optimum              {:.1}%",
        100.0 * report.relative_to_optimum.unwrap_or(f64::NAN)
    );
    Ok(())
}
