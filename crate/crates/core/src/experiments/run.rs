use serde::Serialize;

use crate::diagnostics::{kappa, stability_of_activations};
use crate::error::{Error, Result};
use crate::flow::{integrate_flow, run_sgd, StopReason, Trajectory};
use crate::linearize::build_tangent;
use crate::loss::{scaled_objective, Loss};
use crate::model::{Activation, EvaluationSet, Scaled};
use crate::rng::{self, labels};

use super::config::{ExperimentConfig, Student, TargetSource};
use super::teacher::{Teacher, TeacherSampler, TeacherSpec};

/// Seeds actually used by one run, after per-repeat derivation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RunSeeds {
    pub teacher: u64,
    pub data: u64,
    pub init: u64,
}

impl RunSeeds {
    /// Repeat `r` of `config`. The same repeat index gives the same seeds
    /// whatever the swept value, so grid points share teacher, data and
    /// initialization noise.
    pub fn for_repeat(config: &ExperimentConfig, repeat: usize) -> Self {
        let r = repeat as u64;
        RunSeeds {
            teacher: rng::derive_seed(config.teacher.seed, r),
            data: rng::derive_seed(config.data.seed, r),
            init: rng::derive_seed(config.student.init.seed, r),
        }
    }
}

/// Summary of one teacher-student run.
#[derive(Debug, Clone, Serialize)]
pub struct RunOutcome {
    pub repeat: usize,
    pub seeds: RunSeeds,
    /// Final training loss (absent for SGD, which has no fixed sample).
    pub train_loss: Option<f64>,
    /// Final loss on the test sample (the held-out sample for SGD).
    pub test_loss: f64,
    /// Smallest test loss over the recorded states.
    pub best_test_loss: f64,
    /// Fraction of unchanged ReLU states on the test inputs.
    pub stability: Option<f64>,
    /// Scale criterion of `alpha h` at initialization.
    pub kappa: Option<f64>,
    /// `||w_T - w_0|| / ||w_0||`.
    pub relative_displacement: f64,
    pub step_size: f64,
    pub steps: usize,
    pub stop_reason: StopReason,
    /// `false` when the budget ran out before any stop rule fired.
    pub converged: bool,
    #[serde(skip)]
    pub trajectory: Trajectory,
}

/// Training and test samples of one run.
#[derive(Debug, Clone)]
pub struct RunData {
    pub teacher: Teacher,
    pub train: EvaluationSet,
    pub test: EvaluationSet,
}

impl RunData {
    pub fn generate(config: &ExperimentConfig, seeds: RunSeeds) -> Result<Self> {
        let teacher = Teacher::generate(&TeacherSpec {
            width: config.teacher.width,
            input_dim: config.student.input_dim,
            seed: seeds.teacher,
        })?;
        let mut train_rng = rng::stream(seeds.data, labels::TRAIN_INPUTS);
        let train = match config.loss.target_source {
            TargetSource::Teacher => teacher.sample(config.data.n_train, &mut train_rng)?,
            TargetSource::Explicit => {
                let pts = rng::sphere_points(
                    &mut train_rng,
                    config.data.n_train,
                    config.student.input_dim,
                );
                let targets =
                    config.loss.targets.clone().ok_or_else(|| {
                        Error::config("loss.targets", "explicit targets are missing")
                    })?;
                EvaluationSet::new(pts)?.with_targets(targets, config.student.output_dim)?
            }
        };
        let test = teacher.sample(
            config.data.n_test,
            &mut rng::stream(seeds.data, labels::TEST_INPUTS),
        )?;
        Ok(RunData {
            teacher,
            train,
            test,
        })
    }
}

/// Trains the configured student (or its tangent model) on teacher data.
pub fn run_teacher_student(config: &ExperimentConfig, repeat: usize) -> Result<RunOutcome> {
    config.validate()?;
    let seeds = RunSeeds::for_repeat(config, repeat);
    let data = RunData::generate(config, seeds)?;
    let (student, w0) = config.student.build_with_seed(seeds.init);
    let model: Student = if config.linearized {
        Box::new(build_tangent(student, &w0, &data.train)?)
    } else {
        student
    };
    let alpha = config.flow.alpha;

    let kappa_value = if config.diagnostics.kappa {
        let n = config.diagnostics.kappa_points.min(data.train.len()).max(1);
        let rows: Vec<usize> = (0..n).collect();
        let subset = data.train.select(&rows)?;
        let loss = Loss::from_set(&subset)?;
        let est = config.diagnostics.estimator.with_seed(seeds.init);
        match kappa(&Scaled::new(&model, alpha), &w0, &loss, &subset, &est) {
            Ok(k) => Some(k),
            Err(Error::CriticalInitialization(_)) => None,
            Err(e) => return Err(e),
        }
    } else {
        None
    };

    let (trajectory, test) = match &config.sgd {
        Some(sgd) => {
            let mut sampler =
                TeacherSampler::new(data.teacher.clone(), seeds.data, config.data.n_test)?;
            let test = sampler_holdout(&sampler);
            (
                run_sgd(&model, &w0, &mut sampler, sgd.batch_size, &config.flow)?,
                test,
            )
        }
        None => {
            let loss = Loss::from_set(&data.train)?;
            (
                integrate_flow(&model, &loss, &data.train, &w0, &config.flow)?,
                data.test.clone(),
            )
        }
    };
    let mut trajectory = trajectory;
    trajectory.meta.seed = Some(seeds.init);

    let test_loss_fn = Loss::from_set(&test)?;
    let test_loss_at = |w: &[f64]| -> Result<f64> {
        Ok(scaled_objective(&model, &test_loss_fn, &test, alpha, w)?.loss)
    };
    let last = trajectory.last();
    let (train_loss, test_loss, best_test_loss) = if config.sgd.is_some() {
        let best = trajectory
            .samples
            .iter()
            .map(|s| s.loss)
            .fold(f64::INFINITY, f64::min);
        (None, last.loss, best)
    } else {
        let mut best = f64::INFINITY;
        for s in &trajectory.samples {
            best = best.min(test_loss_at(&s.w)?);
        }
        (Some(last.loss), test_loss_at(&last.w)?, best)
    };
    let stability = if model.activation() == Activation::Relu {
        Some(stability_of_activations(&model, &w0, &last.w, &test)?)
    } else {
        None
    };
    let w0_norm = w0.norm();
    let relative_displacement = if w0_norm > 0.0 {
        w0.distance(&last.w) / w0_norm
    } else {
        f64::INFINITY
    };
    let stop_reason = trajectory.meta.stop_reason;
    Ok(RunOutcome {
        repeat,
        seeds,
        train_loss,
        test_loss,
        best_test_loss,
        stability,
        kappa: kappa_value,
        relative_displacement,
        step_size: trajectory.meta.step_size,
        steps: trajectory.meta.steps_taken,
        stop_reason,
        converged: stop_reason != StopReason::Horizon,
        trajectory,
    })
}

fn sampler_holdout(sampler: &TeacherSampler) -> EvaluationSet {
    crate::flow::Sampler::holdout(sampler).clone()
}
