use crate::error::{check_dim, Axis, Result};
use crate::linalg;
use crate::loss::{objective_raw, Loss};
use crate::model::{check_compat, EvaluationSet, Model, ParamVector};

use super::{
    check_state, jacobian_norm, stop_reason, FlowConfig, Recorder, StepRule, StopReason,
    Trajectory, TrajectoryMeta,
};

/// Source of labelled mini-batches and of a fixed held-out sample used to
/// estimate the population loss.
pub trait Sampler {
    /// Batch for step `step`, with targets attached.
    fn batch(&mut self, step: usize, size: usize) -> Result<EvaluationSet>;
    fn holdout(&self) -> &EvaluationSet;
}

/// Every batch is the whole dataset, so SGD reduces to gradient descent.
#[derive(Debug, Clone)]
pub struct FixedDataset {
    set: EvaluationSet,
}

impl FixedDataset {
    pub fn new(set: EvaluationSet) -> Self {
        FixedDataset { set }
    }
}

impl Sampler for FixedDataset {
    fn batch(&mut self, _step: usize, _size: usize) -> Result<EvaluationSet> {
        Ok(self.set.clone())
    }

    fn holdout(&self) -> &EvaluationSet {
        &self.set
    }
}

/// Mini-batch SGD on `F_alpha` with the square loss against the batch
/// labels. Recorded samples carry the held-out loss and outputs; the step
/// count comes from `config.steps` (or `time / eta`).
///
/// The automatic step size is half of the gradient-flow rule.
pub fn run_sgd<M: Model + ?Sized, S: Sampler + ?Sized>(
    model: &M,
    w0: &ParamVector,
    sampler: &mut S,
    batch_size: usize,
    config: &FlowConfig,
) -> Result<Trajectory> {
    config.validate()?;
    let holdout = sampler.holdout().clone();
    check_compat(model, w0, &holdout)?;
    let holdout_loss = Loss::from_set(&holdout)?;
    check_dim(
        Axis::OutputDim,
        model.output_dim(),
        holdout_loss.target().k(),
    )?;
    let lip_h = match config.lip_h {
        Some(l) => l,
        None => jacobian_norm(model, w0, &holdout)?,
    };
    let mut cfg = config.clone();
    if let StepRule::Auto { c, max } = cfg.step {
        cfg.step = StepRule::Auto { c: c / 2.0, max };
    }
    let (eta, steps) = cfg.resolve(lip_h, 1.0)?;
    let alpha = config.alpha;

    let population = |w: &[f64]| objective_raw(model, &holdout_loss, &holdout, alpha, w);
    let mut rec = Recorder {
        set: &holdout,
        k: model.output_dim(),
        samples: Vec::new(),
        record: config.record,
    };
    let mut w = w0.to_vec();
    let first = population(&w);
    let initial_loss = first.loss;
    let initial_grad = linalg::norm(&first.gradient);
    rec.push(0, 0.0, &w, &first);
    let mut reason = StopReason::Horizon;
    let mut taken = 0;
    for step in 1..=steps {
        let batch = sampler.batch(step - 1, batch_size)?;
        let loss = Loss::from_set(&batch)?;
        let g = objective_raw(model, &loss, &batch, alpha, &w);
        linalg::axpy(-eta, &g.gradient, &mut w);
        taken = step;
        if step == steps || rec.record.keeps(step) {
            let t = step as f64 * eta;
            let eval = population(&w);
            check_state(t, &w, &eval, initial_loss)?;
            rec.push(step, t, &w, &eval);
            if let Some(r) = stop_reason(&config.stop, &eval, initial_grad) {
                reason = r;
                break;
            }
        }
    }
    Ok(Trajectory {
        samples: rec.samples,
        meta: TrajectoryMeta {
            config: config.clone(),
            model: model.describe(),
            alpha,
            step_size: eta,
            lip_h,
            steps_taken: taken,
            stop_reason: reason,
            seed: None,
        },
    })
}
