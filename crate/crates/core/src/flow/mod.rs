//! Gradient flows of `F_alpha` and of its linearization, gradient descent
//! and mini-batch SGD, recorded as [`Trajectory`] values.

mod export;
mod kernel_flow;
mod sgd;

pub use export::{read_snapshots, write_snapshots, write_trajectory_csv};
pub use kernel_flow::{integrate_kernel_flow, KernelTrajectory};
pub use sgd::{run_sgd, FixedDataset, Sampler};

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Axis, Error, Result};
use crate::linalg;
use crate::linearize::TangentModel;
use crate::loss::{check_alpha, objective_raw, Loss, ObjectiveEval};
use crate::model::{check_compat, jacobian, EvaluationSet, Model, OutputPoint, ParamVector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    /// One gradient evaluation per step: plain gradient descent.
    Euler,
    Rk4,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    Fixed(f64),
    /// `eta = c / (M Lip(h)^2)`, optionally capped at `max`.
    Auto {
        c: f64,
        max: Option<f64>,
    },
}

impl Default for StepRule {
    fn default() -> Self {
        StepRule::Auto { c: 0.5, max: None }
    }
}

/// Which integrator steps end up in the trajectory. The first and last
/// states are always recorded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordStride {
    Dense,
    Every(usize),
    /// Roughly `per_decade` samples per decade of step count.
    Log {
        per_decade: usize,
    },
}

impl Default for RecordStride {
    fn default() -> Self {
        RecordStride::Log { per_decade: 20 }
    }
}

impl RecordStride {
    fn keeps(self, step: usize) -> bool {
        match self {
            RecordStride::Dense => true,
            RecordStride::Every(n) => n == 0 || step.is_multiple_of(n),
            RecordStride::Log { per_decade } => {
                if step < 10 {
                    return true;
                }
                let per_decade = per_decade.max(1) as f64;
                let a = ((step as f64).log10() * per_decade).floor();
                let b = (((step - 1) as f64).log10() * per_decade).floor();
                a != b
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StopRule {
    /// Stop once `R(alpha h(w))` falls below this value.
    pub loss_below: Option<f64>,
    /// Stop once `||grad F_alpha||` falls below this value.
    pub grad_below: Option<f64>,
    /// Stop once `||grad F_alpha||` falls below this fraction of its
    /// initial value.
    pub grad_rel_below: Option<f64>,
}

/// Settings for one integration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowConfig {
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Flow time `T`.
    #[serde(default)]
    pub time: Option<f64>,
    /// Iteration budget `K`.
    #[serde(default)]
    pub steps: Option<usize>,
    #[serde(default)]
    pub step: StepRule,
    #[serde(default = "default_integrator")]
    pub integrator: Integrator,
    #[serde(default)]
    pub record: RecordStride,
    #[serde(default)]
    pub stop: StopRule,
    /// `Lip(h)` used by the auto step rule; estimated as `||Dh(w0)||`
    /// when absent.
    #[serde(default)]
    pub lip_h: Option<f64>,
}

fn default_alpha() -> f64 {
    1.0
}

fn default_integrator() -> Integrator {
    Integrator::Rk4
}

impl FlowConfig {
    pub fn new(alpha: f64) -> Self {
        FlowConfig {
            alpha,
            time: None,
            steps: None,
            step: StepRule::default(),
            integrator: Integrator::Rk4,
            record: RecordStride::default(),
            stop: StopRule::default(),
            lip_h: None,
        }
    }

    pub fn with_time(mut self, t: f64) -> Self {
        self.time = Some(t);
        self
    }

    pub fn with_steps(mut self, k: usize) -> Self {
        self.steps = Some(k);
        self
    }

    pub fn with_step(mut self, step: StepRule) -> Self {
        self.step = step;
        self
    }

    pub fn with_integrator(mut self, integrator: Integrator) -> Self {
        self.integrator = integrator;
        self
    }

    pub fn with_record(mut self, record: RecordStride) -> Self {
        self.record = record;
        self
    }

    pub fn with_stop(mut self, stop: StopRule) -> Self {
        self.stop = stop;
        self
    }

    pub fn with_lip_h(mut self, lip: f64) -> Self {
        self.lip_h = Some(lip);
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        if self.time.is_none() && self.steps.is_none() {
            return Err(Error::invalid("flow needs a horizon: time, steps or both"));
        }
        if let Some(t) = self.time {
            if !(t > 0.0) || !t.is_finite() {
                return Err(Error::invalid(format!("horizon must be positive, got {t}")));
            }
        }
        if self.steps == Some(0) {
            return Err(Error::invalid("iteration budget must be at least one step"));
        }
        match self.step {
            StepRule::Fixed(eta) if !(eta > 0.0) || !eta.is_finite() => Err(Error::invalid(
                format!("step size must be positive, got {eta}"),
            )),
            StepRule::Auto { c, .. } if !(c > 0.0 && c <= 1.0) => Err(Error::invalid(format!(
                "auto step factor must lie in (0, 1], got {c}"
            ))),
            StepRule::Auto { max: Some(m), .. } if !(m > 0.0) => Err(Error::invalid(format!(
                "step cap must be positive, got {m}"
            ))),
            _ => Ok(()),
        }
    }

    /// Step size and number of steps for the given `Lip(h)` and loss
    /// smoothness `M`.
    pub fn resolve(&self, lip_h: f64, smoothness: f64) -> Result<(f64, usize)> {
        self.validate()?;
        let auto = |c: f64, max: Option<f64>| -> Result<f64> {
            let denom = smoothness * lip_h * lip_h;
            let eta = if denom > 0.0 {
                c / denom
            } else {
                f64::INFINITY
            };
            let eta = max.map_or(eta, |m| eta.min(m));
            if eta.is_finite() {
                Ok(eta)
            } else {
                Err(Error::CriticalInitialization(
                    "Dh(w0) vanishes, so the automatic step size is unbounded; set a step cap"
                        .into(),
                ))
            }
        };
        match (self.time, self.steps) {
            (Some(t), Some(k)) => {
                let expected = k as f64 / (lip_h * lip_h);
                if (t - expected).abs() > 1e-9 * t.max(expected) {
                    return Err(Error::invalid(format!(
                        "horizon T={t} and budget K={k} disagree: T should be K/Lip(h)^2 = {expected}"
                    )));
                }
                Ok((t / k as f64, k))
            }
            (Some(t), None) => {
                let eta = match self.step {
                    StepRule::Fixed(eta) => eta,
                    StepRule::Auto { c, max } => auto(c, max)?,
                };
                let k = (t / eta).ceil().max(1.0) as usize;
                Ok((t / k as f64, k))
            }
            (None, Some(k)) => {
                let eta = match self.step {
                    StepRule::Fixed(eta) => eta,
                    StepRule::Auto { c, max } => auto(c, max)?,
                };
                Ok((eta, k))
            }
            (None, None) => unreachable!("validated above"),
        }
    }
}

/// One recorded state.
#[derive(Debug, Clone)]
pub struct Sample {
    pub t: f64,
    pub step: usize,
    pub w: ParamVector,
    /// `alpha h(w)` on the training set (on the held-out set for SGD).
    pub y: OutputPoint,
    /// `R(alpha h(w))`.
    pub loss: f64,
    /// `||grad F_alpha(w)||`.
    pub grad_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Horizon,
    LossBelow,
    GradBelow,
    GradRelBelow,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryMeta {
    pub config: FlowConfig,
    pub model: String,
    pub alpha: f64,
    pub step_size: f64,
    pub lip_h: f64,
    pub steps_taken: usize,
    pub stop_reason: StopReason,
    pub seed: Option<u64>,
}

/// Recorded samples of one integration, with `t` strictly increasing and
/// the first sample at `t = 0`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub meta: TrajectoryMeta,
}

impl Trajectory {
    pub fn initial(&self) -> &Sample {
        &self.samples[0]
    }

    pub fn last(&self) -> &Sample {
        self.samples
            .last()
            .expect("trajectory has at least one sample")
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn losses(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.loss).collect()
    }

    pub fn horizon(&self) -> f64 {
        self.last().t
    }

    /// Parameters at time `t`, linearly interpolated between samples.
    pub fn w_at(&self, t: f64) -> Vec<f64> {
        self.interpolate(t, |s| &s.w[..])
    }

    /// Outputs at time `t`, linearly interpolated between samples.
    pub fn y_at(&self, t: f64) -> Vec<f64> {
        self.interpolate(t, |s| s.y.values())
    }

    fn interpolate<'a>(&'a self, t: f64, field: impl Fn(&'a Sample) -> &'a [f64]) -> Vec<f64> {
        let s = &self.samples;
        let idx = s.partition_point(|x| x.t < t);
        if idx == 0 {
            return field(&s[0]).to_vec();
        }
        if idx >= s.len() {
            return field(&s[s.len() - 1]).to_vec();
        }
        let (a, b) = (&s[idx - 1], &s[idx]);
        if b.t == t {
            return field(b).to_vec();
        }
        let lam = (t - a.t) / (b.t - a.t);
        field(a)
            .iter()
            .zip(field(b))
            .map(|(x, y)| x + lam * (y - x))
            .collect()
    }
}

/// `||Dh(w0)||` by power iteration, used as the `Lip(h)` estimate of the
/// auto step rule.
pub fn jacobian_norm<M: Model + ?Sized>(model: &M, w0: &[f64], set: &EvaluationSet) -> Result<f64> {
    Ok(jacobian(model, w0, set)?.operator_norm(1e-8, 0))
}

struct Recorder<'a> {
    set: &'a EvaluationSet,
    k: usize,
    samples: Vec<Sample>,
    record: RecordStride,
}

impl Recorder<'_> {
    fn push(&mut self, step: usize, t: f64, w: &[f64], eval: &ObjectiveEval) {
        self.samples.push(Sample {
            t,
            step,
            w: ParamVector::from(w.to_vec()),
            y: self
                .set
                .output_point(eval.output.clone(), self.k)
                .expect("output length matches the evaluation set"),
            loss: eval.loss,
            grad_norm: linalg::norm(&eval.gradient),
        });
    }
}

pub(crate) fn check_state(
    t: f64,
    w: &[f64],
    eval: &ObjectiveEval,
    initial_loss: f64,
) -> Result<()> {
    if !eval.loss.is_finite() || w.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { t });
    }
    if eval.loss > 10.0 * initial_loss && eval.loss > f64::MIN_POSITIVE {
        return Err(Error::Diverged {
            t,
            loss: eval.loss,
            initial: initial_loss,
        });
    }
    Ok(())
}

pub(crate) fn stop_reason(
    stop: &StopRule,
    eval: &ObjectiveEval,
    initial_grad: f64,
) -> Option<StopReason> {
    let g = linalg::norm(&eval.gradient);
    if stop.loss_below.is_some_and(|e| eval.loss < e) {
        return Some(StopReason::LossBelow);
    }
    if stop.grad_below.is_some_and(|e| g < e) {
        return Some(StopReason::GradBelow);
    }
    if stop.grad_rel_below.is_some_and(|e| g < e * initial_grad) {
        return Some(StopReason::GradRelBelow);
    }
    None
}

/// Gradient flow `w' = -grad F_alpha(w) = -(1/alpha) Dh(w)^T grad R(alpha h(w))`
/// started at `w0`.
pub fn integrate_flow<M: Model + ?Sized>(
    model: &M,
    loss: &Loss,
    set: &EvaluationSet,
    w0: &ParamVector,
    config: &FlowConfig,
) -> Result<Trajectory> {
    config.validate()?;
    check_compat(model, w0, set)?;
    check_dim(Axis::OutputDim, model.output_dim(), loss.target().k())?;
    check_dim(Axis::Points, set.len(), loss.target().n())?;
    let lip_h = match config.lip_h {
        Some(l) => l,
        None => jacobian_norm(model, w0, set)?,
    };
    let (eta, steps) = config.resolve(lip_h, loss.smoothness())?;
    let alpha = config.alpha;
    let grad = |w: &[f64]| objective_raw(model, loss, set, alpha, w);

    let mut rec = Recorder {
        set,
        k: model.output_dim(),
        samples: Vec::new(),
        record: config.record,
    };
    let mut w = w0.to_vec();
    let mut eval = grad(&w);
    let initial_loss = eval.loss;
    let initial_grad = linalg::norm(&eval.gradient);
    check_state(0.0, &w, &eval, initial_loss)?;
    rec.push(0, 0.0, &w, &eval);
    let mut reason = stop_reason(&config.stop, &eval, initial_grad).unwrap_or(StopReason::Horizon);
    let mut taken = 0;
    if reason == StopReason::Horizon {
        for step in 1..=steps {
            match config.integrator {
                Integrator::Euler => linalg::axpy(-eta, &eval.gradient, &mut w),
                Integrator::Rk4 => rk4_step(&mut w, eta, &eval.gradient, |x| grad(x).gradient),
            }
            eval = grad(&w);
            let t = step as f64 * eta;
            check_state(t, &w, &eval, initial_loss)?;
            taken = step;
            let stopped = stop_reason(&config.stop, &eval, initial_grad);
            if stopped.is_some() || step == steps || rec.record.keeps(step) {
                rec.push(step, t, &w, &eval);
            }
            if let Some(r) = stopped {
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

/// Classical fourth-order Runge-Kutta step for `w' = -g(w)`, given
/// `g(w)` already evaluated.
pub(crate) fn rk4_step(w: &mut [f64], eta: f64, g1: &[f64], g: impl Fn(&[f64]) -> Vec<f64>) {
    let mut tmp: Vec<f64> = w.iter().zip(g1).map(|(x, d)| x - 0.5 * eta * d).collect();
    let g2 = g(&tmp);
    tmp.iter_mut()
        .zip(w.iter().zip(&g2))
        .for_each(|(t, (x, d))| *t = x - 0.5 * eta * d);
    let g3 = g(&tmp);
    tmp.iter_mut()
        .zip(w.iter().zip(&g3))
        .for_each(|(t, (x, d))| *t = x - eta * d);
    let g4 = g(&tmp);
    for i in 0..w.len() {
        w[i] -= eta / 6.0 * (g1[i] + 2.0 * g2[i] + 2.0 * g3[i] + g4[i]);
    }
}

/// Gradient flow of the linearized objective, started at the tangent
/// model's anchor.
pub fn integrate_linearized_flow<M: Model>(
    tangent: &TangentModel<M>,
    loss: &Loss,
    set: &EvaluationSet,
    config: &FlowConfig,
) -> Result<Trajectory> {
    let w0 = tangent.anchor().clone();
    integrate_flow(tangent, loss, set, &w0, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LinearModel;

    #[test]
    fn log_stride_thins_out() {
        let kept = (1..10_000)
            .filter(|s| RecordStride::Log { per_decade: 10 }.keeps(*s))
            .count();
        assert!(kept > 30 && kept < 60, "{kept}");
    }

    #[test]
    fn horizon_and_budget_must_agree() {
        let c = FlowConfig::new(1.0).with_time(2.0).with_steps(8);
        assert!(c.resolve(2.0, 1.0).is_ok());
        assert!(c.resolve(1.0, 1.0).is_err());
    }

    #[test]
    fn stationary_start_gives_constant_trajectory() {
        let m = LinearModel::new(2, 1);
        let set = EvaluationSet::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let w0 = ParamVector::from(vec![0.3, -0.2]);
        let y = crate::model::evaluate(&m, &w0, &set).unwrap();
        let loss = Loss::square(y);
        let traj =
            integrate_flow(&m, &loss, &set, &w0, &FlowConfig::new(1.0).with_time(3.0)).unwrap();
        assert!(traj.samples.iter().all(|s| s.w == w0));
    }
}
