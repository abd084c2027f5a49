//! Strongly convex losses on `F` and the scaled objective
//! `F_alpha(w) = R(alpha h(w)) / alpha^2`.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Axis, Error, Result};
use crate::model::{check_compat, EvaluationSet, Model, OutputPoint};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// `R(y) = 1/2 ||y - y*||^2`.
    Square,
    /// `R(y) = 1/2 sum_i w_i sum_c a_{ic} (y_{ic} - y*_{ic})^2`, one positive
    /// coefficient per output entry.
    DiagonalQuadratic(Vec<f64>),
}

/// A loss together with its minimizer `y*`.
#[derive(Debug, Clone)]
pub struct Loss {
    kind: LossKind,
    target: OutputPoint,
}

impl Loss {
    pub fn square(target: OutputPoint) -> Self {
        Loss {
            kind: LossKind::Square,
            target,
        }
    }

    pub fn diagonal_quadratic(target: OutputPoint, coefficients: Vec<f64>) -> Result<Self> {
        check_dim(Axis::Points, target.values().len(), coefficients.len())?;
        if coefficients.iter().any(|a| !(*a > 0.0) || !a.is_finite()) {
            return Err(Error::invalid("quadratic coefficients must be positive"));
        }
        Ok(Loss {
            kind: LossKind::DiagonalQuadratic(coefficients),
            target,
        })
    }

    /// Square loss against the targets attached to `set`.
    pub fn from_set(set: &EvaluationSet) -> Result<Self> {
        set.targets()
            .map(Loss::square)
            .ok_or_else(|| Error::invalid("evaluation set has no targets"))
    }

    pub fn kind(&self) -> &LossKind {
        &self.kind
    }

    pub fn target(&self) -> &OutputPoint {
        &self.target
    }

    fn coefficient(&self, idx: usize) -> f64 {
        match &self.kind {
            LossKind::Square => 1.0,
            LossKind::DiagonalQuadratic(a) => a[idx],
        }
    }

    pub fn value_raw(&self, y: &[f64]) -> f64 {
        let k = self.target.k();
        let w = self.target.weights();
        let t = self.target.values();
        0.5 * y
            .iter()
            .zip(t)
            .enumerate()
            .map(|(idx, (a, b))| w[idx / k] * self.coefficient(idx) * (a - b) * (a - b))
            .sum::<f64>()
    }

    /// Riesz representative of the gradient in `F`, as raw values.
    pub fn gradient_raw(&self, y: &[f64]) -> Vec<f64> {
        y.iter()
            .zip(self.target.values())
            .enumerate()
            .map(|(idx, (a, b))| self.coefficient(idx) * (a - b))
            .collect()
    }

    pub fn value(&self, y: &OutputPoint) -> Result<f64> {
        check_dim(Axis::Points, self.target.values().len(), y.values().len())?;
        Ok(self.value_raw(y.values()))
    }

    pub fn gradient(&self, y: &OutputPoint) -> Result<OutputPoint> {
        check_dim(Axis::Points, self.target.values().len(), y.values().len())?;
        Ok(y.with_values(self.gradient_raw(y.values())))
    }

    /// Strong convexity constant `m`.
    pub fn strong_convexity(&self) -> f64 {
        match &self.kind {
            LossKind::Square => 1.0,
            LossKind::DiagonalQuadratic(a) => a.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }

    /// Gradient Lipschitz constant `M`.
    pub fn smoothness(&self) -> f64 {
        match &self.kind {
            LossKind::Square => 1.0,
            LossKind::DiagonalQuadratic(a) => a.iter().copied().fold(0.0, f64::max),
        }
    }

    pub fn condition(&self) -> f64 {
        self.smoothness() / self.strong_convexity()
    }
}

/// Value and gradient of `F_alpha` at one point.
#[derive(Debug, Clone)]
pub struct ObjectiveEval {
    /// `R(alpha h(w)) / alpha^2`.
    pub value: f64,
    /// `(1/alpha) Dh(w)^T grad R(alpha h(w))`.
    pub gradient: Vec<f64>,
    /// Raw values of `alpha h(w)`.
    pub output: Vec<f64>,
    /// `R(alpha h(w))`.
    pub loss: f64,
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::invalid(format!(
            "scale alpha must be positive, got {alpha}"
        )));
    }
    Ok(())
}

/// Unchecked `F_alpha` evaluation used inside integrators.
pub(crate) fn objective_raw<M: Model + ?Sized>(
    model: &M,
    loss: &Loss,
    set: &EvaluationSet,
    alpha: f64,
    w: &[f64],
) -> ObjectiveEval {
    let k = loss.target.k();
    let weights = set.weights();
    let mut scaled = Vec::new();
    let mut loss_value = 0.0;
    let (_, raw_grad) = model.forward_pullback(w, set, &mut |h: &[f64]| {
        scaled = h.iter().map(|v| alpha * v).collect();
        loss_value = loss.value_raw(&scaled);
        loss.gradient_raw(&scaled)
            .into_iter()
            .enumerate()
            .map(|(idx, g)| g * weights[idx / k])
            .collect()
    });
    ObjectiveEval {
        value: loss_value / (alpha * alpha),
        gradient: raw_grad.into_iter().map(|g| g / alpha).collect(),
        output: scaled,
        loss: loss_value,
    }
}

/// `F_alpha(w)` and `grad F_alpha(w)`.
pub fn scaled_objective<M: Model + ?Sized>(
    model: &M,
    loss: &Loss,
    set: &EvaluationSet,
    alpha: f64,
    w: &[f64],
) -> Result<ObjectiveEval> {
    check_alpha(alpha)?;
    check_compat(model, w, set)?;
    check_dim(Axis::OutputDim, model.output_dim(), loss.target.k())?;
    check_dim(Axis::Points, set.len(), loss.target.n())?;
    Ok(objective_raw(model, loss, set, alpha, w))
}
