use serde::Serialize;

use crate::error::{check_dim, Axis, Error, Result};
use crate::flow::Trajectory;
use crate::linalg;
use crate::loss::Loss;
use crate::model::{check_compat, Activation, EvaluationSet, Model, NeuronModel, ParamVector};

/// Fraction of `(input, unit)` pairs whose ReLU is in the same state
/// (`z > 0` or `z <= 0`) at `w_init` and at `w_final`.
pub fn stability_of_activations<M: NeuronModel + ?Sized>(
    model: &M,
    w_init: &[f64],
    w_final: &[f64],
    inputs: &EvaluationSet,
) -> Result<f64> {
    if model.activation() != Activation::Relu {
        return Err(Error::invalid(
            "stability of activations is defined for ReLU units",
        ));
    }
    check_compat(model, w_init, inputs)?;
    check_dim(Axis::Parameters, model.param_count(), w_final.len())?;
    let z0 = model.pre_activations(w_init, inputs);
    let z1 = model.pre_activations(w_final, inputs);
    let same = z0
        .iter()
        .zip(z1.iter())
        .filter(|(a, b)| (**a > 0.0) == (**b > 0.0))
        .count();
    Ok(same as f64 / z0.len() as f64)
}

/// `sup_x ||alpha f(w_T, x) - alpha f_bar(w_bar_T, x)||` over the points of
/// `inputs`, where `tangent` is the linearization of `model`.
pub fn generalization_gap<M: Model + ?Sized, T: Model + ?Sized>(
    model: &M,
    tangent: &T,
    w_t: &[f64],
    w_bar_t: &[f64],
    alpha: f64,
    inputs: &EvaluationSet,
) -> Result<f64> {
    check_compat(model, w_t, inputs)?;
    check_compat(tangent, w_bar_t, inputs)?;
    let a = model.forward(w_t, inputs);
    let b = tangent.forward(w_bar_t, inputs);
    let k = model.output_dim();
    Ok(a.chunks(k)
        .zip(b.chunks(k))
        .map(|(x, y)| alpha * linalg::dist(x, y))
        .fold(0.0, f64::max))
}

/// Least-squares fit of the linearized model on a sample.
#[derive(Debug, Clone, Serialize)]
pub struct TangentFit {
    /// Fitted parameters `w0 + dw`.
    #[serde(skip)]
    pub w: ParamVector,
    /// `R(alpha h_bar(w))` on the fitting sample.
    pub train_loss: f64,
    /// `R(alpha h_bar(w))` on the evaluation sample.
    pub eval_loss: f64,
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Minimizes `R(alpha h_bar(w))` on `fit_set` over `w`, by conjugate
/// gradients on the normal equations of the tangent features at `w0`, and
/// reports the loss on `eval_set`.
pub fn tangent_least_squares<M: Model + ?Sized>(
    model: &M,
    w0: &ParamVector,
    alpha: f64,
    fit_set: &EvaluationSet,
    eval_set: &EvaluationSet,
    tol: f64,
    max_iter: usize,
) -> Result<TangentFit> {
    check_compat(model, w0, fit_set)?;
    check_compat(model, w0, eval_set)?;
    let fit_loss = Loss::from_set(fit_set)?;
    let eval_loss = Loss::from_set(eval_set)?;
    let k = model.output_dim();
    let weights = fit_set.weights();
    let weigh = |v: &[f64]| -> Vec<f64> {
        v.iter()
            .enumerate()
            .map(|(i, x)| x * weights[i / k])
            .collect()
    };
    let h0 = model.forward(w0, fit_set);
    let residual: Vec<f64> = fit_loss
        .target()
        .values()
        .iter()
        .zip(&h0)
        .map(|(y, h)| y - alpha * h)
        .collect();
    let rhs: Vec<f64> = model
        .pullback(w0, fit_set, &weigh(&residual))
        .into_iter()
        .map(|g| alpha * g)
        .collect();
    let cg = linalg::conjugate_gradient(
        |v| {
            let jv = model.pushforward(w0, fit_set, v);
            model
                .pullback(w0, fit_set, &weigh(&jv))
                .into_iter()
                .map(|g| alpha * alpha * g)
                .collect()
        },
        &rhs,
        tol,
        max_iter,
    );
    let w: Vec<f64> = w0.iter().zip(&cg.solution).map(|(a, b)| a + b).collect();
    let predict = |set: &EvaluationSet| -> Vec<f64> {
        let h0 = model.forward(w0, set);
        let jd = model.pushforward(w0, set, &cg.solution);
        h0.iter().zip(&jd).map(|(a, b)| alpha * (a + b)).collect()
    };
    Ok(TangentFit {
        train_loss: fit_loss.value_raw(&predict(fit_set)),
        eval_loss: eval_loss.value_raw(&predict(eval_set)),
        w: ParamVector::from(w),
        iterations: cg.iterations,
        relative_residual: cg.relative_residual,
    })
}

/// Final population losses of a lazy and a non-lazy run.
#[derive(Debug, Clone, Serialize)]
pub struct PlateauReport {
    pub lazy_final_loss: f64,
    pub nonlazy_final_loss: f64,
    /// `lazy / nonlazy`.
    pub gap_ratio: f64,
    /// Loss of the linearized model's least-squares optimum, when given.
    pub linearized_optimum: Option<f64>,
    /// `|lazy - optimum| / optimum`.
    pub relative_to_optimum: Option<f64>,
}

pub fn check_under_param_plateau(
    lazy: &Trajectory,
    nonlazy: &Trajectory,
    linearized_optimum: Option<f64>,
) -> PlateauReport {
    let l = lazy.last().loss;
    let n = nonlazy.last().loss;
    PlateauReport {
        lazy_final_loss: l,
        nonlazy_final_loss: n,
        gap_ratio: l / n,
        linearized_optimum,
        relative_to_optimum: linearized_optimum.map(|o| (l - o).abs() / o),
    }
}
