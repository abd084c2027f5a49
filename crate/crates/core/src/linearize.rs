//! The tangent model `h(w0) + Dh(w0)(w - w0)` and the tangent kernel
//! `Dh(w) Dh(w)^T`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{
    check_compat, matvec, matvec_t, Activation, EvaluationSet, Model, Neuron, NeuronModel,
    ParamVector, DENSE_LIMIT,
};

struct Prepared {
    h0: Vec<f64>,
    jac: Option<DMatrix<f64>>,
}

/// First-order Taylor expansion of `base` at `anchor`.
///
/// `h(w0)` and, when it fits under [`DENSE_LIMIT`], the dense Jacobian are
/// computed once per evaluation set and reused; otherwise Jacobian products
/// are delegated to the base model at the anchor.
pub struct TangentModel<M> {
    base: M,
    anchor: ParamVector,
    cache: Mutex<HashMap<u64, Arc<Prepared>>>,
}

impl<M: std::fmt::Debug> std::fmt::Debug for TangentModel<M> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TangentModel")
            .field("base", &self.base)
            .field("anchor_len", &self.anchor.len())
            .finish()
    }
}

impl<M: Model> TangentModel<M> {
    pub fn base(&self) -> &M {
        &self.base
    }

    pub fn anchor(&self) -> &ParamVector {
        &self.anchor
    }

    fn prepared(&self, set: &EvaluationSet) -> Arc<Prepared> {
        let mut cache = self.cache.lock().unwrap();
        if let Some(p) = cache.get(&set.inputs_id()) {
            return p.clone();
        }
        if cache.len() >= 8 {
            cache.clear();
        }
        let h0 = self.base.forward(&self.anchor, set);
        let entries = set.len() * self.base.output_dim() * self.base.param_count();
        let jac = (entries <= DENSE_LIMIT).then(|| self.base.dense_jacobian(&self.anchor, set));
        let p = Arc::new(Prepared { h0, jac });
        cache.insert(set.inputs_id(), p.clone());
        p
    }
}

/// Linearizes `model` at `w0`, preparing the cache for `set`.
pub fn build_tangent<M: Model>(
    model: M,
    w0: &ParamVector,
    set: &EvaluationSet,
) -> Result<TangentModel<M>> {
    check_compat(&model, w0, set)?;
    let t = TangentModel {
        base: model,
        anchor: w0.clone(),
        cache: Mutex::new(HashMap::new()),
    };
    t.prepared(set);
    Ok(t)
}

impl<M: Model> Model for TangentModel<M> {
    fn param_count(&self) -> usize {
        self.base.param_count()
    }
    fn input_dim(&self) -> usize {
        self.base.input_dim()
    }
    fn output_dim(&self) -> usize {
        self.base.output_dim()
    }
    fn forward(&self, w: &[f64], set: &EvaluationSet) -> Vec<f64> {
        let prep = self.prepared(set);
        let dw = linalg::sub(w, &self.anchor);
        let lin = match &prep.jac {
            Some(j) => matvec(j, &dw),
            None => self.base.pushforward(&self.anchor, set, &dw),
        };
        linalg::add(&prep.h0, &lin)
    }
    fn pushforward(&self, _w: &[f64], set: &EvaluationSet, v: &[f64]) -> Vec<f64> {
        match &self.prepared(set).jac {
            Some(j) => matvec(j, v),
            None => self.base.pushforward(&self.anchor, set, v),
        }
    }
    fn pullback(&self, _w: &[f64], set: &EvaluationSet, c: &[f64]) -> Vec<f64> {
        match &self.prepared(set).jac {
            Some(j) => matvec_t(j, c),
            None => self.base.pullback(&self.anchor, set, c),
        }
    }
    fn dense_jacobian(&self, _w: &[f64], set: &EvaluationSet) -> DMatrix<f64> {
        match &self.prepared(set).jac {
            Some(j) => j.clone(),
            None => self.base.dense_jacobian(&self.anchor, set),
        }
    }
    fn describe(&self) -> String {
        format!("tangent({})", self.base.describe())
    }
}

/// The tangent model's units keep their anchor activation pattern: the
/// reported pre-activations are those of the base model at `w0`, whatever
/// the parameters.
impl<M: NeuronModel> NeuronModel for TangentModel<M> {
    fn activation(&self) -> Activation {
        self.base.activation()
    }
    fn neurons(&self, w: &[f64]) -> Vec<Neuron> {
        self.base.neurons(w)
    }
    fn pre_activations(&self, _w: &[f64], set: &EvaluationSet) -> DMatrix<f64> {
        self.base.pre_activations(&self.anchor, set)
    }
}

/// Gram matrix of `Dh(w)` in an orthonormal basis of `F`, indexed by
/// `(point, channel)` pairs in row-major order.
#[derive(Debug, Clone)]
pub struct KernelMatrix {
    pub matrix: DMatrix<f64>,
    pub param_count: usize,
    pub k: usize,
}

impl KernelMatrix {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace()
    }

    /// The same entries with the `sqrt(weight)` factors removed, i.e.
    /// `sum_params df_c(x_i)/dw df_c'(x_j)/dw`.
    pub fn unweighted(&self, weights: &[f64]) -> DMatrix<f64> {
        let k = self.k;
        DMatrix::from_fn(self.dim(), self.dim(), |r, c| {
            self.matrix[(r, c)] / (weights[r / k] * weights[c / k]).sqrt()
        })
    }
}

/// `Sigma(w) = Dh(w) Dh(w)^T`.
pub fn tangent_kernel<M: Model + ?Sized>(
    model: &M,
    w: &[f64],
    set: &EvaluationSet,
) -> Result<KernelMatrix> {
    let jac = crate::model::jacobian(model, w, set)?;
    let k = model.output_dim();
    let matrix = match jac.dense_orthonormal() {
        Ok(j) => &j * j.transpose(),
        Err(Error::TooLarge { .. }) => {
            let dim = jac.rows();
            let sw: Vec<f64> = set.weights().iter().map(|x| x.sqrt()).collect();
            let mut out = DMatrix::zeros(dim, dim);
            let mut e = vec![0.0; dim];
            for r in 0..dim {
                e[r] = sw[r / k];
                let g = model.pullback(w, set, &e);
                let col = model.pushforward(w, set, &g);
                for (i, v) in col.into_iter().enumerate() {
                    out[(i, r)] = v * sw[i / k];
                }
                e[r] = 0.0;
            }
            (&out + out.transpose()) * 0.5
        }
        Err(e) => return Err(e),
    };
    Ok(KernelMatrix {
        matrix,
        param_count: model.param_count(),
        k,
    })
}

/// Sorted spectrum of a kernel matrix and the singular values of `Dh^T`
/// derived from it.
#[derive(Debug, Clone, Serialize)]
pub struct Spectrum {
    /// Descending eigenvalues `sigma_i^2`; only the leading ones when the
    /// matrix is too large for a dense solve.
    pub eigenvalues: Vec<f64>,
    pub normalized: Vec<f64>,
    /// Square root of the smallest eigenvalue, when `nk <= p` and the full
    /// spectrum was computed.
    pub sigma_min: Option<f64>,
    /// Smallest singular value above the rank tolerance `1e-10 * sigma_max`
    /// (or the rounding level of the Gram eigenvalues, if larger).
    pub sigma_min_nonzero: f64,
    pub rank: usize,
    /// Whether `eigenvalues` covers the whole spectrum.
    pub complete: bool,
}

/// Dense solves are used up to this dimension.
pub const DENSE_SPECTRUM_LIMIT: usize = 2000;

/// Number of leading eigenvalues computed above the dense limit.
pub const PARTIAL_SPECTRUM_SIZE: usize = 200;

pub fn kernel_spectrum(kernel: &KernelMatrix) -> Result<Spectrum> {
    if kernel.matrix.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("kernel matrix has non-finite entries"));
    }
    let dim = kernel.dim();
    let (eigenvalues, complete) = if dim <= DENSE_SPECTRUM_LIMIT {
        (linalg::symmetric_eigenvalues(&kernel.matrix), true)
    } else {
        let vals = linalg::top_eigenvalues(
            dim,
            PARTIAL_SPECTRUM_SIZE,
            |v| matvec(&kernel.matrix, v),
            1e-10,
            2000,
            0,
        )?;
        (vals, false)
    };
    Ok(summarize_spectrum(
        eigenvalues,
        complete,
        dim,
        kernel.param_count,
    ))
}

fn summarize_spectrum(eigenvalues: Vec<f64>, complete: bool, dim: usize, p: usize) -> Spectrum {
    let top = eigenvalues.first().copied().unwrap_or(0.0).max(0.0);
    let normalized = eigenvalues
        .iter()
        .map(|v| if top > 0.0 { v / top } else { 0.0 })
        .collect();
    // rank tolerance 1e-10 * sigma_max on singular values, raised to the
    // rounding level of eigenvalues computed from the Gram matrix
    let threshold = (1e-10 * top.sqrt())
        .powi(2)
        .max(4.0 * dim as f64 * f64::EPSILON * top)
        .max(f64::MIN_POSITIVE);
    let rank = eigenvalues.iter().filter(|v| **v > threshold).count();
    let sigma_min_nonzero = eigenvalues
        .iter()
        .copied()
        .filter(|v| *v > threshold)
        .fold(f64::INFINITY, f64::min)
        .sqrt();
    let sigma_min =
        (complete && dim <= p).then(|| eigenvalues.last().copied().unwrap_or(0.0).max(0.0).sqrt());
    Spectrum {
        eigenvalues,
        normalized,
        sigma_min,
        sigma_min_nonzero: if sigma_min_nonzero.is_finite() {
            sigma_min_nonzero
        } else {
            0.0
        },
        rank,
        complete,
    }
}
