//! Differentiable models `h: R^p -> F`, where `F` is the space of outputs on
//! a finite evaluation set equipped with a weighted L2 inner product.
//!
//! Models are stateless descriptions of an architecture: parameters live in
//! a separate [`ParamVector`], so a model can be shared by concurrent
//! workers and every evaluation is a pure function of `(w, inputs)`.

mod simple;
mod two_layer;
mod wrappers;

pub use simple::{LinearModel, QuadraticModel};
pub use two_layer::{Activation, InitScheme, Neuron, NeuronModel, ScaleRule, TwoLayerNet};
pub use wrappers::{Centered, Scaled, Symmetrized};

use std::ops::{Deref, DerefMut};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Axis, Error, Result};
use crate::linalg;

/// Dense Jacobians are only materialized up to this many entries.
pub const DENSE_LIMIT: usize = 10_000_000;

/// A point in parameter space.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("parameter vector has non-finite entries"));
        }
        Ok(ParamVector(values))
    }

    pub fn zeros(p: usize) -> Self {
        ParamVector(vec![0.0; p])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        linalg::norm(&self.0)
    }

    pub fn distance(&self, other: &[f64]) -> f64 {
        linalg::dist(&self.0, other)
    }

    pub fn scaled(&self, s: f64) -> ParamVector {
        ParamVector(self.0.iter().map(|v| v * s).collect())
    }
}

impl Deref for ParamVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for ParamVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(v: Vec<f64>) -> Self {
        ParamVector(v)
    }
}

static NEXT_INPUTS_ID: AtomicU64 = AtomicU64::new(1);

/// Inputs (one per row), optional targets and the inner-product weights
/// that define the norm on `F`.
#[derive(Debug, Clone)]
pub struct EvaluationSet {
    inputs_id: u64,
    inputs: Arc<DMatrix<f64>>,
    targets: Option<(Arc<Vec<f64>>, usize)>,
    weights: Arc<Vec<f64>>,
}

impl EvaluationSet {
    /// Empirical measure on the given inputs: every weight is `1/n`.
    pub fn new(inputs: DMatrix<f64>) -> Result<Self> {
        let n = inputs.nrows();
        if n == 0 {
            return Err(Error::invalid("evaluation set needs at least one point"));
        }
        if inputs.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("evaluation set has non-finite inputs"));
        }
        Ok(EvaluationSet {
            inputs_id: NEXT_INPUTS_ID.fetch_add(1, Ordering::Relaxed),
            inputs: Arc::new(inputs),
            targets: None,
            weights: Arc::new(vec![1.0 / n as f64; n]),
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::invalid("ragged input rows"));
        }
        EvaluationSet::new(DMatrix::from_fn(n, d, |i, j| rows[i][j]))
    }

    /// Same inputs with every weight equal to one.
    pub fn with_unit_weights(mut self) -> Self {
        self.weights = Arc::new(vec![1.0; self.len()]);
        self
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        check_dim(Axis::Points, self.len(), weights.len())?;
        if weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(Error::invalid("inner-product weights must be positive"));
        }
        self.weights = Arc::new(weights);
        Ok(self)
    }

    /// Attaches targets, row-major `n x k`.
    pub fn with_targets(mut self, targets: Vec<f64>, k: usize) -> Result<Self> {
        check_dim(Axis::Points, self.len() * k, targets.len())?;
        self.targets = Some((Arc::new(targets), k));
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn inputs(&self) -> &DMatrix<f64> {
        &self.inputs
    }

    pub fn input(&self, i: usize) -> Vec<f64> {
        self.inputs.row(i).iter().copied().collect()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Identifies the input matrix; clones and re-weightings share it.
    pub fn inputs_id(&self) -> u64 {
        self.inputs_id
    }

    pub fn targets(&self) -> Option<OutputPoint> {
        self.targets.as_ref().map(|(t, k)| OutputPoint {
            values: t.as_ref().clone(),
            k: *k,
            weights: self.weights.clone(),
        })
    }

    pub fn output_point(&self, values: Vec<f64>, k: usize) -> Result<OutputPoint> {
        check_dim(Axis::Points, self.len() * k, values.len())?;
        Ok(OutputPoint {
            values,
            k,
            weights: self.weights.clone(),
        })
    }

    pub fn zeros(&self, k: usize) -> OutputPoint {
        OutputPoint {
            values: vec![0.0; self.len() * k],
            k,
            weights: self.weights.clone(),
        }
    }

    /// Sub-set of the given rows, with fresh `1/len` weights.
    pub fn select(&self, rows: &[usize]) -> Result<Self> {
        let d = self.input_dim();
        let inputs = DMatrix::from_fn(rows.len(), d, |i, j| self.inputs[(rows[i], j)]);
        let mut out = EvaluationSet::new(inputs)?;
        if let Some((t, k)) = &self.targets {
            let vals = rows
                .iter()
                .flat_map(|&r| t[r * k..(r + 1) * k].iter().copied())
                .collect();
            out = out.with_targets(vals, *k)?;
        }
        Ok(out)
    }
}

/// Model outputs on an evaluation set: `n x k` values (row-major) together
/// with the weights of the inner product.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputPoint {
    values: Vec<f64>,
    k: usize,
    weights: Arc<Vec<f64>>,
}

impl OutputPoint {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn n(&self) -> usize {
        self.weights.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn get(&self, i: usize, c: usize) -> f64 {
        self.values[i * self.k + c]
    }

    pub fn inner(&self, other: &OutputPoint) -> f64 {
        let k = self.k;
        self.values
            .chunks(k)
            .zip(other.values.chunks(k))
            .zip(self.weights.iter())
            .map(|((a, b), w)| w * linalg::dot(a, b))
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.inner(self).max(0.0).sqrt()
    }

    /// Largest per-point Euclidean norm.
    pub fn sup_norm(&self) -> f64 {
        self.values
            .chunks(self.k)
            .map(linalg::norm)
            .fold(0.0, f64::max)
    }

    pub fn sub(&self, other: &OutputPoint) -> OutputPoint {
        self.with_values(linalg::sub(&self.values, &other.values))
    }

    pub fn add(&self, other: &OutputPoint) -> OutputPoint {
        self.with_values(linalg::add(&self.values, &other.values))
    }

    pub fn scaled(&self, s: f64) -> OutputPoint {
        self.with_values(self.values.iter().map(|v| s * v).collect())
    }

    pub fn with_values(&self, values: Vec<f64>) -> OutputPoint {
        debug_assert_eq!(values.len(), self.values.len());
        OutputPoint {
            values,
            k: self.k,
            weights: self.weights.clone(),
        }
    }

    /// Multiplies every entry by the weight of its point.
    pub fn weighted(&self) -> Vec<f64> {
        let k = self.k;
        self.values
            .iter()
            .enumerate()
            .map(|(idx, v)| v * self.weights[idx / k])
            .collect()
    }

    /// Coordinates in the orthonormal basis `e_i / sqrt(weight_i)`.
    pub fn to_orthonormal(&self) -> Vec<f64> {
        let k = self.k;
        self.values
            .iter()
            .enumerate()
            .map(|(idx, v)| v * self.weights[idx / k].sqrt())
            .collect()
    }

    pub fn from_orthonormal(&self, coords: &[f64]) -> OutputPoint {
        let k = self.k;
        self.with_values(
            coords
                .iter()
                .enumerate()
                .map(|(idx, v)| v / self.weights[idx / k].sqrt())
                .collect(),
        )
    }
}

/// A smooth (or piecewise smooth) map from parameters to outputs on a set
/// of inputs.
///
/// The slice-level methods are unchecked: use [`evaluate`] and
/// [`jacobian`] for dimension-checked access.
pub trait Model: Send + Sync {
    fn param_count(&self) -> usize;
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;

    /// Raw outputs `f(w, x_i)`, row-major `n x k`.
    fn forward(&self, w: &[f64], set: &EvaluationSet) -> Vec<f64>;

    /// Jacobian-vector product `Dh(w) v`, row-major `n x k`.
    fn pushforward(&self, w: &[f64], set: &EvaluationSet, v: &[f64]) -> Vec<f64>;

    /// Vector-Jacobian product `sum_i J_i(w)^T c_i` with no inner-product
    /// weights applied.
    fn pullback(&self, w: &[f64], set: &EvaluationSet, cotangent: &[f64]) -> Vec<f64>;

    /// Forward pass followed by a pullback of a cotangent that depends on
    /// the outputs. Implementations may share work between the two.
    fn forward_pullback(
        &self,
        w: &[f64],
        set: &EvaluationSet,
        cotangent: &mut dyn FnMut(&[f64]) -> Vec<f64>,
    ) -> (Vec<f64>, Vec<f64>) {
        let out = self.forward(w, set);
        let c = cotangent(&out);
        let g = self.pullback(w, set, &c);
        (out, g)
    }

    /// Dense `nk x p` Jacobian of raw derivatives.
    fn dense_jacobian(&self, w: &[f64], set: &EvaluationSet) -> DMatrix<f64> {
        let rows = set.len() * self.output_dim();
        let p = self.param_count();
        let mut jac = DMatrix::zeros(rows, p);
        let mut e = vec![0.0; rows];
        for r in 0..rows {
            e[r] = 1.0;
            let g = self.pullback(w, set, &e);
            for (c, v) in g.into_iter().enumerate() {
                jac[(r, c)] = v;
            }
            e[r] = 0.0;
        }
        jac
    }

    /// Degree `q` when `h(lambda w) = lambda^q h(w)` for every `lambda > 0`.
    fn homogeneity_degree(&self) -> Option<u32> {
        None
    }

    fn describe(&self) -> String;
}

macro_rules! forward_model_impl {
    ($($ty:ty),*) => {$(
        impl<M: Model + ?Sized> Model for $ty {
            fn param_count(&self) -> usize {
                (**self).param_count()
            }
            fn input_dim(&self) -> usize {
                (**self).input_dim()
            }
            fn output_dim(&self) -> usize {
                (**self).output_dim()
            }
            fn forward(&self, w: &[f64], set: &EvaluationSet) -> Vec<f64> {
                (**self).forward(w, set)
            }
            fn pushforward(&self, w: &[f64], set: &EvaluationSet, v: &[f64]) -> Vec<f64> {
                (**self).pushforward(w, set, v)
            }
            fn pullback(&self, w: &[f64], set: &EvaluationSet, c: &[f64]) -> Vec<f64> {
                (**self).pullback(w, set, c)
            }
            fn forward_pullback(
                &self,
                w: &[f64],
                set: &EvaluationSet,
                cotangent: &mut dyn FnMut(&[f64]) -> Vec<f64>,
            ) -> (Vec<f64>, Vec<f64>) {
                (**self).forward_pullback(w, set, cotangent)
            }
            fn dense_jacobian(&self, w: &[f64], set: &EvaluationSet) -> DMatrix<f64> {
                (**self).dense_jacobian(w, set)
            }
            fn homogeneity_degree(&self) -> Option<u32> {
                (**self).homogeneity_degree()
            }
            fn describe(&self) -> String {
                (**self).describe()
            }
        }
    )*};
}

forward_model_impl!(&M, Box<M>, Arc<M>);

pub(crate) fn check_compat<M: Model + ?Sized>(
    model: &M,
    w: &[f64],
    set: &EvaluationSet,
) -> Result<()> {
    check_dim(Axis::Parameters, model.param_count(), w.len())?;
    check_dim(Axis::InputDim, model.input_dim(), set.input_dim())
}

/// `h(w)` on every point of `set`.
pub fn evaluate<M: Model + ?Sized>(
    model: &M,
    w: &[f64],
    set: &EvaluationSet,
) -> Result<OutputPoint> {
    check_compat(model, w, set)?;
    set.output_point(model.forward(w, set), model.output_dim())
}

/// The differential `Dh(w)` as a linear operator `R^p -> F`.
pub fn jacobian<'a, M: Model + ?Sized>(
    model: &'a M,
    w: &[f64],
    set: &'a EvaluationSet,
) -> Result<Jacobian<'a, M>> {
    check_compat(model, w, set)?;
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("jacobian requested at a non-finite point"));
    }
    Ok(Jacobian {
        model,
        w: w.to_vec(),
        set,
    })
}

/// `Dh(w)` with apply, adjoint and dense materialization.
pub struct Jacobian<'a, M: ?Sized> {
    model: &'a M,
    w: Vec<f64>,
    set: &'a EvaluationSet,
}

impl<'a, M: Model + ?Sized> Jacobian<'a, M> {
    pub fn rows(&self) -> usize {
        self.set.len() * self.model.output_dim()
    }

    pub fn cols(&self) -> usize {
        self.model.param_count()
    }

    pub fn apply(&self, v: &[f64]) -> Result<OutputPoint> {
        check_dim(Axis::Parameters, self.cols(), v.len())?;
        self.set.output_point(
            self.model.pushforward(&self.w, self.set, v),
            self.model.output_dim(),
        )
    }

    /// Adjoint with respect to the weighted inner product on `F`.
    pub fn adjoint(&self, y: &OutputPoint) -> Result<Vec<f64>> {
        check_dim(Axis::Points, self.rows(), y.values().len())?;
        Ok(self.model.pullback(&self.w, self.set, &y.weighted()))
    }

    /// Raw `nk x p` matrix; refused above [`DENSE_LIMIT`] entries.
    pub fn dense(&self) -> Result<DMatrix<f64>> {
        let entries = self.rows() * self.cols();
        if entries > DENSE_LIMIT {
            return Err(Error::TooLarge {
                entries,
                limit: DENSE_LIMIT,
            });
        }
        Ok(self.model.dense_jacobian(&self.w, self.set))
    }

    /// Same matrix expressed in an orthonormal basis of `F`: row `(i, c)`
    /// is multiplied by `sqrt(weight_i)`.
    pub fn dense_orthonormal(&self) -> Result<DMatrix<f64>> {
        let mut j = self.dense()?;
        let k = self.model.output_dim();
        for (r, mut row) in j.row_iter_mut().enumerate() {
            row *= self.set.weights()[r / k].sqrt();
        }
        Ok(j)
    }

    /// Operator norm `||Dh(w)||`, by power iteration on `Dh^T Dh`.
    pub fn operator_norm(&self, tol: f64, seed: u64) -> f64 {
        let k = self.model.output_dim();
        let weights = self.set.weights();
        linalg::operator_norm(
            self.cols(),
            |v| self.model.pushforward(&self.w, self.set, v),
            |u| {
                let wu: Vec<f64> = u
                    .iter()
                    .enumerate()
                    .map(|(i, x)| x * weights[i / k])
                    .collect();
                self.model.pullback(&self.w, self.set, &wu)
            },
            tol,
            seed,
        )
        .value
    }

    pub fn point(&self) -> &[f64] {
        &self.w
    }
}

/// `lambda * w0`; for a `q`-homogeneous model `h(lambda w0) = lambda^q h(w0)`.
pub fn rescale_init<M: Model + ?Sized>(
    model: &M,
    w0: &ParamVector,
    lambda: f64,
) -> Result<ParamVector> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::invalid(format!(
            "rescale factor must be positive, got {lambda}"
        )));
    }
    if model.homogeneity_degree().is_none() {
        return Err(Error::invalid(format!(
            "{} is not positively homogeneous",
            model.describe()
        )));
    }
    check_dim(Axis::Parameters, model.param_count(), w0.len())?;
    Ok(w0.scaled(lambda))
}

/// Matrix-vector product helper for dense operators stored column-major.
pub(crate) fn matvec(m: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    (m * DVector::from_column_slice(v)).as_slice().to_vec()
}

pub(crate) fn matvec_t(m: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    (m.tr_mul(&DVector::from_column_slice(v)))
        .as_slice()
        .to_vec()
}
