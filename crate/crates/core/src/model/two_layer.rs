use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{EvaluationSet, Model, ParamVector};
use crate::rng;

/// Hidden-layer non-linearity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    /// `max(z, 0)`, with derivative 0 at `z = 0`.
    Relu,
    /// `log(1 + exp(beta z)) / beta`.
    Softplus { beta: f64 },
}

impl Activation {
    pub fn value(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Softplus { beta } => {
                let t = beta * z;
                if t > 35.0 {
                    z
                } else if t < -35.0 {
                    t.exp() / beta
                } else {
                    t.exp().ln_1p() / beta
                }
            }
        }
    }

    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Softplus { beta } => {
                let t = beta * z;
                if t >= 0.0 {
                    1.0 / (1.0 + (-t).exp())
                } else {
                    let e = t.exp();
                    e / (1.0 + e)
                }
            }
        }
    }

    /// Second derivative bound, `None` for ReLU.
    pub fn curvature_bound(self) -> Option<f64> {
        match self {
            Activation::Relu => None,
            Activation::Softplus { beta } => Some(beta / 4.0),
        }
    }
}

/// Output normalization `alpha(m)` of a width-`m` network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleRule {
    One,
    InvSqrtWidth,
    InvWidth,
    Constant(f64),
}

impl ScaleRule {
    pub fn factor(self, width: usize) -> f64 {
        match self {
            ScaleRule::One => 1.0,
            ScaleRule::InvSqrtWidth => 1.0 / (width as f64).sqrt(),
            ScaleRule::InvWidth => 1.0 / width as f64,
            ScaleRule::Constant(c) => c,
        }
    }
}

/// Distribution of the initial weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitScheme {
    /// Every entry i.i.d. `N(0, std^2)`.
    Normal { std: f64 },
    /// Every entry i.i.d. `N(0, 1/d)`.
    Xavier,
}

/// One hidden unit: inner weights, outer weights and the fixed sign with
/// which it enters the output (negative for the mirrored half of a
/// symmetrized network).
#[derive(Debug, Clone, PartialEq)]
pub struct Neuron {
    pub inner: Vec<f64>,
    pub outer: Vec<f64>,
    pub sign: f64,
}

/// Models built from a single hidden layer, exposing their units.
pub trait NeuronModel: Model {
    fn activation(&self) -> Activation;
    fn neurons(&self, w: &[f64]) -> Vec<Neuron>;
    /// Hidden pre-activations, `n x units`.
    fn pre_activations(&self, w: &[f64], set: &EvaluationSet) -> DMatrix<f64>;
}

impl<M: NeuronModel + ?Sized> NeuronModel for Box<M> {
    fn activation(&self) -> Activation {
        (**self).activation()
    }
    fn neurons(&self, w: &[f64]) -> Vec<Neuron> {
        (**self).neurons(w)
    }
    fn pre_activations(&self, w: &[f64], set: &EvaluationSet) -> DMatrix<f64> {
        (**self).pre_activations(w, set)
    }
}

impl<M: NeuronModel + ?Sized> NeuronModel for &M {
    fn activation(&self) -> Activation {
        (**self).activation()
    }
    fn neurons(&self, w: &[f64]) -> Vec<Neuron> {
        (**self).neurons(w)
    }
    fn pre_activations(&self, w: &[f64], set: &EvaluationSet) -> DMatrix<f64> {
        (**self).pre_activations(w, set)
    }
}

/// `f(w, x) = alpha(m) * sum_j b_j sigma(a_j . x)` with inner weights
/// `a_j in R^d` and outer weights `b_j in R^k`.
///
/// Parameters are stored neuron by neuron: `[a_1, b_1, a_2, b_2, ...]`, so
/// `p = m (d + k)`. The same convention (inner `a`, outer `b`) is used for
/// teachers, students and the kernel formulas.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoLayerNet {
    pub width: usize,
    pub input_dim: usize,
    pub output_dim: usize,
    pub activation: Activation,
    pub scale: ScaleRule,
}

impl TwoLayerNet {
    pub fn new(
        width: usize,
        input_dim: usize,
        output_dim: usize,
        activation: Activation,
        scale: ScaleRule,
    ) -> Self {
        TwoLayerNet {
            width,
            input_dim,
            output_dim,
            activation,
            scale,
        }
    }

    pub fn relu(width: usize, input_dim: usize) -> Self {
        Self::new(width, input_dim, 1, Activation::Relu, ScaleRule::One)
    }

    pub fn softplus(width: usize, input_dim: usize, beta: f64) -> Self {
        Self::new(
            width,
            input_dim,
            1,
            Activation::Softplus { beta },
            ScaleRule::One,
        )
    }

    pub fn with_scale(mut self, scale: ScaleRule) -> Self {
        self.scale = scale;
        self
    }

    pub fn scale_factor(&self) -> f64 {
        self.scale.factor(self.width)
    }

    fn stride(&self) -> usize {
        self.input_dim + self.output_dim
    }

    /// Random parameters drawn from `scheme`, reproducible from `seed`.
    pub fn init(&self, scheme: InitScheme, seed: u64) -> ParamVector {
        let std = match scheme {
            InitScheme::Normal { std } => std,
            InitScheme::Xavier => 1.0 / (self.input_dim as f64).sqrt(),
        };
        let mut r = rng::stream(seed, rng::labels::STUDENT_INIT);
        ParamVector::from(rng::normal_vec(&mut r, self.param_count(), std))
    }

    /// Assembles parameters from per-neuron weights.
    pub fn params_from(&self, inner: &[Vec<f64>], outer: &[Vec<f64>]) -> ParamVector {
        let mut w = Vec::with_capacity(self.param_count());
        for (a, b) in inner.iter().zip(outer) {
            debug_assert_eq!(a.len(), self.input_dim);
            debug_assert_eq!(b.len(), self.output_dim);
            w.extend_from_slice(a);
            w.extend_from_slice(b);
        }
        ParamVector::from(w)
    }

    fn split(&self, w: &[f64]) -> (DMatrix<f64>, DMatrix<f64>) {
        let (m, d, k, s) = (self.width, self.input_dim, self.output_dim, self.stride());
        let inner = DMatrix::from_fn(m, d, |j, l| w[j * s + l]);
        let outer = DMatrix::from_fn(m, k, |j, c| w[j * s + d + c]);
        (inner, outer)
    }

    fn join(&self, inner: &DMatrix<f64>, outer: &DMatrix<f64>) -> Vec<f64> {
        let (m, d, k, s) = (self.width, self.input_dim, self.output_dim, self.stride());
        let mut w = vec![0.0; m * s];
        for j in 0..m {
            for l in 0..d {
                w[j * s + l] = inner[(j, l)];
            }
            for c in 0..k {
                w[j * s + d + c] = outer[(j, c)];
            }
        }
        w
    }

    fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
        let mut out = Vec::with_capacity(m.len());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                out.push(m[(i, j)]);
            }
        }
        out
    }

    fn from_row_major(v: &[f64], rows: usize, cols: usize) -> DMatrix<f64> {
        DMatrix::from_row_slice(rows, cols, v)
    }

    fn pullback_with(
        &self,
        set: &EvaluationSet,
        z: &DMatrix<f64>,
        outer: &DMatrix<f64>,
        c: &[f64],
    ) -> Vec<f64> {
        let alpha = self.scale_factor();
        let c = Self::from_row_major(c, set.len(), self.output_dim);
        let act = z.map(|v| self.activation.value(v));
        let grad_outer = act.tr_mul(&c) * alpha;
        let mut g = &c * outer.transpose();
        g.zip_apply(z, |gi, zi| *gi *= alpha * self.activation.derivative(zi));
        let grad_inner = g.tr_mul(set.inputs());
        self.join(&grad_inner, &grad_outer)
    }
}

impl Model for TwoLayerNet {
    fn param_count(&self) -> usize {
        self.width * self.stride()
    }

    fn input_dim(&self) -> usize {
        self.input_dim
    }

    fn output_dim(&self) -> usize {
        self.output_dim
    }

    fn forward(&self, w: &[f64], set: &EvaluationSet) -> Vec<f64> {
        let (inner, outer) = self.split(w);
        let z = set.inputs() * inner.transpose();
        let act = z.map(|v| self.activation.value(v));
        Self::row_major(&((act * outer) * self.scale_factor()))
    }

    fn pushforward(&self, w: &[f64], set: &EvaluationSet, v: &[f64]) -> Vec<f64> {
        let (inner, outer) = self.split(w);
        let (d_inner, d_outer) = self.split(v);
        let z = set.inputs() * inner.transpose();
        let mut dz = set.inputs() * d_inner.transpose();
        dz.zip_apply(&z, |dzi, zi| *dzi *= self.activation.derivative(zi));
        let act = z.map(|x| self.activation.value(x));
        let out = (dz * outer + act * d_outer) * self.scale_factor();
        Self::row_major(&out)
    }

    fn pullback(&self, w: &[f64], set: &EvaluationSet, cotangent: &[f64]) -> Vec<f64> {
        let (inner, outer) = self.split(w);
        let z = set.inputs() * inner.transpose();
        self.pullback_with(set, &z, &outer, cotangent)
    }

    fn forward_pullback(
        &self,
        w: &[f64],
        set: &EvaluationSet,
        cotangent: &mut dyn FnMut(&[f64]) -> Vec<f64>,
    ) -> (Vec<f64>, Vec<f64>) {
        let (inner, outer) = self.split(w);
        let z = set.inputs() * inner.transpose();
        let act = z.map(|v| self.activation.value(v));
        let out = Self::row_major(&((act * &outer) * self.scale_factor()));
        let c = cotangent(&out);
        let g = self.pullback_with(set, &z, &outer, &c);
        (out, g)
    }

    fn dense_jacobian(&self, w: &[f64], set: &EvaluationSet) -> DMatrix<f64> {
        let (m, d, k, s) = (self.width, self.input_dim, self.output_dim, self.stride());
        let alpha = self.scale_factor();
        let (inner, outer) = self.split(w);
        let z = set.inputs() * inner.transpose();
        let x = set.inputs();
        let mut jac = DMatrix::zeros(set.len() * k, m * s);
        for i in 0..set.len() {
            for j in 0..m {
                let zij = z[(i, j)];
                let dsig = self.activation.derivative(zij) * alpha;
                let sig = self.activation.value(zij) * alpha;
                for c in 0..k {
                    let row = i * k + c;
                    let bjc = outer[(j, c)];
                    if dsig != 0.0 && bjc != 0.0 {
                        for l in 0..d {
                            jac[(row, j * s + l)] = bjc * dsig * x[(i, l)];
                        }
                    }
                    jac[(row, j * s + d + c)] = sig;
                }
            }
        }
        jac
    }

    fn homogeneity_degree(&self) -> Option<u32> {
        match self.activation {
            Activation::Relu => Some(2),
            Activation::Softplus { .. } => None,
        }
    }

    fn describe(&self) -> String {
        format!(
            "two-layer {:?} net m={} d={} k={} scale={:?}",
            self.activation, self.width, self.input_dim, self.output_dim, self.scale
        )
    }
}

impl NeuronModel for TwoLayerNet {
    fn activation(&self) -> Activation {
        self.activation
    }

    fn neurons(&self, w: &[f64]) -> Vec<Neuron> {
        let (d, s) = (self.input_dim, self.stride());
        (0..self.width)
            .map(|j| Neuron {
                inner: w[j * s..j * s + d].to_vec(),
                outer: w[j * s + d..(j + 1) * s].to_vec(),
                sign: 1.0,
            })
            .collect()
    }

    fn pre_activations(&self, w: &[f64], set: &EvaluationSet) -> DMatrix<f64> {
        let (inner, _) = self.split(w);
        set.inputs() * inner.transpose()
    }
}
