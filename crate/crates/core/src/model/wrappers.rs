//! Wrappers that move a model into or out of the lazy regime.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use nalgebra::DMatrix;

use super::{Activation, EvaluationSet, Model, Neuron, NeuronModel, ParamVector};

/// `alpha * h`, so `D(alpha h) = alpha Dh`.
#[derive(Debug, Clone)]
pub struct Scaled<M> {
    pub base: M,
    pub alpha: f64,
}

impl<M: Model> Scaled<M> {
    pub fn new(base: M, alpha: f64) -> Self {
        Scaled { base, alpha }
    }
}

impl<M: Model> Model for Scaled<M> {
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
        let mut y = self.base.forward(w, set);
        y.iter_mut().for_each(|v| *v *= self.alpha);
        y
    }
    fn pushforward(&self, w: &[f64], set: &EvaluationSet, v: &[f64]) -> Vec<f64> {
        let mut y = self.base.pushforward(w, set, v);
        y.iter_mut().for_each(|x| *x *= self.alpha);
        y
    }
    fn pullback(&self, w: &[f64], set: &EvaluationSet, c: &[f64]) -> Vec<f64> {
        let mut g = self.base.pullback(w, set, c);
        g.iter_mut().for_each(|x| *x *= self.alpha);
        g
    }
    fn dense_jacobian(&self, w: &[f64], set: &EvaluationSet) -> DMatrix<f64> {
        self.base.dense_jacobian(w, set) * self.alpha
    }
    fn homogeneity_degree(&self) -> Option<u32> {
        self.base.homogeneity_degree()
    }
    fn describe(&self) -> String {
        format!("{} x ({})", self.alpha, self.base.describe())
    }
}

impl<M: NeuronModel> NeuronModel for Scaled<M> {
    fn activation(&self) -> Activation {
        self.base.activation()
    }
    fn neurons(&self, w: &[f64]) -> Vec<Neuron> {
        let mut ns = self.base.neurons(w);
        for n in &mut ns {
            n.sign *= self.alpha.signum();
        }
        ns
    }
    fn pre_activations(&self, w: &[f64], set: &EvaluationSet) -> DMatrix<f64> {
        self.base.pre_activations(w, set)
    }
}

/// `h(w) - h(w0)`: zero output at the anchor, same differential everywhere.
///
/// The reference output is cached per input set, so repeated evaluation on
/// a training set costs one forward pass.
#[derive(Debug)]
pub struct Centered<M> {
    pub base: M,
    anchor: ParamVector,
    reference: Mutex<HashMap<u64, Arc<Vec<f64>>>>,
}

impl<M: Clone> Clone for Centered<M> {
    fn clone(&self) -> Self {
        Centered {
            base: self.base.clone(),
            anchor: self.anchor.clone(),
            reference: Mutex::new(self.reference.lock().unwrap().clone()),
        }
    }
}

impl<M: Model> Centered<M> {
    pub fn new(base: M, anchor: ParamVector) -> Self {
        Centered {
            base,
            anchor,
            reference: Mutex::new(HashMap::new()),
        }
    }

    pub fn anchor(&self) -> &ParamVector {
        &self.anchor
    }

    /// Stored `h(w0)` on `set`.
    pub fn reference(&self, set: &EvaluationSet) -> Arc<Vec<f64>> {
        let mut cache = self.reference.lock().unwrap();
        if let Some(r) = cache.get(&set.inputs_id()) {
            return r.clone();
        }
        if cache.len() >= 8 {
            cache.clear();
        }
        let r = Arc::new(self.base.forward(&self.anchor, set));
        cache.insert(set.inputs_id(), r.clone());
        r
    }
}

impl<M: Model> Model for Centered<M> {
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
        let r = self.reference(set);
        let mut y = self.base.forward(w, set);
        y.iter_mut().zip(r.iter()).for_each(|(a, b)| *a -= b);
        y
    }
    fn pushforward(&self, w: &[f64], set: &EvaluationSet, v: &[f64]) -> Vec<f64> {
        self.base.pushforward(w, set, v)
    }
    fn pullback(&self, w: &[f64], set: &EvaluationSet, c: &[f64]) -> Vec<f64> {
        self.base.pullback(w, set, c)
    }
    fn forward_pullback(
        &self,
        w: &[f64],
        set: &EvaluationSet,
        cotangent: &mut dyn FnMut(&[f64]) -> Vec<f64>,
    ) -> (Vec<f64>, Vec<f64>) {
        let r = self.reference(set);
        let mut shifted = Vec::new();
        let (_, g) = self.base.forward_pullback(w, set, &mut |y: &[f64]| {
            shifted = y.iter().zip(r.iter()).map(|(a, b)| a - b).collect();
            cotangent(&shifted)
        });
        (shifted, g)
    }
    fn dense_jacobian(&self, w: &[f64], set: &EvaluationSet) -> DMatrix<f64> {
        self.base.dense_jacobian(w, set)
    }
    fn describe(&self) -> String {
        format!("centered({})", self.base.describe())
    }
}

impl<M: NeuronModel> NeuronModel for Centered<M> {
    fn activation(&self) -> Activation {
        self.base.activation()
    }
    fn neurons(&self, w: &[f64]) -> Vec<Neuron> {
        self.base.neurons(w)
    }
    fn pre_activations(&self, w: &[f64], set: &EvaluationSet) -> DMatrix<f64> {
        self.base.pre_activations(w, set)
    }
}

/// `h'(u, v) = h(u) - h(v)` over doubled parameters `(u, v)`.
///
/// Started from `(w0, w0)` the output is exactly zero, because both halves
/// are computed by the same code on the same numbers. For a two-layer net
/// this is the paired initialization where the second half of the neurons
/// copies the first half with the opposite output sign.
#[derive(Debug, Clone)]
pub struct Symmetrized<M> {
    pub base: M,
}

impl<M: Model> Symmetrized<M> {
    pub fn new(base: M) -> Self {
        Symmetrized { base }
    }

    /// The doubled initialization `(w0, w0)`.
    pub fn init(&self, half: &ParamVector) -> ParamVector {
        let mut w = half.to_vec();
        w.extend_from_slice(half);
        ParamVector::from(w)
    }

    fn halves<'a>(&self, w: &'a [f64]) -> (&'a [f64], &'a [f64]) {
        w.split_at(self.base.param_count())
    }
}

impl<M: Model> Model for Symmetrized<M> {
    fn param_count(&self) -> usize {
        2 * self.base.param_count()
    }
    fn input_dim(&self) -> usize {
        self.base.input_dim()
    }
    fn output_dim(&self) -> usize {
        self.base.output_dim()
    }
    fn forward(&self, w: &[f64], set: &EvaluationSet) -> Vec<f64> {
        let (u, v) = self.halves(w);
        let a = self.base.forward(u, set);
        let b = self.base.forward(v, set);
        a.iter().zip(&b).map(|(x, y)| x - y).collect()
    }
    fn pushforward(&self, w: &[f64], set: &EvaluationSet, dv: &[f64]) -> Vec<f64> {
        let (u, v) = self.halves(w);
        let (du, dw) = self.halves(dv);
        let a = self.base.pushforward(u, set, du);
        let b = self.base.pushforward(v, set, dw);
        a.iter().zip(&b).map(|(x, y)| x - y).collect()
    }
    fn pullback(&self, w: &[f64], set: &EvaluationSet, c: &[f64]) -> Vec<f64> {
        let (u, v) = self.halves(w);
        let mut g = self.base.pullback(u, set, c);
        g.extend(self.base.pullback(v, set, c).into_iter().map(|x| -x));
        g
    }
    fn forward_pullback(
        &self,
        w: &[f64],
        set: &EvaluationSet,
        cotangent: &mut dyn FnMut(&[f64]) -> Vec<f64>,
    ) -> (Vec<f64>, Vec<f64>) {
        let (u, v) = self.halves(w);
        let b = self.base.forward(v, set);
        let mut out = Vec::new();
        let mut cot = Vec::new();
        let (_, mut g) = self.base.forward_pullback(u, set, &mut |a: &[f64]| {
            out = a.iter().zip(&b).map(|(x, y)| x - y).collect();
            cot = cotangent(&out);
            cot.clone()
        });
        g.extend(self.base.pullback(v, set, &cot).into_iter().map(|x| -x));
        (out, g)
    }
    fn dense_jacobian(&self, w: &[f64], set: &EvaluationSet) -> DMatrix<f64> {
        let (u, v) = self.halves(w);
        let a = self.base.dense_jacobian(u, set);
        let b = self.base.dense_jacobian(v, set);
        let p = self.base.param_count();
        let mut out = DMatrix::zeros(a.nrows(), 2 * p);
        out.columns_mut(0, p).copy_from(&a);
        out.columns_mut(p, p).copy_from(&(-b));
        out
    }
    fn homogeneity_degree(&self) -> Option<u32> {
        self.base.homogeneity_degree()
    }
    fn describe(&self) -> String {
        format!("symmetrized({})", self.base.describe())
    }
}

impl<M: NeuronModel> NeuronModel for Symmetrized<M> {
    fn activation(&self) -> Activation {
        self.base.activation()
    }
    fn neurons(&self, w: &[f64]) -> Vec<Neuron> {
        let (u, v) = self.halves(w);
        let mut ns = self.base.neurons(u);
        ns.extend(self.base.neurons(v).into_iter().map(|mut n| {
            n.sign = -n.sign;
            n
        }));
        ns
    }
    fn pre_activations(&self, w: &[f64], set: &EvaluationSet) -> DMatrix<f64> {
        let (u, v) = self.halves(w);
        let a = self.base.pre_activations(u, set);
        let b = self.base.pre_activations(v, set);
        let mut out = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
        out.columns_mut(0, a.ncols()).copy_from(&a);
        out.columns_mut(a.ncols(), b.ncols()).copy_from(&b);
        out
    }
}
