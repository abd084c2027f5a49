use nalgebra::DMatrix;

use super::{EvaluationSet, Model};

/// `f(w, x)_c = sum_l W[c, l] x_l` with `W` stored row-major in `w`, so
/// `p = k d`. Affine in `w`: its Jacobian does not depend on the point.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub input_dim: usize,
    pub output_dim: usize,
}

impl LinearModel {
    pub fn new(input_dim: usize, output_dim: usize) -> Self {
        LinearModel {
            input_dim,
            output_dim,
        }
    }
}

impl Model for LinearModel {
    fn param_count(&self) -> usize {
        self.input_dim * self.output_dim
    }
    fn input_dim(&self) -> usize {
        self.input_dim
    }
    fn output_dim(&self) -> usize {
        self.output_dim
    }
    fn forward(&self, w: &[f64], set: &EvaluationSet) -> Vec<f64> {
        self.pushforward(w, set, w)
    }
    fn pushforward(&self, _w: &[f64], set: &EvaluationSet, v: &[f64]) -> Vec<f64> {
        let (d, k) = (self.input_dim, self.output_dim);
        let x = set.inputs();
        let mut out = vec![0.0; set.len() * k];
        for i in 0..set.len() {
            for c in 0..k {
                out[i * k + c] = (0..d).map(|l| v[c * d + l] * x[(i, l)]).sum();
            }
        }
        out
    }
    fn pullback(&self, _w: &[f64], set: &EvaluationSet, cot: &[f64]) -> Vec<f64> {
        let (d, k) = (self.input_dim, self.output_dim);
        let x = set.inputs();
        let mut g = vec![0.0; d * k];
        for i in 0..set.len() {
            for c in 0..k {
                let ci = cot[i * k + c];
                for l in 0..d {
                    g[c * d + l] += ci * x[(i, l)];
                }
            }
        }
        g
    }
    fn dense_jacobian(&self, _w: &[f64], set: &EvaluationSet) -> DMatrix<f64> {
        let (d, k) = (self.input_dim, self.output_dim);
        let x = set.inputs();
        let mut jac = DMatrix::zeros(set.len() * k, d * k);
        for i in 0..set.len() {
            for c in 0..k {
                for l in 0..d {
                    jac[(i * k + c, c * d + l)] = x[(i, l)];
                }
            }
        }
        jac
    }
    fn homogeneity_degree(&self) -> Option<u32> {
        Some(1)
    }
    fn describe(&self) -> String {
        format!("linear model d={} k={}", self.input_dim, self.output_dim)
    }
}

/// Input-independent quadratic form `h(w) = w^T Q w` (k = 1), with
/// `Dh(w) v = 2 w^T Q v` and constant second derivative `2Q`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticModel {
    q: DMatrix<f64>,
    input_dim: usize,
}

impl QuadraticModel {
    /// `q` is symmetrized as `(q + q^T)/2`.
    pub fn new(q: DMatrix<f64>, input_dim: usize) -> Self {
        assert!(q.is_square(), "quadratic form must be square");
        let q = (&q + q.transpose()) * 0.5;
        QuadraticModel { q, input_dim }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.q
    }

    fn qw(&self, w: &[f64]) -> Vec<f64> {
        super::matvec(&self.q, w)
    }
}

impl Model for QuadraticModel {
    fn param_count(&self) -> usize {
        self.q.nrows()
    }
    fn input_dim(&self) -> usize {
        self.input_dim
    }
    fn output_dim(&self) -> usize {
        1
    }
    fn forward(&self, w: &[f64], set: &EvaluationSet) -> Vec<f64> {
        let v = crate::linalg::dot(w, &self.qw(w));
        vec![v; set.len()]
    }
    fn pushforward(&self, w: &[f64], set: &EvaluationSet, v: &[f64]) -> Vec<f64> {
        let dv = 2.0 * crate::linalg::dot(&self.qw(w), v);
        vec![dv; set.len()]
    }
    fn pullback(&self, w: &[f64], _set: &EvaluationSet, cot: &[f64]) -> Vec<f64> {
        let s: f64 = cot.iter().sum();
        self.qw(w).into_iter().map(|x| 2.0 * s * x).collect()
    }
    fn homogeneity_degree(&self) -> Option<u32> {
        Some(2)
    }
    fn describe(&self) -> String {
        format!("quadratic form p={}", self.q.nrows())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{evaluate, jacobian};

    #[test]
    fn linear_jacobian_is_the_design_matrix() {
        let m = LinearModel::new(3, 2);
        let set = EvaluationSet::from_rows(&[vec![1.0, 2.0, 3.0], vec![-1.0, 0.5, 0.0]]).unwrap();
        let w: Vec<f64> = (0..6).map(|i| i as f64 * 0.3 - 1.0).collect();
        let j1 = jacobian(&m, &w, &set).unwrap().dense().unwrap();
        let j2 = jacobian(&m, &[0.0; 6], &set).unwrap().dense().unwrap();
        assert_eq!(j1, j2);
        let y = evaluate(&m, &w, &set).unwrap();
        let jw = crate::model::matvec(&j1, &w);
        for (a, b) in y.values().iter().zip(&jw) {
            assert!((a - b).abs() < 1e-14);
        }
        let generic = {
            let c: Vec<f64> = vec![1.0, -2.0, 0.5, 3.0];
            (m.pullback(&w, &set, &c), crate::model::matvec_t(&j1, &c))
        };
        for (a, b) in generic.0.iter().zip(&generic.1) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn quadratic_derivative_by_hand() {
        let q = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0]);
        let m = QuadraticModel::new(q, 1);
        let set = EvaluationSet::from_rows(&[vec![0.0]]).unwrap();
        let w = [1.0, -1.0];
        // w^T Q w = 2 - 2 + 3 = 3
        assert_eq!(evaluate(&m, &w, &set).unwrap().values(), &[3.0]);
        let g = m.pullback(&w, &set, &[1.0]);
        assert_eq!(g, vec![2.0, -4.0]);
    }
}
