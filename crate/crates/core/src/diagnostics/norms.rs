use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::linearize::{kernel_spectrum, tangent_kernel, DENSE_SPECTRUM_LIMIT};
use crate::loss::Loss;
use crate::model::{
    check_compat, evaluate, jacobian, EvaluationSet, Model, ParamVector, DENSE_LIMIT,
};
use crate::rng;

/// Knobs of the sampling estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorConfig {
    /// Radius of the ball around `w0` on which Lipschitz constants are
    /// estimated.
    pub radius: f64,
    /// Points sampled in that ball (at least 16).
    pub samples: usize,
    /// Random directions for the second-derivative estimate.
    pub directions: usize,
    /// Finite-difference step for the second-derivative estimate.
    pub epsilon: f64,
    /// Alternating refinement sweeps started from the best direction.
    pub refinements: usize,
    pub seed: u64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            radius: 1.0,
            samples: 16,
            directions: 64,
            epsilon: 1e-4,
            refinements: 8,
            seed: 0,
        }
    }
}

impl EstimatorConfig {
    pub fn with_radius(mut self, r: f64) -> Self {
        self.radius = r;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_samples(mut self, n: usize) -> Self {
        self.samples = n;
        self
    }

    pub fn with_directions(mut self, n: usize) -> Self {
        self.directions = n;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0) {
            return Err(Error::invalid(format!(
                "estimation radius must be positive, got {}",
                self.radius
            )));
        }
        if self.samples < 16 {
            return Err(Error::invalid(format!(
                "need at least 16 samples, got {}",
                self.samples
            )));
        }
        if self.directions == 0 || !(self.epsilon > 0.0) {
            return Err(Error::invalid(
                "need at least one direction and a positive epsilon",
            ));
        }
        Ok(())
    }
}

/// Norms and Lipschitz constants of `h` around `w0`. Everything obtained
/// by sampling is a lower bound on the quantity it names.
#[derive(Debug, Clone, Serialize)]
pub struct NormEstimates {
    pub h0_norm: f64,
    pub dh_norm: f64,
    /// Directional estimate of `||D^2 h(w0)||` as a bilinear map.
    pub d2h_norm: f64,
    pub lip_h: f64,
    pub lip_dh: f64,
    /// Smallest singular value of `Dh(w0)^T` (zero unless `nk <= p`).
    pub sigma_min: f64,
    /// Smallest nonzero singular value of `Dh(w0)^T`.
    pub sigma_min_nonzero: f64,
    pub rank: usize,
    pub config: EstimatorConfig,
    /// Parameter-space points at which Jacobians were evaluated.
    pub jacobian_evaluations: usize,
}

/// Operator norm of `A = Dh(w1) - Dh(w0)` (with `w0 = w1` allowed, giving
/// `||Dh(w1)||`), with its top right singular vector.
pub(crate) fn jacobian_difference_norm<M: Model + ?Sized>(
    model: &M,
    w1: &[f64],
    w0: Option<&[f64]>,
    set: &EvaluationSet,
    seed: u64,
) -> (f64, Vec<f64>) {
    let rows = set.len() * model.output_dim();
    let p = model.param_count();
    if rows * p <= DENSE_LIMIT && rows <= DENSE_SPECTRUM_LIMIT {
        let mut a = dense_orthonormal(model, w1, set);
        if let Some(w0) = w0 {
            a -= dense_orthonormal(model, w0, set);
        }
        let gram = &a * a.transpose();
        let eig = nalgebra::SymmetricEigen::new(gram);
        let (idx, top) =
            eig.eigenvalues
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |acc, (i, v)| {
                    if *v > acc.1 {
                        (i, *v)
                    } else {
                        acc
                    }
                });
        let u = eig.eigenvectors.column(idx);
        let v = a.tr_mul(&u);
        let nv = v.norm();
        let vec = if nv > 0.0 {
            (v / nv).as_slice().to_vec()
        } else {
            rng::unit_vector(&mut rng::stream(seed, rng::labels::ESTIMATOR), p)
        };
        return (top.max(0.0).sqrt(), vec);
    }
    let k = model.output_dim();
    let weights = set.weights();
    let apply = |v: &[f64]| {
        let mut y = model.pushforward(w1, set, v);
        if let Some(w0) = w0 {
            let y0 = model.pushforward(w0, set, v);
            y.iter_mut().zip(&y0).for_each(|(a, b)| *a -= b);
        }
        y
    };
    let adjoint = |u: &[f64]| {
        let wu: Vec<f64> = u
            .iter()
            .enumerate()
            .map(|(i, x)| x * weights[i / k])
            .collect();
        let mut g = model.pullback(w1, set, &wu);
        if let Some(w0) = w0 {
            let g0 = model.pullback(w0, set, &wu);
            g.iter_mut().zip(&g0).for_each(|(a, b)| *a -= b);
        }
        g
    };
    let res = linalg::operator_norm(p, apply, adjoint, 1e-8, seed);
    (res.value, res.vector)
}

fn dense_orthonormal<M: Model + ?Sized>(model: &M, w: &[f64], set: &EvaluationSet) -> DMatrix<f64> {
    let mut j = model.dense_jacobian(w, set);
    let k = model.output_dim();
    for (r, mut row) in j.row_iter_mut().enumerate() {
        row *= set.weights()[r / k].sqrt();
    }
    j
}

/// `max_u ||Dh(w0 + eps u) - Dh(w0)|| / eps` over random unit directions,
/// followed by alternating refinement: the top right singular vector of
/// the difference becomes the next direction (the second derivative is
/// symmetric, so this climbs towards its bilinear-form norm).
pub fn second_derivative_norm<M: Model + ?Sized>(
    model: &M,
    w0: &[f64],
    set: &EvaluationSet,
    cfg: &EstimatorConfig,
) -> (f64, usize) {
    let p = model.param_count();
    let mut r = rng::stream(cfg.seed, rng::labels::ESTIMATOR);
    let eps = cfg.epsilon;
    let probe = |u: &[f64]| -> (f64, Vec<f64>) {
        let w1: Vec<f64> = w0.iter().zip(u).map(|(a, b)| a + eps * b).collect();
        let (n, v) = jacobian_difference_norm(model, &w1, Some(w0), set, cfg.seed);
        (n / eps, v)
    };
    let mut best = (0.0, rng::unit_vector(&mut r, p));
    let mut evaluations = 0;
    for _ in 0..cfg.directions {
        let u = rng::unit_vector(&mut r, p);
        let (val, v) = probe(&u);
        evaluations += 1;
        if val > best.0 {
            best = (val, v);
        }
    }
    let mut dir = best.1.clone();
    for _ in 0..cfg.refinements {
        let (val, v) = probe(&dir);
        evaluations += 1;
        if val > best.0 {
            best.0 = val;
        }
        dir = v;
    }
    (best.0, evaluations)
}

/// All the estimates of [`NormEstimates`] at `w0`.
pub fn estimate_norms<M: Model + ?Sized>(
    model: &M,
    w0: &ParamVector,
    set: &EvaluationSet,
    cfg: &EstimatorConfig,
) -> Result<NormEstimates> {
    cfg.validate()?;
    check_compat(model, w0, set)?;
    let h0 = evaluate(model, w0, set)?;
    let dh_norm = jacobian(model, w0, set)?.operator_norm(1e-8, cfg.seed);
    let (d2h_norm, mut evaluations) = second_derivative_norm(model, w0, set, cfg);

    let mut r = rng::stream(rng::derive_seed(cfg.seed, 1), rng::labels::ESTIMATOR);
    let p = model.param_count();
    let mut points = vec![w0.to_vec()];
    for _ in 0..cfg.samples {
        let offset = rng::ball_point(&mut r, p, cfg.radius);
        points.push(w0.iter().zip(&offset).map(|(a, b)| a + b).collect());
    }
    let outputs: Vec<_> = points
        .iter()
        .map(|w| evaluate(model, w, set))
        .collect::<Result<_>>()?;
    let mut lip_h = dh_norm;
    for w in &points[1..] {
        let (n, _) = jacobian_difference_norm(model, w, None, set, cfg.seed);
        evaluations += 1;
        lip_h = lip_h.max(n);
    }
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let dw = linalg::dist(&points[i], &points[j]);
            if dw > 0.0 {
                lip_h = lip_h.max(outputs[i].sub(&outputs[j]).norm() / dw);
            }
        }
    }
    let mut lip_dh = d2h_norm;
    let pairs = (1..points.len())
        .map(|i| (0, i))
        .chain((1..points.len() - 1).map(|i| (i, i + 1)));
    for (i, j) in pairs {
        let dw = linalg::dist(&points[i], &points[j]);
        if dw > 0.0 {
            let (n, _) =
                jacobian_difference_norm(model, &points[j], Some(&points[i]), set, cfg.seed);
            evaluations += 1;
            lip_dh = lip_dh.max(n / dw);
        }
    }

    let (sigma_min, sigma_min_nonzero, rank) =
        if set.len() * model.output_dim() <= DENSE_SPECTRUM_LIMIT {
            let spec = kernel_spectrum(&tangent_kernel(model, w0, set)?)?;
            (
                spec.sigma_min.unwrap_or(0.0),
                spec.sigma_min_nonzero,
                spec.rank,
            )
        } else {
            (0.0, 0.0, 0)
        };

    Ok(NormEstimates {
        h0_norm: h0.norm(),
        dh_norm,
        d2h_norm,
        lip_h,
        lip_dh,
        sigma_min,
        sigma_min_nonzero,
        rank,
        config: *cfg,
        jacobian_evaluations: evaluations,
    })
}

/// `||h(w0) - y*|| ||D^2 h(w0)|| / ||Dh(w0)||^2` for the square loss.
pub fn kappa<M: Model + ?Sized>(
    model: &M,
    w0: &ParamVector,
    loss: &Loss,
    set: &EvaluationSet,
    cfg: &EstimatorConfig,
) -> Result<f64> {
    if !matches!(loss.kind(), crate::loss::LossKind::Square) {
        return Err(Error::invalid(
            "the scale criterion is defined for the square loss",
        ));
    }
    let h0 = evaluate(model, w0, set)?;
    let residual = h0.sub(loss.target()).norm();
    let dh = jacobian(model, w0, set)?.operator_norm(1e-8, cfg.seed);
    if dh == 0.0 {
        return Err(Error::CriticalInitialization("Dh(w0) = 0".into()));
    }
    let (d2h, _) = second_derivative_norm(model, w0, set, cfg);
    Ok(residual * d2h / (dh * dh))
}
