use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::flow::{integrate_kernel_flow, Trajectory};
use crate::linalg::{self, LineFit};
use crate::loss::Loss;
use crate::model::{matvec, OutputPoint};

use super::NormEstimates;

/// Outcome of a bound check.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "status", content = "reason")]
pub enum BoundStatus {
    Satisfied,
    Violated,
    /// The bound's validity condition fails; nothing is asserted.
    NotApplicable(String),
    /// The theorem's hypotheses on `alpha` or `h(w0)` are not met.
    PreconditionUnmet(String),
    /// `Dh(w0)` is not surjective.
    NotOverParameterized,
}

impl BoundStatus {
    pub fn is_satisfied(&self) -> bool {
        matches!(self, BoundStatus::Satisfied)
    }

    fn from_check(ok: bool) -> Self {
        if ok {
            BoundStatus::Satisfied
        } else {
            BoundStatus::Violated
        }
    }
}

/// Finite-horizon comparison for the square loss at iteration number `K`.
#[derive(Debug, Clone, Serialize)]
pub struct Theorem2Check {
    pub alpha: f64,
    pub iterations: f64,
    /// Safety factor applied to both Lipschitz estimates.
    pub safety: f64,
    pub lip_h: f64,
    pub lip_dh: f64,
    pub horizon: f64,
    pub radius: f64,
    /// Smallest `alpha` for which the bound applies.
    pub alpha_threshold: f64,
    /// `||alpha h(w(T)) - alpha h_bar(w_bar(T))|| / ||alpha h(w0) - y*||`.
    pub measured_lhs: f64,
    /// `(K^2/alpha) (Lip(Dh)/Lip(h)^2) ||alpha h(w0) - y*||`.
    pub bound_rhs: f64,
    pub status: BoundStatus,
    /// `(alpha Lip(h) / ||y(0) - y*||) ||w(T) - w_bar(T)||`.
    pub param_lhs: f64,
    /// `(K^2/alpha) (Lip(Dh)/Lip(h)^2) ||y(0) - y*|| (2 + 4K/3)`.
    pub param_rhs: f64,
    pub param_status: BoundStatus,
}

/// Flow time `T = K / Lip(h)^2` with the inflated Lipschitz estimate.
pub fn theorem2_horizon(norms: &NormEstimates, iterations: f64, safety: f64) -> f64 {
    let l = safety * norms.lip_h;
    iterations / (l * l)
}

pub fn check_theorem2_bound(
    traj: &Trajectory,
    traj_lin: &Trajectory,
    norms: &NormEstimates,
    loss: &Loss,
    alpha: f64,
    iterations: f64,
    safety: f64,
) -> Result<Theorem2Check> {
    if !matches!(loss.kind(), crate::loss::LossKind::Square) {
        return Err(Error::invalid(
            "the finite-horizon bound is stated for the square loss",
        ));
    }
    let lip_h = safety * norms.lip_h;
    let lip_dh = safety * norms.lip_dh;
    let horizon = iterations / (lip_h * lip_h);
    let residual0 = traj.initial().y.sub(loss.target()).norm();
    let radius = norms.config.radius;
    let alpha_threshold = iterations * residual0 / (radius * lip_h);
    let bound_rhs = iterations * iterations / alpha * lip_dh / (lip_h * lip_h) * residual0;
    let param_rhs = bound_rhs * (2.0 + 4.0 * iterations / 3.0);

    let mut check = Theorem2Check {
        alpha,
        iterations,
        safety,
        lip_h,
        lip_dh,
        horizon,
        radius,
        alpha_threshold,
        measured_lhs: f64::NAN,
        bound_rhs,
        status: BoundStatus::NotApplicable(String::new()),
        param_lhs: f64::NAN,
        param_rhs,
        param_status: BoundStatus::NotApplicable(String::new()),
    };
    let reach = traj.horizon().min(traj_lin.horizon());
    if reach < horizon * (1.0 - 1e-9) {
        return Err(Error::invalid(format!(
            "trajectories stop at t={reach}, before the horizon T={horizon}"
        )));
    }
    let y = traj.y_at(horizon);
    let y_lin = traj_lin.y_at(horizon);
    let dy = traj.initial().y.with_values(linalg::sub(&y, &y_lin)).norm();
    let dw = linalg::dist(&traj.w_at(horizon), &traj_lin.w_at(horizon));
    if residual0 > 0.0 {
        check.measured_lhs = dy / residual0;
        check.param_lhs = alpha * lip_h / residual0 * dw;
    } else {
        check.measured_lhs = 0.0;
        check.param_lhs = 0.0;
    }
    if alpha < alpha_threshold {
        let reason = format!("alpha={alpha} is below the validity threshold {alpha_threshold}");
        check.status = BoundStatus::NotApplicable(reason.clone());
        check.param_status = BoundStatus::NotApplicable(reason);
    } else {
        check.status = BoundStatus::from_check(check.measured_lhs <= bound_rhs);
        check.param_status = BoundStatus::from_check(check.param_lhs <= param_rhs);
    }
    Ok(check)
}

/// Global linear convergence in the over-parameterized case.
#[derive(Debug, Clone, Serialize)]
pub struct Theorem3Check {
    pub alpha: f64,
    pub safety: f64,
    pub sigma_min: f64,
    pub condition: f64,
    /// `sigma_min^3 / (32 kappa^{3/2} ||Dh(w0)|| Lip(Dh))`.
    pub c0: f64,
    /// `||y*|| / C0`.
    pub alpha_threshold: f64,
    /// `m sigma_min^2 / 4`.
    pub bound_rate: f64,
    /// Fitted decay rate of `||alpha h(w(t)) - y*||` (natural log).
    pub rate_fit: Option<LineFit>,
    /// Largest ratio of the measured residual to the envelope.
    pub max_ratio: f64,
    pub status: BoundStatus,
}

/// Checks `||alpha h(w(t)) - y*|| <= sqrt(kappa) ||alpha h(w0) - y*|| e^{-m sigma^2 t / 4}`
/// at every recorded sample.
pub fn check_theorem3_rate(
    traj: &Trajectory,
    norms: &NormEstimates,
    loss: &Loss,
    alpha: f64,
    safety: f64,
) -> Result<Theorem3Check> {
    let m = loss.strong_convexity();
    let cond = loss.condition();
    let sigma = norms.sigma_min;
    let lip_dh = safety * norms.lip_dh;
    let mut check = Theorem3Check {
        alpha,
        safety,
        sigma_min: sigma,
        condition: cond,
        c0: 0.0,
        alpha_threshold: f64::INFINITY,
        bound_rate: m * sigma * sigma / 4.0,
        rate_fit: None,
        max_ratio: f64::NAN,
        status: BoundStatus::NotOverParameterized,
    };
    if !(sigma > 1e-10 * norms.dh_norm) {
        return Ok(check);
    }
    check.c0 = sigma.powi(3) / (32.0 * cond.powf(1.5) * norms.dh_norm * lip_dh);
    let target_norm = loss.target().norm();
    check.alpha_threshold = target_norm / check.c0;

    let residual0 = traj.initial().y.sub(loss.target()).norm();
    let mut ratio: f64 = 0.0;
    let (mut ts, mut logs) = (Vec::new(), Vec::new());
    for s in &traj.samples {
        let r = s.y.sub(loss.target()).norm();
        let envelope = cond.sqrt() * residual0 * (-check.bound_rate * s.t).exp();
        if envelope > 0.0 {
            ratio = ratio.max(r / envelope);
        } else if r > 0.0 {
            ratio = f64::INFINITY;
        }
        if r > 0.0 {
            ts.push(s.t);
            logs.push(r.ln());
        }
    }
    check.max_ratio = ratio;
    check.rate_fit = linalg::fit_line(&ts, &logs).ok().map(|mut f| {
        f.slope = -f.slope;
        f
    });
    check.status = if norms.h0_norm > check.c0 {
        BoundStatus::PreconditionUnmet(format!(
            "||h(w0)|| = {} exceeds C0 = {}",
            norms.h0_norm, check.c0
        ))
    } else if alpha <= check.alpha_threshold {
        BoundStatus::PreconditionUnmet(format!(
            "alpha={alpha} is not above the threshold {}",
            check.alpha_threshold
        ))
    } else {
        BoundStatus::from_check(ratio <= 1.0)
    };
    Ok(check)
}

/// Result of an output-space flow check against an envelope.
#[derive(Debug, Clone, Serialize)]
pub struct EnvelopeCheck {
    pub lambda: f64,
    /// Largest ratio of the measured quantity to the envelope.
    pub max_ratio: f64,
    pub samples: usize,
    pub satisfied: bool,
}

fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    linalg::symmetric_eigenvalues(m)
        .last()
        .copied()
        .unwrap_or(0.0)
}

/// Flow `y' = -Sigma grad R(y)` with constant `Sigma >= lambda I` (in the
/// orthonormal basis) against `sqrt(M/m) ||y(0) - y*|| e^{-m lambda t}`.
pub fn check_lemma1(
    sigma: &DMatrix<f64>,
    loss: &Loss,
    y0: &OutputPoint,
    dt: f64,
    steps: usize,
) -> Result<EnvelopeCheck> {
    let lambda = min_eigenvalue(sigma);
    if !(lambda > 0.0) {
        return Err(Error::invalid("kernel must be positive definite"));
    }
    let traj = integrate_kernel_flow(|_, v| matvec(sigma, v), loss, y0, dt, steps, 1)?;
    let (m, big_m) = (loss.strong_convexity(), loss.smoothness());
    let r0 = y0.sub(loss.target()).norm();
    let mut ratio: f64 = 0.0;
    for (t, y) in traj.t.iter().zip(&traj.y) {
        let envelope = (big_m / m).sqrt() * r0 * (-m * lambda * t).exp();
        let r = y.sub(loss.target()).norm();
        ratio = ratio.max(if envelope > 0.0 { r / envelope } else { 0.0 });
    }
    Ok(EnvelopeCheck {
        lambda,
        max_ratio: ratio,
        samples: traj.t.len(),
        satisfied: ratio <= 1.0,
    })
}

/// Details of a stability check between a perturbed and a frozen kernel.
#[derive(Debug, Clone, Serialize)]
pub struct Lemma2Check {
    pub lambda: f64,
    /// `sup_t ||(Sigma(t) - Sigma(0)) grad R(y(t))||` over the samples.
    pub perturbation: f64,
    /// `K ||Sigma(0)||^{1/2} / (lambda^{3/2} m)`.
    pub bound: f64,
    pub max_deviation: f64,
    pub satisfied: bool,
}

/// `y' = -Sigma(t) grad R(y)` with `Sigma(t) = Sigma0 + s(t) P` against
/// `y_bar' = -Sigma0 grad R(y_bar)`. `P` must be positive semidefinite and
/// `s >= 0`, so that `Sigma(t) >= lambda_min(Sigma0)`.
pub fn check_lemma2<S: Fn(f64) -> f64>(
    sigma0: &DMatrix<f64>,
    perturbation: &DMatrix<f64>,
    schedule: S,
    loss: &Loss,
    y0: &OutputPoint,
    dt: f64,
    steps: usize,
) -> Result<Lemma2Check> {
    let lambda = min_eigenvalue(sigma0);
    if !(lambda > 0.0) {
        return Err(Error::invalid("kernel must be positive definite"));
    }
    let apply_t = |t: f64, v: &[f64]| {
        let a = matvec(sigma0, v);
        let b = matvec(perturbation, v);
        let s = schedule(t);
        a.iter().zip(&b).map(|(x, y)| x + s * y).collect::<Vec<_>>()
    };
    let moving = integrate_kernel_flow(apply_t, loss, y0, dt, steps, 1)?;
    let frozen = integrate_kernel_flow(|_, v| matvec(sigma0, v), loss, y0, dt, steps, 1)?;
    let mut k_sup: f64 = 0.0;
    let mut dev: f64 = 0.0;
    for ((t, y), yb) in moving.t.iter().zip(&moving.y).zip(&frozen.y) {
        let g = y
            .with_values(loss.gradient_raw(y.values()))
            .to_orthonormal();
        let pg = matvec(perturbation, &g);
        k_sup = k_sup.max(schedule(*t).abs() * linalg::norm(&pg));
        dev = dev.max(y.sub(yb).norm());
    }
    let top = linalg::symmetric_eigenvalues(sigma0)[0];
    let bound = k_sup * top.sqrt() / (lambda.powf(1.5) * loss.strong_convexity());
    Ok(Lemma2Check {
        lambda,
        perturbation: k_sup,
        bound,
        max_deviation: dev,
        satisfied: dev <= bound,
    })
}
