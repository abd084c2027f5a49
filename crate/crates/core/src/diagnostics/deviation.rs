use serde::Serialize;

use crate::error::{Error, Result};
use crate::flow::Trajectory;
use crate::linalg::{self, LineFit};

/// Distances between a flow and its linearized counterpart.
#[derive(Debug, Clone, Serialize)]
pub struct DeviationReport {
    pub alpha: f64,
    pub t: Vec<f64>,
    /// `||w_alpha(t) - w0||`.
    pub dist_to_init: Vec<f64>,
    /// `||w_alpha(t) - w_bar_alpha(t)||`.
    pub dist_to_linearized: Vec<f64>,
    /// `||alpha h(w_alpha(t)) - alpha h_bar(w_bar_alpha(t))||`.
    pub output_deviation: Vec<f64>,
    pub sup_dist_to_init: f64,
    pub sup_dist_to_linearized: f64,
    pub sup_output_deviation: f64,
}

/// Compares two trajectories on the time grid of `traj`; the linearized
/// one is interpolated linearly when its grid differs.
pub fn compare_flows(
    traj: &Trajectory,
    traj_lin: &Trajectory,
    alpha: f64,
) -> Result<DeviationReport> {
    let (t1, t2) = (traj.horizon(), traj_lin.horizon());
    if (t1 - t2).abs() > 1e-9 * t1.abs().max(t2.abs()).max(1.0) {
        return Err(Error::invalid(format!(
            "trajectory horizons differ: {t1} vs {t2}"
        )));
    }
    let w0 = &traj.initial().w;
    let same_grid = traj.samples.len() == traj_lin.samples.len()
        && traj
            .samples
            .iter()
            .zip(&traj_lin.samples)
            .all(|(a, b)| a.t == b.t);
    let mut report = DeviationReport {
        alpha,
        t: Vec::new(),
        dist_to_init: Vec::new(),
        dist_to_linearized: Vec::new(),
        output_deviation: Vec::new(),
        sup_dist_to_init: 0.0,
        sup_dist_to_linearized: 0.0,
        sup_output_deviation: 0.0,
    };
    for (i, s) in traj.samples.iter().enumerate() {
        let (wl, yl) = if same_grid {
            (
                traj_lin.samples[i].w.to_vec(),
                traj_lin.samples[i].y.values().to_vec(),
            )
        } else {
            (traj_lin.w_at(s.t), traj_lin.y_at(s.t))
        };
        let dy = s.y.with_values(linalg::sub(s.y.values(), &yl)).norm();
        report.t.push(s.t);
        report.dist_to_init.push(w0.distance(&s.w));
        report.dist_to_linearized.push(linalg::dist(&s.w, &wl));
        report.output_deviation.push(dy);
    }
    let sup = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);
    report.sup_dist_to_init = sup(&report.dist_to_init);
    report.sup_dist_to_linearized = sup(&report.dist_to_linearized);
    report.sup_output_deviation = sup(&report.output_deviation);
    Ok(report)
}

/// Log-log slopes of the three suprema against `alpha`.
#[derive(Debug, Clone, Serialize)]
pub struct DeviationSlopes {
    pub alphas: Vec<f64>,
    pub dist_to_init: LineFit,
    pub dist_to_linearized: LineFit,
    pub output_deviation: LineFit,
}

/// Fits the slopes over an `alpha` grid of at least three values spanning
/// at least two decades.
pub fn deviation_slopes(reports: &[DeviationReport]) -> Result<DeviationSlopes> {
    let alphas: Vec<f64> = reports.iter().map(|r| r.alpha).collect();
    let lo = alphas.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = alphas.iter().copied().fold(0.0, f64::max);
    if alphas.len() < 3 || hi / lo < 100.0 - 1e-9 {
        return Err(Error::invalid(
            "slope fits need at least 3 alpha values spanning 2 decades",
        ));
    }
    let fit = |f: fn(&DeviationReport) -> f64| {
        let y: Vec<f64> = reports.iter().map(f).collect();
        linalg::loglog_fit(&alphas, &y)
    };
    Ok(DeviationSlopes {
        dist_to_init: fit(|r| r.sup_dist_to_init)?,
        dist_to_linearized: fit(|r| r.sup_dist_to_linearized)?,
        output_deviation: fit(|r| r.sup_output_deviation)?,
        alphas,
    })
}

/// Whether a fitted slope lies within `band` of `expected`.
pub fn slope_within(fit: &LineFit, expected: f64, band: f64) -> bool {
    (fit.slope - expected).abs() <= band
}
