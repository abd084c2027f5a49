use crate::error::{Error, Result};
use crate::loss::Loss;
use crate::model::OutputPoint;

/// Samples of an output-space flow `y' = -Sigma(t) grad R(y)`.
#[derive(Debug, Clone)]
pub struct KernelTrajectory {
    pub t: Vec<f64>,
    pub y: Vec<OutputPoint>,
    pub loss: Vec<f64>,
}

/// Integrates `y'(t) = -Sigma(t) grad R(y(t))` with RK4.
///
/// `sigma(t, v)` applies the kernel at time `t` to `v`, both expressed in
/// the orthonormal basis of `F` (see [`OutputPoint::to_orthonormal`]); a
/// [`crate::linearize::KernelMatrix`] is already in that basis.
pub fn integrate_kernel_flow<F>(
    sigma: F,
    loss: &Loss,
    y0: &OutputPoint,
    dt: f64,
    steps: usize,
    record_every: usize,
) -> Result<KernelTrajectory>
where
    F: Fn(f64, &[f64]) -> Vec<f64>,
{
    if !(dt > 0.0) {
        return Err(Error::invalid(format!(
            "time step must be positive, got {dt}"
        )));
    }
    let velocity = |t: f64, y: &[f64]| -> Vec<f64> {
        let point = y0.from_orthonormal(y);
        let g = y0
            .with_values(loss.gradient_raw(point.values()))
            .to_orthonormal();
        sigma(t, &g).into_iter().map(|v| -v).collect()
    };
    let mut y = y0.to_orthonormal();
    let mut out = KernelTrajectory {
        t: vec![0.0],
        y: vec![y0.clone()],
        loss: vec![loss.value_raw(y0.values())],
    };
    let every = record_every.max(1);
    for step in 1..=steps {
        let t = (step - 1) as f64 * dt;
        let k1 = velocity(t, &y);
        let y2: Vec<f64> = y.iter().zip(&k1).map(|(a, b)| a + 0.5 * dt * b).collect();
        let k2 = velocity(t + 0.5 * dt, &y2);
        let y3: Vec<f64> = y.iter().zip(&k2).map(|(a, b)| a + 0.5 * dt * b).collect();
        let k3 = velocity(t + 0.5 * dt, &y3);
        let y4: Vec<f64> = y.iter().zip(&k3).map(|(a, b)| a + dt * b).collect();
        let k4 = velocity(t + dt, &y4);
        for i in 0..y.len() {
            y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { t: t + dt });
        }
        if step % every == 0 || step == steps {
            let point = y0.from_orthonormal(&y);
            out.t.push(step as f64 * dt);
            out.loss.push(loss.value_raw(point.values()));
            out.y.push(point);
        }
    }
    Ok(out)
}
