//! Small dense and matrix-free linear algebra used by the estimators.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::rng;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// `y += s * x`
pub fn axpy(s: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += s * xi;
    }
}

pub fn scale(s: f64, x: &mut [f64]) {
    for v in x {
        *v *= s;
    }
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// Result of a power iteration.
#[derive(Debug, Clone)]
pub struct PowerResult {
    pub value: f64,
    pub vector: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Largest eigenvalue of a symmetric positive semidefinite operator.
///
/// Stops when the Rayleigh quotient changes by less than `tol` relative.
pub fn power_iteration<F>(dim: usize, apply: F, tol: f64, max_iter: usize, seed: u64) -> PowerResult
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    if dim == 0 {
        return PowerResult {
            value: 0.0,
            vector: Vec::new(),
            iterations: 0,
            converged: true,
        };
    }
    let mut v = rng::unit_vector(&mut rng::stream(seed, rng::labels::ESTIMATOR), dim);
    let mut value = 0.0;
    for it in 1..=max_iter {
        let w = apply(&v);
        let rq = dot(&v, &w);
        let wn = norm(&w);
        if wn == 0.0 {
            return PowerResult {
                value: 0.0,
                vector: v,
                iterations: it,
                converged: true,
            };
        }
        let next: Vec<f64> = w.iter().map(|x| x / wn).collect();
        let change = (rq - value).abs();
        value = rq;
        v = next;
        if it > 1 && change <= tol * rq.abs().max(f64::MIN_POSITIVE) {
            return PowerResult {
                value,
                vector: v,
                iterations: it,
                converged: true,
            };
        }
    }
    PowerResult {
        value,
        vector: v,
        iterations: max_iter,
        converged: false,
    }
}

/// Operator norm of a linear map given by `apply` (dim_in -> dim_out) and
/// its adjoint, computed as the square root of the top eigenvalue of A*A.
pub fn operator_norm<A, T>(dim_in: usize, apply: A, adjoint: T, tol: f64, seed: u64) -> PowerResult
where
    A: Fn(&[f64]) -> Vec<f64>,
    T: Fn(&[f64]) -> Vec<f64>,
{
    let mut res = power_iteration(dim_in, |v| adjoint(&apply(v)), tol, 5000, seed);
    res.value = res.value.max(0.0).sqrt();
    res
}

/// Eigenvalues of a symmetric matrix in descending order.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let eig = nalgebra::SymmetricEigen::new(m.clone());
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    vals.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    vals
}

/// Top `r` eigenvalues of a symmetric PSD operator by orthogonal subspace
/// iteration with Rayleigh-Ritz extraction.
pub fn top_eigenvalues<F>(
    dim: usize,
    r: usize,
    apply: F,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let r = r.min(dim);
    if r == 0 {
        return Ok(Vec::new());
    }
    let mut rng = rng::stream(seed, rng::labels::ESTIMATOR);
    let mut q = DMatrix::from_fn(dim, r, |_, _| rng::normal(&mut rng));
    q = q.qr().q();
    let mut prev: Vec<f64> = vec![0.0; r];
    for _ in 0..max_iter {
        let mut z = DMatrix::zeros(dim, r);
        for j in 0..r {
            let col: Vec<f64> = q.column(j).iter().copied().collect();
            let az = apply(&col);
            z.set_column(j, &DVector::from_vec(az));
        }
        let small = q.transpose() * &z;
        let small = (&small + small.transpose()) * 0.5;
        let eig = nalgebra::SymmetricEigen::new(small);
        let mut order: Vec<usize> = (0..r).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
        let vals: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let done = vals
            .iter()
            .zip(&prev)
            .all(|(a, b)| (a - b).abs() <= tol * vals[0].abs().max(f64::MIN_POSITIVE));
        prev = vals;
        if done {
            return Ok(prev);
        }
        q = z.qr().q();
    }
    Err(Error::NoConvergence(format!(
        "subspace iteration for {r} eigenvalues did not settle in {max_iter} sweeps"
    )))
}

/// Outcome of a conjugate-gradient solve.
#[derive(Debug, Clone)]
pub struct CgResult {
    pub solution: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Conjugate gradients for a symmetric positive semidefinite system.
pub fn conjugate_gradient<F>(apply: F, rhs: &[f64], tol: f64, max_iter: usize) -> CgResult
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let n = rhs.len();
    let mut x = vec![0.0; n];
    let mut r = rhs.to_vec();
    let mut p = r.clone();
    let b_norm = norm(rhs).max(f64::MIN_POSITIVE);
    let mut rr = dot(&r, &r);
    let mut iterations = 0;
    while iterations < max_iter && rr.sqrt() > tol * b_norm {
        let ap = apply(&p);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            break;
        }
        let step = rr / pap;
        axpy(step, &p, &mut x);
        axpy(-step, &ap, &mut r);
        let rr_next = dot(&r, &r);
        let beta = rr_next / rr;
        for (pi, ri) in p.iter_mut().zip(&r) {
            *pi = ri + beta * *pi;
        }
        rr = rr_next;
        iterations += 1;
    }
    CgResult {
        solution: x,
        iterations,
        relative_residual: rr.sqrt() / b_norm,
    }
}

/// Ordinary least-squares line fit.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope.
    pub slope_stderr: f64,
    /// Root-mean-square residual.
    pub residual: f64,
}

pub fn fit_line(x: &[f64], y: &[f64]) -> Result<LineFit> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::invalid("line fit needs at least two paired points"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("line fit needs distinct abscissae"));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let e = b - (intercept + slope * a);
            e * e
        })
        .sum();
    let slope_stderr = if x.len() > 2 {
        (sse / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(LineFit {
        slope,
        intercept,
        slope_stderr,
        residual: (sse / n).sqrt(),
    })
}

/// Least-squares slope of `log10 y` against `log10 x`.
pub fn loglog_fit(x: &[f64], y: &[f64]) -> Result<LineFit> {
    if x.iter().chain(y).any(|v| *v <= 0.0 || !v.is_finite()) {
        return Err(Error::invalid("log-log fit needs positive finite data"));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.log10()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.log10()).collect();
    fit_line(&lx, &ly)
}

/// Spearman rank correlation (average ranks for ties).
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&i, &j| v[i].partial_cmp(&v[j]).unwrap());
        let mut out = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for k in i..=j {
                out[idx[k]] = avg;
            }
            i = j + 1;
        }
        out
    }
    let ra = ranks(a);
    let rb = ranks(b);
    let n = a.len() as f64;
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma) * (x - ma)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb) * (y - mb)).sum();
    cov / (va * vb).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_iteration_finds_top_eigenvalue() {
        let m = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 1.0, 3.0, 0.5, 0.0, 0.5, 1.0]);
        let top = symmetric_eigenvalues(&m)[0];
        let res = power_iteration(
            3,
            |v| (&m * DVector::from_column_slice(v)).as_slice().to_vec(),
            1e-14,
            10_000,
            1,
        );
        assert!(res.converged);
        assert!((res.value - top).abs() < 1e-10);
    }

    #[test]
    fn operator_norm_of_rectangular_matrix() {
        let a = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 0.0, 0.0, 1.0, -1.0]);
        let svd = a.clone().svd(false, false);
        let smax = svd.singular_values.max();
        let res = operator_norm(
            3,
            |v| (&a * DVector::from_column_slice(v)).as_slice().to_vec(),
            |u| {
                (a.transpose() * DVector::from_column_slice(u))
                    .as_slice()
                    .to_vec()
            },
            1e-14,
            4,
        );
        assert!((res.value - smax).abs() < 1e-8);
    }

    #[test]
    fn subspace_iteration_matches_dense() {
        let mut r = rng::stream(9, 0);
        let b = DMatrix::from_fn(12, 12, |_, _| rng::normal(&mut r));
        let m = &b * b.transpose();
        let dense = symmetric_eigenvalues(&m);
        let top = top_eigenvalues(
            12,
            4,
            |v| (&m * DVector::from_column_slice(v)).as_slice().to_vec(),
            1e-13,
            5000,
            2,
        )
        .unwrap();
        for (a, b) in top.iter().zip(&dense) {
            assert!((a - b).abs() < 1e-8 * dense[0], "{a} vs {b}");
        }
    }

    #[test]
    fn cg_solves_spd_system() {
        let m = DMatrix::from_row_slice(2, 2, &[3.0, 1.0, 1.0, 2.0]);
        let rhs = [1.0, 1.0];
        let res = conjugate_gradient(
            |v| (&m * DVector::from_column_slice(v)).as_slice().to_vec(),
            &rhs,
            1e-14,
            10,
        );
        assert!((res.solution[0] - 0.2).abs() < 1e-12);
        assert!((res.solution[1] - 0.4).abs() < 1e-12);
    }

    #[test]
    fn loglog_fit_recovers_power_law() {
        let x = [1.0, 10.0, 100.0, 1000.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(-2.0)).collect();
        let fit = loglog_fit(&x, &y).unwrap();
        assert!((fit.slope + 2.0).abs() < 1e-12);
        assert!(fit.residual < 1e-12);
    }

    #[test]
    fn spearman_of_monotone_sequence_is_one() {
        assert!((spearman(&[1.0, 2.0, 3.0, 4.0], &[0.1, 0.5, 0.6, 9.0]) - 1.0).abs() < 1e-12);
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-12);
    }
}
