//! Tangent kernels of two-layer ReLU networks with random weights and their
//! arc-cosine limits as the width grows.
//!
//! With `f(x) = m^{-1/2} sum_j b_j relu(a_j . x)` the tangent kernel splits
//! into the outer-weight part `K^(b)` and the inner-weight part `K^(a)`.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::rng;

/// Moments of the weight distribution that enter the limit kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArcCosineKernelSpec {
    /// `E(b^2)`.
    pub second_moment_outer: f64,
    /// `E(||a||^2)`.
    pub expected_inner_sq_norm: f64,
    pub input_dim: usize,
}

impl ArcCosineKernelSpec {
    /// Every weight standard normal: `E(b^2) = 1`, `E(||a||^2) = d`.
    pub fn standard_normal(d: usize) -> Self {
        ArcCosineKernelSpec {
            second_moment_outer: 1.0,
            expected_inner_sq_norm: d as f64,
            input_dim: d,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.second_moment_outer > 0.0)
            || !(self.expected_inner_sq_norm > 0.0)
            || self.input_dim == 0
        {
            return Err(Error::invalid("kernel moments must be positive and d >= 1"));
        }
        Ok(())
    }

    /// Random weights with these moments: `a_j ~ N(0, E||a||^2/d I)` and
    /// `b_j ~ N(0, E b^2)`.
    pub fn sample_weights(&self, m: usize, seed: u64) -> RandomFeatures {
        let mut r = rng::stream(seed, rng::labels::KERNEL_FEATURES);
        let d = self.input_dim;
        let a_std = (self.expected_inner_sq_norm / d as f64).sqrt();
        let b_std = self.second_moment_outer.sqrt();
        let mut inner = Vec::with_capacity(m);
        let mut outer = Vec::with_capacity(m);
        for _ in 0..m {
            inner.push(rng::normal_vec(&mut r, d, a_std));
            outer.push(b_std * rng::normal(&mut r));
        }
        RandomFeatures { inner, outer }
    }
}

/// The two kernel components and their sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelValue {
    pub k_a: f64,
    pub k_b: f64,
    pub total: f64,
}

/// Angle between two nonzero vectors, by clamped arccos.
pub fn angle(x: &[f64], y: &[f64]) -> Result<f64> {
    let (nx, ny) = (linalg::norm(x), linalg::norm(y));
    if nx == 0.0 || ny == 0.0 {
        return Err(Error::invalid("kernel arguments must be nonzero vectors"));
    }
    Ok((linalg::dot(x, y) / (nx * ny)).clamp(-1.0, 1.0).acos())
}

/// Closed-form infinite-width kernels.
pub fn kernel_limit(spec: &ArcCosineKernelSpec, x: &[f64], y: &[f64]) -> Result<KernelValue> {
    spec.validate()?;
    let phi = angle(x, y)?;
    let pi = std::f64::consts::PI;
    let k_a = linalg::dot(x, y) * spec.second_moment_outer * (pi - phi) / (2.0 * pi);
    let k_b = linalg::norm(x)
        * linalg::norm(y)
        * spec.expected_inner_sq_norm
        * ((pi - phi) * phi.cos() + phi.sin())
        / (2.0 * pi * spec.input_dim as f64);
    Ok(KernelValue {
        k_a,
        k_b,
        total: k_a + k_b,
    })
}

/// A finite set of hidden units `(a_j, b_j)`.
#[derive(Debug, Clone)]
pub struct RandomFeatures {
    pub inner: Vec<Vec<f64>>,
    pub outer: Vec<f64>,
}

impl RandomFeatures {
    pub fn width(&self) -> usize {
        self.outer.len()
    }
}

fn relu(z: f64) -> f64 {
    z.max(0.0)
}

fn relu_prime(z: f64) -> f64 {
    if z > 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Finite-width kernels `K_m^(a)` and `K_m^(b)`.
pub fn kernel_random(features: &RandomFeatures, x: &[f64], y: &[f64]) -> Result<KernelValue> {
    let m = features.width();
    if m == 0 {
        return Err(Error::invalid("need at least one feature"));
    }
    let xy = linalg::dot(x, y);
    let (mut k_a, mut k_b) = (0.0, 0.0);
    for (a, b) in features.inner.iter().zip(&features.outer) {
        let (zx, zy) = (linalg::dot(a, x), linalg::dot(a, y));
        k_a += xy * b * b * relu_prime(zx) * relu_prime(zy);
        k_b += relu(zx) * relu(zy);
    }
    let (k_a, k_b) = (k_a / m as f64, k_b / m as f64);
    Ok(KernelValue {
        k_a,
        k_b,
        total: k_a + k_b,
    })
}

/// Unit `x = e_1` and `x'(phi) = cos(phi) e_1 + sin(phi) e_2` in `R^d`.
pub fn section_points(d: usize, phi: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(d >= 2, "a sphere section needs d >= 2");
    let mut x = vec![0.0; d];
    x[0] = 1.0;
    let mut y = vec![0.0; d];
    y[0] = phi.cos();
    y[1] = phi.sin();
    (x, y)
}

/// `n` equally spaced angles from 0 to pi inclusive.
pub fn phi_grid(n: usize) -> Vec<f64> {
    let pi = std::f64::consts::PI;
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n).map(|i| pi * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Limit kernel and width-`m` realizations along a great-circle section.
#[derive(Debug, Clone)]
pub struct KernelSection {
    pub phi: Vec<f64>,
    pub limit: Vec<KernelValue>,
    /// `realizations[s][i]`: total `K_m` of seed `s` at `phi[i]`.
    pub realizations: Vec<Vec<f64>>,
    pub seeds: Vec<u64>,
}

pub fn kernel_section(
    spec: &ArcCosineKernelSpec,
    phi: &[f64],
    m: usize,
    seeds: &[u64],
) -> Result<KernelSection> {
    spec.validate()?;
    if phi
        .iter()
        .any(|p| !(0.0..=std::f64::consts::PI).contains(p))
    {
        return Err(Error::invalid("section angles must lie in [0, pi]"));
    }
    let d = spec.input_dim;
    let limit = phi
        .iter()
        .map(|&p| {
            let (x, y) = section_points(d, p);
            kernel_limit(spec, &x, &y)
        })
        .collect::<Result<Vec<_>>>()?;
    let realizations = seeds
        .iter()
        .map(|&s| {
            let features = spec.sample_weights(m, s);
            phi.iter()
                .map(|&p| {
                    let (x, y) = section_points(d, p);
                    kernel_random(&features, &x, &y).map(|k| k.total)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(KernelSection {
        phi: phi.to_vec(),
        limit,
        realizations,
        seeds: seeds.to_vec(),
    })
}

impl KernelSection {
    /// `phi, K_limit, K_a, K_b, seed_<s>...`
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        let mut header = vec![
            "phi".to_string(),
            "K_limit".into(),
            "K_a".into(),
            "K_b".into(),
        ];
        header.extend(self.seeds.iter().map(|s| format!("seed_{s}")));
        wtr.write_record(&header)?;
        for (i, p) in self.phi.iter().enumerate() {
            let mut row = vec![
                p.to_string(),
                self.limit[i].total.to_string(),
                self.limit[i].k_a.to_string(),
                self.limit[i].k_b.to_string(),
            ];
            row.extend(self.realizations.iter().map(|r| r[i].to_string()));
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn write_csv_file(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    /// `sup_phi |K_m - K|` for every seed.
    pub fn sup_errors(&self) -> Vec<f64> {
        self.realizations
            .iter()
            .map(|r| {
                r.iter()
                    .zip(&self.limit)
                    .map(|(a, l)| (a - l.total).abs())
                    .fold(0.0, f64::max)
            })
            .collect()
    }
}

/// Seed-averaged sup-over-section error of `K_m` at each width.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceStudy {
    pub widths: Vec<usize>,
    pub mean_sup_error: Vec<f64>,
    pub fit: linalg::LineFit,
}

pub fn convergence_study(
    spec: &ArcCosineKernelSpec,
    widths: &[usize],
    grid_points: usize,
    seeds: usize,
    master_seed: u64,
) -> Result<ConvergenceStudy> {
    let phi = phi_grid(grid_points);
    let mut mean_sup_error = Vec::with_capacity(widths.len());
    for &m in widths {
        let seed_list: Vec<u64> = (0..seeds as u64)
            .map(|s| rng::derive_seed(master_seed, (m as u64) << 20 | s))
            .collect();
        let section = kernel_section(spec, &phi, m, &seed_list)?;
        let errs = section.sup_errors();
        mean_sup_error.push(errs.iter().sum::<f64>() / errs.len() as f64);
    }
    let x: Vec<f64> = widths.iter().map(|&m| m as f64).collect();
    let fit = linalg::loglog_fit(&x, &mean_sup_error)?;
    Ok(ConvergenceStudy {
        widths: widths.to_vec(),
        mean_sup_error,
        fit,
    })
}
