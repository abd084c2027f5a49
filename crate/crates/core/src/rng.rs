//! Seeded random streams and sampling helpers.
//!
//! Every random draw in the crate goes through [`stream`], which derives an
//! independent ChaCha stream from a master seed and a stream label, so that
//! sweep jobs can be run in any order and still reproduce bit for bit.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type SeededRng = ChaCha8Rng;

/// Independent stream `label` of the generator seeded with `seed`.
pub fn stream(seed: u64, label: u64) -> SeededRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(label);
    rng
}

/// Stream labels used across the crate.
pub mod labels {
    pub const TEACHER: u64 = 1;
    pub const TRAIN_INPUTS: u64 = 2;
    pub const TEST_INPUTS: u64 = 3;
    pub const STUDENT_INIT: u64 = 4;
    pub const ESTIMATOR: u64 = 5;
    pub const SGD_BATCHES: u64 = 6;
    pub const HOLDOUT: u64 = 7;
    pub const KERNEL_FEATURES: u64 = 8;
    pub const LEAST_SQUARES: u64 = 9;
}

/// Mixes a run index into a master seed (splitmix64 finalizer).
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn normal(rng: &mut impl Rng) -> f64 {
    rng.sample(StandardNormal)
}

pub fn normal_vec(rng: &mut impl Rng, len: usize, std: f64) -> Vec<f64> {
    (0..len).map(|_| std * normal(rng)).collect()
}

/// Uniform direction on the unit sphere of dimension `dim`.
pub fn unit_vector(rng: &mut impl Rng, dim: usize) -> Vec<f64> {
    loop {
        let v = normal_vec(rng, dim, 1.0);
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-300 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// `n` points drawn uniformly on the unit sphere S^{d-1}, one per row.
pub fn sphere_points(rng: &mut impl Rng, n: usize, d: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(n, d);
    for i in 0..n {
        let u = unit_vector(rng, d);
        for (j, v) in u.into_iter().enumerate() {
            out[(i, j)] = v;
        }
    }
    out
}

/// Uniform point in the Euclidean ball of the given radius.
pub fn ball_point(rng: &mut impl Rng, dim: usize, radius: f64) -> Vec<f64> {
    let u = unit_vector(rng, dim);
    let r: f64 = rng.random::<f64>().powf(1.0 / dim as f64) * radius;
    u.into_iter().map(|x| x * r).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<f64> = normal_vec(&mut stream(7, 1), 5, 1.0);
        let b: Vec<f64> = normal_vec(&mut stream(7, 1), 5, 1.0);
        let c: Vec<f64> = normal_vec(&mut stream(7, 2), 5, 1.0);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn sphere_points_have_unit_norm() {
        let x = sphere_points(&mut stream(3, 0), 200, 7);
        for row in x.row_iter() {
            assert!((row.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sphere_projection_mean_is_small() {
        let x = sphere_points(&mut stream(11, 0), 10_000, 5);
        let dir = unit_vector(&mut stream(12, 0), 5);
        let mean: f64 = x
            .row_iter()
            .map(|r| r.iter().zip(&dir).map(|(a, b)| a * b).sum::<f64>())
            .sum::<f64>()
            / 10_000.0;
        assert!(mean.abs() < 0.05, "mean projection {mean}");
    }

    #[test]
    fn ball_points_stay_inside() {
        let mut rng = stream(5, 0);
        for _ in 0..100 {
            let p = ball_point(&mut rng, 4, 0.3);
            assert!(p.iter().map(|x| x * x).sum::<f64>().sqrt() <= 0.3 + 1e-15);
        }
    }
}
