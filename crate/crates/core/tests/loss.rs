use lazyflow::loss::{scaled_objective, Loss};
use lazyflow::model::{Activation, Centered, InitScheme, ScaleRule, TwoLayerNet};
use lazyflow::rng;
use lazyflow::{jacobian, EvaluationSet, OutputPoint};
use proptest::prelude::*;

fn set(n: usize, d: usize, seed: u64) -> EvaluationSet {
    EvaluationSet::new(rng::sphere_points(&mut rng::stream(seed, 0), n, d)).unwrap()
}

fn point(set: &EvaluationSet, k: usize, seed: u64) -> OutputPoint {
    let v = rng::normal_vec(&mut rng::stream(seed, 1), set.len() * k, 1.0);
    set.output_point(v, k).unwrap()
}

#[test]
fn value_matches_loop_oracle() {
    let s = set(13, 2, 1)
        .with_weights((1..=13).map(|i| i as f64 / 10.0).collect())
        .unwrap();
    let target = point(&s, 2, 2);
    let y = point(&s, 2, 3);
    let loss = Loss::square(target.clone());
    let mut oracle = 0.0;
    for i in 0..13 {
        let w = (i + 1) as f64 / 10.0;
        for c in 0..2 {
            oracle += 0.5 * w * (y.get(i, c) - target.get(i, c)).powi(2);
        }
    }
    assert!((loss.value(&y).unwrap() - oracle).abs() < 1e-12);
}

#[test]
fn dimension_mismatch_is_reported() {
    let s = set(4, 2, 1);
    let loss = Loss::square(point(&s, 1, 1));
    let other = point(&set(5, 2, 1), 1, 1);
    assert!(loss.value(&other).is_err());
}

#[test]
fn objective_at_unit_scale_is_the_loss() {
    let net = TwoLayerNet::softplus(5, 3, 2.0);
    let w = net.init(InitScheme::Xavier, 4);
    let s = set(8, 3, 5);
    let loss = Loss::square(point(&s, 1, 6));
    let eval = scaled_objective(&net, &loss, &s, 1.0, &w).unwrap();
    let y = lazyflow::evaluate(&net, &w, &s).unwrap();
    assert!((eval.value - loss.value(&y).unwrap()).abs() < 1e-15);
    assert!(scaled_objective(&net, &loss, &s, 0.0, &w).is_err());
    assert!(scaled_objective(&net, &loss, &s, -2.0, &w).is_err());
}

#[test]
fn objective_gradient_matches_finite_differences() {
    let net = TwoLayerNet::new(
        8,
        4,
        2,
        Activation::Softplus { beta: 4.0 },
        ScaleRule::InvSqrtWidth,
    );
    let w = net.init(InitScheme::Normal { std: 0.8 }, 7);
    let s = set(6, 4, 8);
    let loss = Loss::square(point(&s, 2, 9));
    for alpha in [0.5, 1.0, 7.0] {
        let g = scaled_objective(&net, &loss, &s, alpha, &w)
            .unwrap()
            .gradient;
        let f = |w: &[f64]| scaled_objective(&net, &loss, &s, alpha, w).unwrap().value;
        let mut fd = vec![0.0; w.len()];
        let mut wp = w.to_vec();
        let h = 1e-6;
        for i in 0..w.len() {
            wp[i] = w[i] + h;
            let up = f(&wp);
            wp[i] = w[i] - h;
            let down = f(&wp);
            wp[i] = w[i];
            fd[i] = (up - down) / (2.0 * h);
        }
        let err = lazyflow::linalg::dist(&g, &fd) / lazyflow::linalg::norm(&g);
        assert!(err < 1e-6, "alpha={alpha}: {err}");
    }
}

#[test]
fn objective_at_centered_init_scales_as_inverse_alpha_squared() {
    let net = TwoLayerNet::softplus(5, 3, 2.0);
    let w0 = net.init(InitScheme::Xavier, 4);
    let model = Centered::new(net, w0.clone());
    let s = set(8, 3, 5);
    let target = point(&s, 1, 6);
    let loss = Loss::square(target.clone());
    for alpha in [1.0, 10.0, 100.0] {
        let v = scaled_objective(&model, &loss, &s, alpha, &w0)
            .unwrap()
            .value;
        let expected = target.norm().powi(2) / (2.0 * alpha * alpha);
        assert!((v - expected).abs() <= 1e-14 * expected);
    }
}

#[test]
fn stationary_points_do_not_depend_on_alpha() {
    // grad F_alpha = (1/alpha) Dh^T grad R(alpha h): zero exactly when the
    // unscaled pullback of the loss gradient is zero.
    let net = TwoLayerNet::softplus(3, 2, 1.0);
    let w = net.init(InitScheme::Xavier, 1);
    let s = set(5, 2, 2);
    let alpha = 4.0;
    let h = lazyflow::evaluate(&net, &w, &s).unwrap();
    let loss = Loss::square(h.scaled(alpha));
    let g = scaled_objective(&net, &loss, &s, alpha, &w)
        .unwrap()
        .gradient;
    assert!(g.iter().all(|v| *v == 0.0));
    let shifted = Loss::square(h.scaled(alpha).add(&point(&s, 1, 3)));
    let g = scaled_objective(&net, &shifted, &s, alpha, &w)
        .unwrap()
        .gradient;
    let grad_r = shifted.gradient(&h.scaled(alpha)).unwrap();
    let pulled = jacobian(&net, &w, &s).unwrap().adjoint(&grad_r).unwrap();
    for (a, b) in g.iter().zip(&pulled) {
        assert!((a - b / alpha).abs() < 1e-14);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn convexity_and_smoothness_certificates(seed in 0u64..10_000, quadratic in any::<bool>()) {
        let s = set(9, 2, seed);
        let target = point(&s, 2, seed + 1);
        let loss = if quadratic {
            let coeffs: Vec<f64> = rng::normal_vec(&mut rng::stream(seed, 2), 18, 1.0)
                .into_iter()
                .map(|v| 0.2 + v.abs())
                .collect();
            Loss::diagonal_quadratic(target, coeffs).unwrap()
        } else {
            Loss::square(target)
        };
        let (m, big_m) = (loss.strong_convexity(), loss.smoothness());
        prop_assert!(m > 0.0 && big_m >= m);
        let y1 = point(&s, 2, seed + 3);
        let y2 = point(&s, 2, seed + 4);
        let (r1, r2) = (loss.value(&y1).unwrap(), loss.value(&y2).unwrap());
        let (g1, g2) = (loss.gradient(&y1).unwrap(), loss.gradient(&y2).unwrap());
        let d = y2.sub(&y1);
        let lower = r1 + g1.inner(&d) + 0.5 * m * d.norm().powi(2);
        prop_assert!(r2 >= lower - 1e-12 * r2.abs().max(1.0));
        prop_assert!(g1.sub(&g2).norm() <= big_m * d.norm() * (1.0 + 1e-12));
    }
}
