use lazyflow::diagnostics::{estimate_norms, EstimatorConfig};
use lazyflow::flow::{
    integrate_kernel_flow, integrate_linearized_flow, FlowConfig, Integrator, RecordStride,
    StepRule,
};
use lazyflow::kernels::{kernel_random, ArcCosineKernelSpec};
use lazyflow::linearize::{build_tangent, kernel_spectrum, tangent_kernel, KernelMatrix};
use lazyflow::loss::Loss;
use lazyflow::model::{Centered, InitScheme, Model, ScaleRule, TwoLayerNet};
use lazyflow::rng;
use lazyflow::{evaluate, jacobian, EvaluationSet, ParamVector};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn set(n: usize, d: usize, seed: u64) -> EvaluationSet {
    EvaluationSet::new(rng::sphere_points(&mut rng::stream(seed, 0), n, d)).unwrap()
}

#[test]
fn taylor_remainder_is_controlled_by_lip_dh() {
    let net = TwoLayerNet::softplus(12, 4, 3.0);
    let w0 = net.init(InitScheme::Xavier, 3);
    let s = set(10, 4, 4);
    let tangent = build_tangent(net.clone(), &w0, &s).unwrap();
    let norms =
        estimate_norms(&net, &w0, &s, &EstimatorConfig::default().with_radius(0.1)).unwrap();
    let mut r = rng::stream(11, 0);
    for _ in 0..20 {
        let offset = rng::ball_point(&mut r, net.param_count(), 0.1);
        let w: Vec<f64> = w0.iter().zip(&offset).map(|(a, b)| a + b).collect();
        let gap = evaluate(&net, &w, &s)
            .unwrap()
            .sub(&evaluate(&tangent, &w, &s).unwrap())
            .norm();
        let bound = 0.5 * norms.lip_dh * w0.distance(&w).powi(2);
        assert!(gap <= bound, "remainder {gap} exceeds {bound}");
    }
}

#[test]
fn tangent_kernel_matches_random_feature_kernel() {
    let (m, d, n) = (40, 3, 7);
    let feats = ArcCosineKernelSpec::standard_normal(d).sample_weights(m, 5);
    let net = TwoLayerNet::relu(m, d).with_scale(ScaleRule::InvSqrtWidth);
    let outer: Vec<Vec<f64>> = feats.outer.iter().map(|b| vec![*b]).collect();
    let w = net.params_from(&feats.inner, &outer);
    let s = set(n, d, 6);
    let k = tangent_kernel(&net, &w, &s)
        .unwrap()
        .unweighted(s.weights());
    for i in 0..n {
        for j in 0..n {
            let expected = kernel_random(&feats, &s.input(i), &s.input(j))
                .unwrap()
                .total;
            assert!(
                (k[(i, j)] - expected).abs() < 1e-10,
                "({i},{j}): {} vs {expected}",
                k[(i, j)]
            );
        }
    }
}

#[test]
fn rank_is_bounded_by_parameter_count() {
    let net = TwoLayerNet::softplus(2, 3, 1.0);
    let w = net.init(InitScheme::Xavier, 1);
    let s = set(30, 3, 2);
    let spec = kernel_spectrum(&tangent_kernel(&net, &w, &s).unwrap()).unwrap();
    assert!(spec.rank <= net.param_count());
    assert_eq!(spec.rank, net.param_count());
    assert!(spec.sigma_min.is_none());
}

#[test]
fn identity_and_rank_one_spectra() {
    let id = KernelMatrix {
        matrix: DMatrix::identity(6, 6),
        param_count: 10,
        k: 1,
    };
    let spec = kernel_spectrum(&id).unwrap();
    assert!(spec.normalized.iter().all(|v| (v - 1.0).abs() < 1e-14));
    assert_eq!(spec.rank, 6);

    let u = DMatrix::from_column_slice(5, 1, &[1.0, -2.0, 0.5, 3.0, 1.0]);
    let one = KernelMatrix {
        matrix: &u * u.transpose(),
        param_count: 10,
        k: 1,
    };
    let spec = kernel_spectrum(&one).unwrap();
    assert!((spec.normalized[0] - 1.0).abs() < 1e-14);
    assert!(spec.normalized[1..].iter().all(|v| v.abs() < 1e-14));
    assert_eq!(spec.rank, 1);
}

#[test]
fn spectrum_matches_singular_values_of_the_jacobian() {
    let net = TwoLayerNet::relu(15, 4).with_scale(ScaleRule::InvSqrtWidth);
    let w = net.init(InitScheme::Normal { std: 1.0 }, 8);
    let s = set(12, 4, 9);
    let spec = kernel_spectrum(&tangent_kernel(&net, &w, &s).unwrap()).unwrap();
    // Independent route: SVD of the orthonormal-basis Jacobian.
    let j = jacobian(&net, &w, &s).unwrap().dense_orthonormal().unwrap();
    let mut sv: Vec<f64> = j
        .svd(false, false)
        .singular_values
        .iter()
        .map(|x| x * x)
        .collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    assert_eq!(sv.len(), spec.eigenvalues.len());
    for (a, b) in spec.eigenvalues.iter().zip(&sv) {
        assert!((a - b).abs() < 1e-8 * sv[0], "{a} vs {b}");
    }
    let sigma_min = spec.sigma_min.expect("nk <= p");
    assert!((sigma_min - sv[sv.len() - 1].sqrt()).abs() < 1e-6);
}

#[test]
fn tangent_flow_reduces_to_kernel_flow() {
    let net = TwoLayerNet::softplus(10, 3, 2.0);
    let w0 = net.init(InitScheme::Xavier, 2);
    let s = set(6, 3, 3);
    let target = s
        .output_point(rng::normal_vec(&mut rng::stream(4, 0), 6, 1.0), 1)
        .unwrap();
    let loss = Loss::square(target);
    let tangent = build_tangent(net.clone(), &w0, &s).unwrap();
    let (dt, steps) = (0.01, 300);
    let cfg = FlowConfig::new(1.0)
        .with_time(dt * steps as f64)
        .with_step(StepRule::Fixed(dt))
        .with_record(RecordStride::Every(50));
    let traj = integrate_linearized_flow(&tangent, &loss, &s, &cfg).unwrap();
    let sigma = tangent_kernel(&net, &w0, &s).unwrap().matrix;
    let y0 = evaluate(&net, &w0, &s).unwrap();
    let kflow = integrate_kernel_flow(
        |_, v| {
            (&sigma * nalgebra::DVector::from_column_slice(v))
                .as_slice()
                .to_vec()
        },
        &loss,
        &y0,
        dt,
        steps,
        50,
    )
    .unwrap();
    assert_eq!(kflow.t.len(), traj.samples.len());
    for (y, sample) in kflow.y.iter().zip(&traj.samples) {
        let err = y.sub(&sample.y).norm();
        assert!(err < 1e-10 * y0.norm().max(1.0), "{err}");
    }
}

#[test]
fn renormalized_linear_path_does_not_depend_on_alpha() {
    let net = TwoLayerNet::softplus(8, 3, 2.0);
    let w0 = net.init(InitScheme::Xavier, 5);
    let model = Centered::new(net, w0.clone());
    let s = set(5, 3, 6);
    let target = s
        .output_point(rng::normal_vec(&mut rng::stream(7, 0), 5, 1.0), 1)
        .unwrap();
    let loss = Loss::square(target);
    let tangent = build_tangent(model, &w0, &s).unwrap();
    let paths: Vec<Vec<f64>> = [1.0, 10.0, 100.0]
        .iter()
        .map(|&alpha| {
            let cfg = FlowConfig::new(alpha)
                .with_time(2.0)
                .with_step(StepRule::Fixed(0.01))
                .with_integrator(Integrator::Rk4);
            let traj = integrate_linearized_flow(&tangent, &loss, &s, &cfg).unwrap();
            traj.last()
                .w
                .iter()
                .zip(w0.iter())
                .map(|(w, a)| a + alpha * (w - a))
                .collect()
        })
        .collect();
    let scale = w0.norm();
    for p in &paths[1..] {
        assert!(lazyflow::linalg::dist(p, &paths[0]) < 1e-9 * scale);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn tangent_is_affine_and_exact_at_anchor(seed in 0u64..1000) {
        let net = TwoLayerNet::softplus(6, 3, 2.0);
        let w0 = net.init(InitScheme::Xavier, seed);
        let s = set(8, 3, seed);
        let t = build_tangent(net.clone(), &w0, &s).unwrap();
        prop_assert_eq!(t.forward(&w0, &s), net.forward(&w0, &s));
        let mut r = rng::stream(seed, 3);
        let w1 = ParamVector::from(rng::normal_vec(&mut r, net.param_count(), 1.0));
        let w2 = ParamVector::from(rng::normal_vec(&mut r, net.param_count(), 1.0));
        let shifted: Vec<f64> = (0..w0.len()).map(|i| w1[i] + w2[i] - w0[i]).collect();
        let lhs = lazyflow::linalg::sub(&t.forward(&shifted, &s), &t.forward(&w1, &s));
        let rhs = net.pushforward(&w0, &s, &lazyflow::linalg::sub(&w2, &w0));
        let scale = lazyflow::linalg::norm(&rhs).max(1.0);
        prop_assert!(lazyflow::linalg::dist(&lhs, &rhs) < 1e-12 * scale);
    }

    #[test]
    fn tangent_kernels_are_psd(seed in 0u64..1000, m in 1usize..10, n in 1usize..15) {
        let net = TwoLayerNet::relu(m, 3).with_scale(ScaleRule::InvSqrtWidth);
        let w = net.init(InitScheme::Normal { std: 1.0 }, seed);
        let k = tangent_kernel(&net, &w, &set(n, 3, seed)).unwrap();
        prop_assert!((&k.matrix - k.matrix.transpose()).amax() <= 1e-14 * k.trace().max(1.0));
        let spec = kernel_spectrum(&k).unwrap();
        prop_assert!(spec.eigenvalues.iter().all(|v| *v >= -1e-10 * k.trace()));
        prop_assert!(spec.rank <= (n).min(net.param_count()));
    }
}
