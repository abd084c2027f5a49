use lazyflow::error::{Axis, Error};
use lazyflow::model::{
    rescale_init, Activation, Centered, InitScheme, LinearModel, Model, NeuronModel, ScaleRule,
    Scaled, Symmetrized, TwoLayerNet,
};
use lazyflow::rng;
use lazyflow::{evaluate, jacobian, EvaluationSet, ParamVector};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn sphere_set(n: usize, d: usize, seed: u64) -> EvaluationSet {
    EvaluationSet::new(rng::sphere_points(&mut rng::stream(seed, 0), n, d)).unwrap()
}

/// Central differences of `forward`, column by column.
fn fd_jacobian<M: Model>(model: &M, w: &[f64], set: &EvaluationSet, step: f64) -> DMatrix<f64> {
    let rows = set.len() * model.output_dim();
    let mut out = DMatrix::zeros(rows, w.len());
    let mut wp = w.to_vec();
    for c in 0..w.len() {
        wp[c] = w[c] + step;
        let plus = model.forward(&wp, set);
        wp[c] = w[c] - step;
        let minus = model.forward(&wp, set);
        wp[c] = w[c];
        for r in 0..rows {
            out[(r, c)] = (plus[r] - minus[r]) / (2.0 * step);
        }
    }
    out
}

#[test]
fn single_unit_by_hand() {
    let net = TwoLayerNet::relu(1, 2);
    let set = EvaluationSet::from_rows(&[vec![0.6, 0.8]]).unwrap();
    let y = evaluate(&net, &[1.0, 0.0, 2.0], &set).unwrap();
    assert!((y.get(0, 0) - 1.2).abs() < 1e-15);
}

#[test]
fn dimension_errors_name_the_axis() {
    let net = TwoLayerNet::relu(3, 2);
    let set = sphere_set(4, 2, 1);
    match evaluate(&net, &[0.0; 5], &set) {
        Err(Error::DimensionMismatch {
            axis,
            expected,
            found,
        }) => {
            assert_eq!(axis, Axis::Parameters);
            assert_eq!((expected, found), (9, 5));
        }
        other => panic!("unexpected {other:?}"),
    }
    let wrong_d = sphere_set(4, 3, 1);
    match evaluate(&net, &[0.0; 9], &wrong_d) {
        Err(Error::DimensionMismatch { axis, .. }) => assert_eq!(axis, Axis::InputDim),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn linear_model_jacobian_is_its_matrix() {
    let m = LinearModel::new(3, 2);
    let set = sphere_set(5, 3, 2);
    let w1 = rng::normal_vec(&mut rng::stream(3, 0), 6, 1.0);
    let w2 = rng::normal_vec(&mut rng::stream(4, 0), 6, 1.0);
    let j1 = jacobian(&m, &w1, &set).unwrap().dense().unwrap();
    let j2 = jacobian(&m, &w2, &set).unwrap().dense().unwrap();
    assert_eq!(j1, j2);
    // Row (i, c) of the Jacobian holds x_i in the block of output c.
    for i in 0..5 {
        for c in 0..2 {
            for l in 0..3 {
                assert_eq!(j1[(i * 2 + c, c * 3 + l)], set.inputs()[(i, l)]);
            }
        }
    }
}

#[test]
fn softplus_jacobian_matches_central_differences() {
    let net = TwoLayerNet::softplus(7, 4, 5.0).with_scale(ScaleRule::InvSqrtWidth);
    let w = net.init(InitScheme::Normal { std: 0.7 }, 9);
    let set = sphere_set(6, 4, 5);
    let analytic = jacobian(&net, &w, &set).unwrap().dense().unwrap();
    let fd = fd_jacobian(&net, &w, &set, 1e-5);
    let rel = (&analytic - &fd).norm() / analytic.norm();
    assert!(rel < 1e-6, "relative error {rel}");
}

#[test]
fn relu_euler_identity() {
    let net = TwoLayerNet::relu(30, 5);
    let w = net.init(InitScheme::Normal { std: 1.0 }, 1);
    let set = sphere_set(20, 5, 2);
    let dh_w = jacobian(&net, &w, &set).unwrap().apply(&w).unwrap();
    let h = evaluate(&net, &w, &set).unwrap();
    let rel = dh_w.sub(&h.scaled(2.0)).norm() / h.norm();
    assert!(rel < 1e-10, "{rel}");
}

#[test]
fn rescale_init_contract() {
    let net = TwoLayerNet::relu(10, 3);
    let w0 = net.init(InitScheme::Xavier, 3);
    let set = sphere_set(8, 3, 4);
    assert_eq!(rescale_init(&net, &w0, 1.0).unwrap(), w0);
    let w2 = rescale_init(&net, &w0, 2.0).unwrap();
    let (h1, h2) = (
        evaluate(&net, &w0, &set).unwrap(),
        evaluate(&net, &w2, &set).unwrap(),
    );
    assert!((h2.norm() - 4.0 * h1.norm()).abs() < 1e-10 * h2.norm());
    assert!(rescale_init(&net, &w0, 0.0).is_err());
    assert!(rescale_init(&net, &w0, -1.0).is_err());
    let smooth = TwoLayerNet::softplus(10, 3, 2.0);
    assert!(rescale_init(&smooth, &w0, 2.0).is_err());
}

#[test]
fn stochastic_inputs_lie_on_the_sphere() {
    let x = rng::sphere_points(&mut rng::stream(7, 1), 10_000, 6);
    for i in 0..x.nrows() {
        assert!((x.row(i).norm() - 1.0).abs() < 1e-12);
    }
    let dir = [0.3, -0.1, 0.5, 0.2, -0.7, 0.1];
    let mean: f64 = (0..x.nrows())
        .map(|i| (0..6).map(|l| x[(i, l)] * dir[l]).sum::<f64>())
        .sum::<f64>()
        / x.nrows() as f64;
    assert!(mean.abs() < 0.05);
}

#[test]
fn unit_weights_are_configurable() {
    let set = sphere_set(4, 2, 1).with_unit_weights();
    let y = set.output_point(vec![1.0, 2.0, 2.0, 0.0], 1).unwrap();
    assert!((y.norm() - 3.0).abs() < 1e-15);
    let default = sphere_set(4, 2, 1);
    let y = default.output_point(vec![1.0, 2.0, 2.0, 0.0], 1).unwrap();
    assert!((y.norm() - 1.5).abs() < 1e-15);
}

fn scale_rule() -> impl Strategy<Value = ScaleRule> {
    prop_oneof![
        Just(ScaleRule::One),
        Just(ScaleRule::InvSqrtWidth),
        Just(ScaleRule::InvWidth),
        (0.1f64..3.0).prop_map(ScaleRule::Constant),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn relu_nets_are_two_homogeneous(
        m in 1usize..12, d in 1usize..6, seed in 0u64..1000, lambda in 0.05f64..20.0, rule in scale_rule()
    ) {
        let net = TwoLayerNet::new(m, d, 1, Activation::Relu, rule);
        let w = net.init(InitScheme::Normal { std: 1.0 }, seed);
        let set = sphere_set(7, d, seed + 1);
        let wl = w.scaled(lambda);
        let h = evaluate(&net, &w, &set).unwrap();
        let hl = evaluate(&net, &wl, &set).unwrap();
        let scale = h.sup_norm().max(1e-300);
        for (a, b) in hl.values().iter().zip(h.values()) {
            prop_assert!((a - lambda * lambda * b).abs() <= 1e-13 * lambda * lambda * scale);
        }
        let j = jacobian(&net, &w, &set).unwrap().dense().unwrap();
        let jl = jacobian(&net, &wl, &set).unwrap().dense().unwrap();
        let err = (&jl - &j * lambda).amax();
        prop_assert!(err <= 1e-13 * lambda * j.amax().max(1e-300));
    }

    #[test]
    fn centering_is_exact(seed in 0u64..1000, shift in -1.0f64..1.0) {
        let net = TwoLayerNet::softplus(6, 3, 3.0);
        let w0 = net.init(InitScheme::Xavier, seed);
        let centered = Centered::new(net.clone(), w0.clone());
        let set = sphere_set(9, 3, seed);
        let w: Vec<f64> = w0.iter().map(|v| v + shift).collect();
        let got = centered.forward(&w, &set);
        let (hw, h0) = (net.forward(&w, &set), net.forward(&w0, &set));
        for i in 0..got.len() {
            prop_assert_eq!(got[i], hw[i] - h0[i]);
        }
        prop_assert!(centered.forward(&w0, &set).iter().all(|v| *v == 0.0));
        prop_assert_eq!(centered.dense_jacobian(&w, &set), net.dense_jacobian(&w, &set));
    }

    #[test]
    fn symmetrized_output_vanishes_at_init(m in 1usize..20, d in 1usize..8, k in 1usize..3, seed in 0u64..1000, std in 0.01f64..5.0) {
        let net = TwoLayerNet::new(m, d, k, Activation::Relu, ScaleRule::InvSqrtWidth);
        let sym = Symmetrized::new(net.clone());
        let w0 = sym.init(&net.init(InitScheme::Normal { std }, seed));
        let set = sphere_set(11, d, seed);
        prop_assert!(sym.forward(&w0, &set).iter().all(|v| *v == 0.0));
        // Units come in pairs with equal positions and opposite output signs.
        let units = sym.neurons(&w0);
        for j in 0..m {
            prop_assert_eq!(&units[j].inner, &units[j + m].inner);
            prop_assert_eq!(units[j].sign, -units[j + m].sign);
        }
    }

    #[test]
    fn scaled_wrapper_scales_outputs_and_jacobian(alpha in 0.01f64..100.0, seed in 0u64..100) {
        let net = TwoLayerNet::softplus(4, 2, 1.0);
        let w = net.init(InitScheme::Xavier, seed);
        let set = sphere_set(5, 2, seed);
        let s = Scaled::new(net.clone(), alpha);
        let (a, b) = (s.forward(&w, &set), net.forward(&w, &set));
        for i in 0..a.len() {
            prop_assert_eq!(a[i], alpha * b[i]);
        }
        let err = (s.dense_jacobian(&w, &set) - net.dense_jacobian(&w, &set) * alpha).amax();
        prop_assert!(err == 0.0);
    }

    #[test]
    fn pushforward_and_pullback_are_adjoint(seed in 0u64..500, k in 1usize..3) {
        let net = TwoLayerNet::new(5, 3, k, Activation::Softplus { beta: 2.0 }, ScaleRule::InvWidth);
        let w = net.init(InitScheme::Normal { std: 1.0 }, seed);
        let set = sphere_set(6, 3, seed);
        let mut r = rng::stream(seed, 99);
        let v = rng::normal_vec(&mut r, net.param_count(), 1.0);
        let c = rng::normal_vec(&mut r, 6 * k, 1.0);
        let lhs: f64 = net.pushforward(&w, &set, &v).iter().zip(&c).map(|(a, b)| a * b).sum();
        let rhs: f64 = net.pullback(&w, &set, &c).iter().zip(&v).map(|(a, b)| a * b).sum();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
    }
}

#[test]
fn parameter_vectors_reject_non_finite_entries() {
    assert!(ParamVector::new(vec![1.0, f64::NAN]).is_err());
    assert!(ParamVector::new(vec![1.0, 2.0]).is_ok());
}
