//! Finite-horizon comparison with the linearized flow: the measured output
//! gap at T = K / Lip(h)^2 against its a priori bound, for several alpha.
//!
//! cargo run --release --example quantitative_bound

use lazyflow::diagnostics::{
    check_theorem2_bound, estimate_norms, theorem2_horizon, EstimatorConfig,
};
use lazyflow::flow::{
    integrate_flow, integrate_linearized_flow, FlowConfig, RecordStride, StepRule,
};
use lazyflow::linearize::build_tangent;
use lazyflow::loss::Loss;
use lazyflow::model::{Centered, InitScheme, ScaleRule, TwoLayerNet};
use lazyflow::{rng, EvaluationSet};

fn main() -> lazyflow::Result<()> {
    let net = TwoLayerNet::softplus(16, 4, 4.0).with_scale(ScaleRule::InvSqrtWidth);
    let w0 = net.init(InitScheme::Normal { std: 1.0 }, 11);
    let model = Centered::new(net, w0.clone());
    let train = EvaluationSet::new(rng::sphere_points(&mut rng::stream(12, 0), 8, 4))?;
    let loss =
        Loss::square(train.output_point(rng::normal_vec(&mut rng::stream(13, 0), 8, 1.0), 1)?);

    let norms = estimate_norms(&model, &w0, &train, &EstimatorConfig::default())?;
    let (iterations, safety) = (10.0, 2.0);
    let horizon = theorem2_horizon(&norms, iterations, safety);
    println!(
        "Lip(h) {:.4}, Lip(Dh) {:.4}, horizon {horizon:.3}",
        norms.lip_h, norms.lip_dh
    );
    let tangent = build_tangent(model.clone(), &w0, &train)?;
    println!(
        "{:>8} {:>12} {:>12} {:>12}  status",
        "alpha", "measured", "bound", "threshold"
    );
    for alpha in [0.1, 1.0, 10.0, 100.0, 1000.0] {
        let cfg = FlowConfig::new(alpha)
            .with_time(horizon)
            .with_step(StepRule::Fixed(horizon / 400.0))
            .with_record(RecordStride::Dense);
        let a = integrate_flow(&model, &loss, &train, &w0, &cfg)?;
        let b = integrate_linearized_flow(&tangent, &loss, &train, &cfg)?;
        let c = check_theorem2_bound(&a, &b, &norms, &loss, alpha, iterations, safety)?;
        println!(
            "{alpha:>8} {:>12.4e} {:>12.4e} {:>12.4e}  {:?}",
            c.measured_lhs, c.bound_rhs, c.alpha_threshold, c.status
        );
    }
    Ok(())
}
