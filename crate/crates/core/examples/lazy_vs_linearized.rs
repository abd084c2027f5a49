//! Gradient flow of a centered network against the flow of its
//! linearization, for growing alpha. The parameter paths separate like
//! 1/alpha^2, the outputs like 1/alpha.
//!
//! cargo run --release --example lazy_vs_linearized

use lazyflow::diagnostics::{compare_flows, deviation_slopes};
use lazyflow::flow::{
    integrate_flow, integrate_linearized_flow, FlowConfig, RecordStride, StepRule,
};
use lazyflow::linearize::build_tangent;
use lazyflow::loss::Loss;
use lazyflow::model::{Centered, InitScheme, ScaleRule, TwoLayerNet};
use lazyflow::{evaluate, rng, EvaluationSet};

fn main() -> lazyflow::Result<()> {
    let (d, m, n) = (10, 32, 20);
    let teacher = TwoLayerNet::softplus(3, d, 4.0);
    let wt = teacher.init(InitScheme::Normal { std: 1.0 }, 1);
    let train = EvaluationSet::new(rng::sphere_points(&mut rng::stream(2, 0), n, d))?;
    let loss = Loss::square(evaluate(&teacher, &wt, &train)?);

    let net = TwoLayerNet::softplus(m, d, 4.0).with_scale(ScaleRule::InvSqrtWidth);
    let w0 = net.init(InitScheme::Normal { std: 1.0 }, 3);
    let model = Centered::new(net, w0.clone());
    let tangent = build_tangent(model.clone(), &w0, &train)?;

    println!(
        "{:>8} {:>14} {:>14} {:>14}",
        "alpha", "|w - w0|", "|w - w_lin|", "|y - y_lin|"
    );
    let mut reports = Vec::new();
    for alpha in [1.0, 10.0, 100.0, 1000.0] {
        let cfg = FlowConfig::new(alpha)
            .with_time(2.0)
            .with_step(StepRule::Fixed(0.005))
            .with_record(RecordStride::Dense);
        let a = integrate_flow(&model, &loss, &train, &w0, &cfg)?;
        let b = integrate_linearized_flow(&tangent, &loss, &train, &cfg)?;
        let r = compare_flows(&a, &b, alpha)?;
        println!(
            "{alpha:>8} {:>14.4e} {:>14.4e} {:>14.4e}",
            r.sup_dist_to_init, r.sup_dist_to_linearized, r.sup_output_deviation
        );
        reports.push(r);
    }
    let s = deviation_slopes(&reports)?;
    println!(
        "slopes: {:.3} {:.3} {:.3}",
        s.dist_to_init.slope, s.dist_to_linearized.slope, s.output_deviation.slope
    );
    Ok(())
}
