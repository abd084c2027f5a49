//! Linear convergence when Dh(w0) is surjective: past the alpha threshold
//! the residual stays under sqrt(kappa) |r0| exp(-m sigma_min^2 t / 4).
//!
//! cargo run --release --example overparameterized_rate

use lazyflow::diagnostics::{check_theorem3_rate, estimate_norms, EstimatorConfig};
use lazyflow::flow::{integrate_flow, FlowConfig, RecordStride, StepRule};
use lazyflow::loss::Loss;
use lazyflow::model::{Centered, InitScheme, ScaleRule, TwoLayerNet};
use lazyflow::{rng, EvaluationSet};

fn main() -> lazyflow::Result<()> {
    let net = TwoLayerNet::softplus(20, 3, 4.0).with_scale(ScaleRule::InvSqrtWidth);
    let w0 = net.init(InitScheme::Normal { std: 1.0 }, 400);
    let model = Centered::new(net, w0.clone());
    let train = EvaluationSet::new(rng::sphere_points(&mut rng::stream(401, 0), 10, 3))?;
    let loss =
        Loss::square(train.output_point(rng::normal_vec(&mut rng::stream(402, 1), 10, 1.0), 1)?);
    let norms = estimate_norms(&model, &w0, &train, &EstimatorConfig::default())?;
    println!(
        "sigma_min {:.4e}, |Dh| {:.4}, Lip(Dh) {:.4}",
        norms.sigma_min, norms.dh_norm, norms.lip_dh
    );

    let rate = norms.sigma_min.powi(2) / 4.0;
    let t = 8.0 / rate;
    let dt = 0.5 / norms.lip_h.powi(2);
    for factor in [1e-4, 10.0] {
        // The threshold does not depend on the run; a short one reports it.
        let probe = integrate_flow(
            &model,
            &loss,
            &train,
            &w0,
            &FlowConfig::new(1.0).with_steps(1),
        )?;
        let threshold = check_theorem3_rate(&probe, &norms, &loss, 1.0, 2.0)?.alpha_threshold;
        let alpha = factor * threshold;
        let cfg = FlowConfig::new(alpha)
            .with_time(t)
            .with_step(StepRule::Fixed(dt))
            .with_record(RecordStride::Every(100));
        let traj = integrate_flow(&model, &loss, &train, &w0, &cfg)?;
        let c = check_theorem3_rate(&traj, &norms, &loss, alpha, 2.0)?;
        println!(
            "alpha {alpha:.3e}: max residual/envelope {:.3}, fitted rate {:.3e} (bound {:.3e}), {:?}",
            c.max_ratio,
            c.rate_fit.map(|f| f.slope).unwrap_or(f64::NAN),
            c.bound_rate,
            c.status
        );
    }
    Ok(())
}
