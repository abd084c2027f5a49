//! The scale criterion at initialization: it falls as 1/alpha for a
//! centered model, and as the width grows under 1/sqrt(m) output scaling.
//!
//! cargo run --release --example kappa_scaling

use lazyflow::diagnostics::{kappa, EstimatorConfig};
use lazyflow::loss::Loss;
use lazyflow::model::{Centered, InitScheme, ScaleRule, Scaled, TwoLayerNet};
use lazyflow::{linalg, rng, EvaluationSet};

fn main() -> lazyflow::Result<()> {
    let (d, n) = (10, 20);
    let train = EvaluationSet::new(rng::sphere_points(&mut rng::stream(1, 0), n, d))?;
    let loss =
        Loss::square(train.output_point(rng::normal_vec(&mut rng::stream(2, 0), n, 1.0), 1)?);
    let est = EstimatorConfig::default();

    let net = TwoLayerNet::softplus(32, d, 4.0).with_scale(ScaleRule::InvSqrtWidth);
    let w0 = net.init(InitScheme::Normal { std: 1.0 }, 3);
    let centered = Centered::new(net, w0.clone());
    println!("{:>8} {:>12} {:>12}", "alpha", "kappa", "alpha*kappa");
    for alpha in [1.0, 10.0, 100.0, 1000.0] {
        let k = kappa(&Scaled::new(&centered, alpha), &w0, &loss, &train, &est)?;
        println!("{alpha:>8} {k:>12.4e} {:>12.6}", alpha * k);
    }

    println!("\n{:>8} {:>12}", "m", "mean kappa");
    let widths = [16usize, 64, 256, 1024];
    let mut means = Vec::new();
    for &m in &widths {
        let net = TwoLayerNet::softplus(m, d, 4.0).with_scale(ScaleRule::InvSqrtWidth);
        let mut total = 0.0;
        for seed in 0..5 {
            let w0 = net.init(InitScheme::Normal { std: 1.0 }, 100 + seed);
            total += kappa(&net, &w0, &loss, &train, &est.with_seed(seed))?;
        }
        means.push(total / 5.0);
        println!("{m:>8} {:>12.4e}", total / 5.0);
    }
    let x: Vec<f64> = widths.iter().map(|&m| m as f64).collect();
    println!("log-log slope {:.3}", linalg::loglog_fit(&x, &means)?.slope);
    Ok(())
}
