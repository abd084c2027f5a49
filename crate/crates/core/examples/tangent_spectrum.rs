//! Spectrum of the tangent kernel of a ReLU network at initialization,
//! normalized by its largest eigenvalue.
//!
//! cargo run --release --example tangent_spectrum

use lazyflow::linearize::{kernel_spectrum, tangent_kernel};
use lazyflow::model::{InitScheme, Model, ScaleRule, TwoLayerNet};
use lazyflow::{rng, EvaluationSet};

fn main() -> lazyflow::Result<()> {
    let (d, n) = (20, 200);
    let inputs = EvaluationSet::new(rng::sphere_points(&mut rng::stream(1, 0), n, d))?;
    for m in [10usize, 100, 1000] {
        let net = TwoLayerNet::relu(m, d).with_scale(ScaleRule::InvSqrtWidth);
        let w0 = net.init(InitScheme::Normal { std: 1.0 }, 2);
        let s = kernel_spectrum(&tangent_kernel(&net, &w0, &inputs)?)?;
        let picks: Vec<String> = [1usize, 2, 5, 10, 50, 100, 200]
            .iter()
            .filter(|&&i| i <= s.normalized.len())
            .map(|&i| format!("{i}:{:.2e}", s.normalized[i - 1]))
            .collect();
        println!(
            "m = {m:>4} (p = {:>5}) rank {:>3}  {}",
            net.param_count(),
            s.rank,
            picks.join(" ")
        );
    }
    Ok(())
}
