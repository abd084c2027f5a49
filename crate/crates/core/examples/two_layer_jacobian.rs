//! Jacobian of a two-layer network, checked against central differences,
//! and the tangent kernel it induces on a handful of inputs.
//!
//! cargo run --release --example two_layer_jacobian

use lazyflow::linearize::tangent_kernel;
use lazyflow::model::{InitScheme, Model, ScaleRule, TwoLayerNet};
use lazyflow::{jacobian, rng, EvaluationSet};

fn main() -> lazyflow::Result<()> {
    let net = TwoLayerNet::softplus(16, 5, 2.0).with_scale(ScaleRule::InvSqrtWidth);
    let w = net.init(InitScheme::Normal { std: 1.0 }, 7);
    let inputs = EvaluationSet::new(rng::sphere_points(&mut rng::stream(8, 0), 4, 5))?;

    let jac = jacobian(&net, &w, &inputs)?.dense()?;
    let mut worst: f64 = 0.0;
    for c in 0..w.len() {
        let h = 1e-6 * w[c].abs().max(1.0);
        let (mut plus, mut minus) = (w.to_vec(), w.to_vec());
        plus[c] += h;
        minus[c] -= h;
        let (fp, fm) = (net.forward(&plus, &inputs), net.forward(&minus, &inputs));
        for r in 0..fp.len() {
            worst = worst.max(((fp[r] - fm[r]) / (2.0 * h) - jac[(r, c)]).abs());
        }
    }
    println!("{} parameters, {} outputs", net.param_count(), jac.nrows());
    println!("largest entrywise gap to central differences: {worst:.2e}");

    // Unweighted kernel K(x_i, x_j) = <grad f(x_i), grad f(x_j)>.
    let kernel = tangent_kernel(&net, &w, &inputs)?;
    let k = kernel.unweighted(inputs.weights());
    println!("tangent kernel:\n{k:.4}");
    Ok(())
}
