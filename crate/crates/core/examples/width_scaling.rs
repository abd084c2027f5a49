//! Test loss against width for the two output normalizations 1/sqrt(m)
//! (lazy as m grows) and 1/m (features keep moving).
//!
//! cargo run --release --example width_scaling [-- <repeats>]

use lazyflow::experiments::{summarize, sweep_width, ExperimentConfig};
use lazyflow::model::ScaleRule;

fn main() -> lazyflow::Result<()> {
    let config = ExperimentConfig::from_json_str(include_str!("configs/width_scaling.json"))?;
    let repeats = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(1);
    let widths: Vec<usize> = config
        .sweep
        .as_ref()
        .unwrap()
        .grid
        .iter()
        .map(|v| *v as usize)
        .collect();
    let rules = [ScaleRule::InvSqrtWidth, ScaleRule::InvWidth];
    let out = sweep_width(&config, &rules, &widths, repeats)?;
    println!("{:>6} {:>14} {:>14}", "m", "1/sqrt(m)", "1/m");
    let lazy = summarize(&out[0].rows);
    let mean_field = summarize(&out[1].rows);
    for (a, b) in lazy.iter().zip(&mean_field) {
        println!(
            "{:>6} {:>14.4e} {:>14.4e}",
            a.value, a.mean_test_loss, b.mean_test_loss
        );
    }
    Ok(())
}
