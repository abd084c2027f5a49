//! Random-feature tangent kernels of wide ReLU networks along a section
//! of the sphere, and their convergence to the arc-cosine closed forms.
//!
//! cargo run --release --example arc_cosine_kernel [-- <out.csv>]

use lazyflow::kernels::{convergence_study, kernel_section, phi_grid, ArcCosineKernelSpec};

fn main() -> lazyflow::Result<()> {
    let spec = ArcCosineKernelSpec::standard_normal(10);
    let section = kernel_section(&spec, &phi_grid(9), 500, &[1, 2, 3])?;
    println!(
        "{:>6} {:>9} {:>9} {:>9}   K_500 (3 seeds)",
        "phi", "K_a", "K_b", "K"
    );
    for (i, phi) in section.phi.iter().enumerate() {
        let k = section.limit[i];
        let draws: Vec<String> = section
            .realizations
            .iter()
            .map(|r| format!("{:.4}", r[i]))
            .collect();
        println!(
            "{phi:>6.3} {:>9.4} {:>9.4} {:>9.4}   {}",
            k.k_a,
            k.k_b,
            k.total,
            draws.join(" ")
        );
    }
    if let Some(path) = std::env::args().nth(1) {
        kernel_section(&spec, &phi_grid(181), 500, &(0..10).collect::<Vec<_>>())?
            .write_csv_file(std::path::Path::new(&path))?;
    }

    let study = convergence_study(&spec, &[25, 100, 400, 1600], 64, 16, 5)?;
    println!("\n{:>6} {:>12}", "m", "sup error");
    for (m, e) in study.widths.iter().zip(&study.mean_sup_error) {
        println!("{m:>6} {e:>12.4e}");
    }
    println!("slope {:.3}", study.fit.slope);
    Ok(())
}
