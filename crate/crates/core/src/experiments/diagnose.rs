use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::diagnostics::{
    check_theorem2_bound, check_theorem3_rate, compare_flows, estimate_norms, kappa,
    DeviationReport, NormEstimates, Theorem2Check, Theorem3Check,
};
use crate::error::{Error, Result};
use crate::flow::{integrate_flow, integrate_linearized_flow};
use crate::kernels::{kernel_section, phi_grid, ArcCosineKernelSpec, KernelSection};
use crate::linearize::{build_tangent, kernel_spectrum, tangent_kernel, Spectrum};
use crate::loss::Loss;
use crate::model::Scaled;
use crate::rng;

use super::config::ExperimentConfig;
use super::run::{RunData, RunSeeds};

/// Safety factor applied to sampled Lipschitz estimates in bound checks.
pub const LIPSCHITZ_SAFETY: f64 = 2.0;

/// Everything `diagnose` measures on one configuration.
#[derive(Debug, Clone, Serialize)]
pub struct DiagnoseReport {
    pub alpha: f64,
    /// Estimates for the unscaled model `h` on the training set.
    pub norms: NormEstimates,
    /// Scale criterion of `alpha h`.
    pub kappa: Option<f64>,
    pub deviation: DeviationReport,
    /// `None` (with a reason) when the flow stopped before the horizon.
    pub theorem2: std::result::Result<Theorem2Check, String>,
    pub theorem3: Theorem3Check,
}

/// Norm estimates, scale criterion, flow comparison with the tangent
/// model and both bound checks, for the first repeat of `config`.
pub fn diagnose(config: &ExperimentConfig) -> Result<DiagnoseReport> {
    config.validate()?;
    if config.sgd.is_some() {
        return Err(Error::config(
            "sgd",
            "diagnose compares full-batch flows; remove the sgd section",
        ));
    }
    let seeds = RunSeeds::for_repeat(config, 0);
    let data = RunData::generate(config, seeds)?;
    let (model, w0) = config.student.build_with_seed(seeds.init);
    let alpha = config.flow.alpha;
    let loss = Loss::from_set(&data.train)?;
    let est = config.diagnostics.estimator.with_seed(seeds.init);
    let norms = estimate_norms(&model, &w0, &data.train, &est)?;
    let kappa = match kappa(&Scaled::new(&model, alpha), &w0, &loss, &data.train, &est) {
        Ok(k) => Some(k),
        Err(Error::CriticalInitialization(_)) => None,
        Err(e) => return Err(e),
    };

    let traj = integrate_flow(&model, &loss, &data.train, &w0, &config.flow)?;
    let flow_lin = config.flow.clone().with_lip_h(traj.meta.lip_h);
    let tangent = build_tangent(&model, &w0, &data.train)?;
    let traj_lin = integrate_linearized_flow(&tangent, &loss, &data.train, &flow_lin)?;
    let deviation = compare_flows(&traj, &traj_lin, alpha)?;

    let l = LIPSCHITZ_SAFETY * norms.lip_h;
    let iterations = traj.horizon() * l * l;
    let theorem2 = check_theorem2_bound(
        &traj,
        &traj_lin,
        &norms,
        &loss,
        alpha,
        iterations,
        LIPSCHITZ_SAFETY,
    )
    .map_err(|e| e.to_string());
    let theorem3 = check_theorem3_rate(&traj, &norms, &loss, alpha, LIPSCHITZ_SAFETY)?;
    Ok(DiagnoseReport {
        alpha,
        norms,
        kappa,
        deviation,
        theorem2,
        theorem3,
    })
}

/// Writes the standard output files for a diagnose report; with
/// `curves`, also `deviation.csv` (`t,dist_to_init,dist_to_linearized,output_deviation`).
pub fn write_diagnose(
    dir: &Path,
    config: &ExperimentConfig,
    report: &DiagnoseReport,
    curves: bool,
) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("config-echo.json"), config.to_json()?)?;
    fs::write(
        dir.join("diagnostics.json"),
        serde_json::to_string_pretty(report)?,
    )?;

    let mut wtr = csv::Writer::from_path(dir.join("results.csv"))?;
    wtr.write_record([
        "alpha",
        "kappa",
        "dh_norm",
        "lip_h",
        "lip_dh",
        "sigma_min",
        "sup_dist_to_init",
        "sup_dist_to_linearized",
        "sup_output_deviation",
        "theorem2",
        "theorem3",
    ])?;
    let t2 = match &report.theorem2 {
        Ok(c) => status_name(&c.status),
        Err(_) => "not_reached",
    };
    let d = &report.deviation;
    wtr.write_record(&[
        report.alpha.to_string(),
        report.kappa.map_or(String::new(), |k| k.to_string()),
        report.norms.dh_norm.to_string(),
        report.norms.lip_h.to_string(),
        report.norms.lip_dh.to_string(),
        report.norms.sigma_min.to_string(),
        d.sup_dist_to_init.to_string(),
        d.sup_dist_to_linearized.to_string(),
        d.sup_output_deviation.to_string(),
        t2.to_string(),
        status_name(&report.theorem3.status).to_string(),
    ])?;
    wtr.flush()?;

    if curves {
        let mut wtr = csv::Writer::from_path(dir.join("deviation.csv"))?;
        wtr.write_record([
            "t",
            "dist_to_init",
            "dist_to_linearized",
            "output_deviation",
        ])?;
        for i in 0..d.t.len() {
            wtr.write_record(&[
                d.t[i].to_string(),
                d.dist_to_init[i].to_string(),
                d.dist_to_linearized[i].to_string(),
                d.output_deviation[i].to_string(),
            ])?;
        }
        wtr.flush()?;
    }

    let mut s = String::new();
    let _ = writeln!(s, "alpha                 {:.4e}", report.alpha);
    if let Some(k) = report.kappa {
        let _ = writeln!(s, "kappa                 {k:.4e}");
    }
    let _ = writeln!(s, "||Dh(w0)||            {:.4e}", report.norms.dh_norm);
    let _ = writeln!(
        s,
        "Lip(h), Lip(Dh)       {:.4e}, {:.4e}",
        report.norms.lip_h, report.norms.lip_dh
    );
    let _ = writeln!(
        s,
        "sigma_min             {:.4e} (rank {})",
        report.norms.sigma_min, report.norms.rank
    );
    let _ = writeln!(s, "sup ||w - w_bar||     {:.4e}", d.sup_dist_to_linearized);
    let _ = writeln!(s, "sup output deviation  {:.4e}", d.sup_output_deviation);
    match &report.theorem2 {
        Ok(c) => {
            let _ = writeln!(
                s,
                "finite-horizon bound  {} (measured {:.3e}, bound {:.3e})",
                status_name(&c.status),
                c.measured_lhs,
                c.bound_rhs
            );
        }
        Err(e) => {
            let _ = writeln!(s, "finite-horizon bound  not evaluated: {e}");
        }
    }
    let _ = writeln!(
        s,
        "linear convergence    {} (max residual/envelope {:.3})",
        status_name(&report.theorem3.status),
        report.theorem3.max_ratio
    );
    fs::write(dir.join("summary.txt"), s)?;
    Ok(())
}

fn status_name(s: &crate::diagnostics::BoundStatus) -> &'static str {
    use crate::diagnostics::BoundStatus::*;
    match s {
        Satisfied => "satisfied",
        Violated => "violated",
        NotApplicable(_) => "not_applicable",
        PreconditionUnmet(_) => "precondition_unmet",
        NotOverParameterized => "not_overparameterized",
    }
}

/// Limit kernel and `kernel.seeds` realizations along a section of the
/// sphere in dimension `student.input_dim`, with standard-normal moments.
pub fn section_from_config(config: &ExperimentConfig) -> Result<KernelSection> {
    config.validate()?;
    let spec = ArcCosineKernelSpec::standard_normal(config.student.input_dim);
    let m = config.kernel.width.unwrap_or(config.student.width);
    let seeds: Vec<u64> = (0..config.kernel.seeds as u64)
        .map(|s| rng::derive_seed(config.student.init.seed, s))
        .collect();
    kernel_section(&spec, &phi_grid(config.kernel.grid_points), m, &seeds)
}

/// Spectrum of the tangent kernel of `alpha h` at initialization on the
/// training set.
pub fn spectrum_from_config(config: &ExperimentConfig) -> Result<Spectrum> {
    config.validate()?;
    let seeds = RunSeeds::for_repeat(config, 0);
    let data = RunData::generate(config, seeds)?;
    let (model, w0) = config.student.build_with_seed(seeds.init);
    let scaled = Scaled::new(&model, config.flow.alpha);
    kernel_spectrum(&tangent_kernel(&scaled, &w0, &data.train)?)
}

/// Writes the standard output files for `kernel --section`; `results.csv`
/// holds `phi,K_limit,K_a,K_b,seed_<s>...`.
pub fn write_section(dir: &Path, config: &ExperimentConfig, section: &KernelSection) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("config-echo.json"), config.to_json()?)?;
    section.write_csv_file(&dir.join("results.csv"))?;
    let errors = section.sup_errors();
    #[derive(Serialize)]
    struct SectionDiagnostics<'a> {
        seeds: &'a [u64],
        sup_errors: &'a [f64],
    }
    fs::write(
        dir.join("diagnostics.json"),
        serde_json::to_string_pretty(&SectionDiagnostics {
            seeds: &section.seeds,
            sup_errors: &errors,
        })?,
    )?;
    let mean = errors.iter().sum::<f64>() / errors.len().max(1) as f64;
    fs::write(
        dir.join("summary.txt"),
        format!(
            "{} angles, {} realizations\nmean sup |K_m - K| {mean:.4e}\n",
            section.phi.len(),
            errors.len()
        ),
    )?;
    Ok(())
}

/// Writes the standard output files for `kernel --spectrum`; `results.csv`
/// holds `index,eigenvalue,normalized_eigenvalue`.
pub fn write_spectrum(dir: &Path, config: &ExperimentConfig, spectrum: &Spectrum) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("config-echo.json"), config.to_json()?)?;
    let mut wtr = csv::Writer::from_path(dir.join("results.csv"))?;
    wtr.write_record(["index", "eigenvalue", "normalized_eigenvalue"])?;
    for (i, (e, n)) in spectrum
        .eigenvalues
        .iter()
        .zip(&spectrum.normalized)
        .enumerate()
    {
        wtr.write_record(&[i.to_string(), e.to_string(), n.to_string()])?;
    }
    wtr.flush()?;
    fs::write(
        dir.join("diagnostics.json"),
        serde_json::to_string_pretty(spectrum)?,
    )?;
    fs::write(
        dir.join("summary.txt"),
        format!(
            "{} eigenvalues{}\nrank {}\nsmallest nonzero singular value {:.4e}\n",
            spectrum.eigenvalues.len(),
            if spectrum.complete {
                ""
            } else {
                " (leading part only)"
            },
            spectrum.rank,
            spectrum.sigma_min_nonzero
        ),
    )?;
    Ok(())
}
