use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lazyflow::experiments::{self, ExperimentConfig, SweepVariable};

#[derive(Parser)]
#[command(
    name = "lazyflow",
    version,
    about = "Lazy-training experiments and diagnostics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON experiment config.
    config: PathBuf,
    /// Output directory (overrides `output.dir`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Train once and write results, diagnostics and the trajectory.
    Run(Common),
    /// Run every grid value and repeat of the config's sweep.
    Sweep {
        /// Variable to sweep (defaults to `sweep.variable`).
        #[arg(long, value_parser = parse_variable)]
        var: Option<SweepVariable>,
        #[command(flatten)]
        common: Common,
    },
    /// Norm estimates, scale criterion and bound checks at initialization.
    Diagnose {
        /// Also write the deviation curves to `deviation.csv`.
        #[arg(long)]
        csv: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Arc-cosine kernel section or tangent-kernel spectrum.
    Kernel {
        #[arg(
            long,
            conflicts_with = "spectrum",
            required_unless_present = "spectrum"
        )]
        section: bool,
        #[arg(long)]
        spectrum: bool,
        #[command(flatten)]
        common: Common,
    },
}

fn parse_variable(s: &str) -> Result<SweepVariable, String> {
    SweepVariable::parse(s).map_err(|e| e.to_string())
}

fn out_dir(common: &Common, config: &ExperimentConfig) -> PathBuf {
    common
        .out
        .clone()
        .or_else(|| config.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from("lazyflow-out"))
}

fn load(path: &Path) -> lazyflow::Result<ExperimentConfig> {
    ExperimentConfig::from_path(path)
}

fn execute(cli: Cli) -> lazyflow::Result<PathBuf> {
    match cli.command {
        Command::Run(common) => {
            let config = load(&common.config)?;
            let dir = out_dir(&common, &config);
            let outcome = experiments::run_teacher_student(&config, 0)?;
            experiments::write_run(&dir, &config, &outcome)?;
            print!("{}", experiments::run_summary(&outcome));
            Ok(dir)
        }
        Command::Sweep { var, common } => {
            let config = load(&common.config)?;
            let dir = out_dir(&common, &config);
            let rows = experiments::sweep_from_config(&config, var)?;
            experiments::write_sweep(&dir, &config, &rows)?;
            print!("{}", experiments::sweep_summary(&rows));
            Ok(dir)
        }
        Command::Diagnose { csv, common } => {
            let config = load(&common.config)?;
            let dir = out_dir(&common, &config);
            let report = experiments::diagnose(&config)?;
            experiments::write_diagnose(&dir, &config, &report, csv)?;
            print!("{}", std::fs::read_to_string(dir.join("summary.txt"))?);
            Ok(dir)
        }
        Command::Kernel {
            spectrum, common, ..
        } => {
            let config = load(&common.config)?;
            let dir = out_dir(&common, &config);
            if spectrum {
                let s = experiments::spectrum_from_config(&config)?;
                experiments::write_spectrum(&dir, &config, &s)?;
            } else {
                let s = experiments::section_from_config(&config)?;
                experiments::write_section(&dir, &config, &s)?;
            }
            print!("{}", std::fs::read_to_string(dir.join("summary.txt"))?);
            Ok(dir)
        }
    }
}

fn main() -> ExitCode {
    // Usage errors count as configuration errors; clap would exit with 2,
    // which is reserved for numerical failures.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(cli) {
        Ok(dir) => {
            eprintln!("wrote {}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
