//! Teacher-student experiments: configuration, data, single runs, sweeps
//! and their on-disk outputs.

mod cloud;
mod config;
mod diagnose;
mod output;
mod run;
mod sweep;
mod teacher;

pub use cloud::{export_neuron_cloud, neuron_cloud, CloudPoint};
pub use config::{
    DataSpec, DiagnosticsSpec, ExperimentConfig, InitDist, InitSpec, KernelSpec, LossKindSpec,
    LossSpec, OutputSpec, SgdSpec, Student, StudentSpec, SweepSpec, SweepVariable, TargetSource,
    TeacherConfig, WrapperSpec,
};
pub use diagnose::{
    diagnose, section_from_config, spectrum_from_config, write_diagnose, write_section,
    write_spectrum, DiagnoseReport, LIPSCHITZ_SAFETY,
};
pub use output::{run_summary, sweep_summary, write_run, write_sweep};
pub use run::{run_teacher_student, RunData, RunOutcome, RunSeeds};
pub use sweep::{
    summarize, sweep, sweep_from_config, sweep_width, SweepRow, SweepSummary, WidthSweep,
};
pub use teacher::{Teacher, TeacherSampler, TeacherSpec};
