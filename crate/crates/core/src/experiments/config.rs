use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::diagnostics::EstimatorConfig;
use crate::error::{Error, Result};
use crate::flow::FlowConfig;
use crate::model::{
    Activation, Centered, InitScheme, NeuronModel, ParamVector, ScaleRule, Scaled, Symmetrized,
    TwoLayerNet,
};

/// A teacher-student experiment. See `README.md` for the schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub teacher: TeacherConfig,
    pub student: StudentSpec,
    #[serde(default)]
    pub loss: LossSpec,
    pub data: DataSpec,
    pub flow: FlowConfig,
    /// Train with mini-batch SGD on fresh teacher samples instead of the
    /// full-batch flow on the training set.
    #[serde(default)]
    pub sgd: Option<SgdSpec>,
    /// Train the tangent model at initialization instead of the network.
    #[serde(default)]
    pub linearized: bool,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub diagnostics: DiagnosticsSpec,
    #[serde(default)]
    pub kernel: KernelSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TeacherConfig {
    #[serde(default = "default_teacher_width")]
    pub width: usize,
    pub seed: u64,
}

fn default_teacher_width() -> usize {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudentSpec {
    pub width: usize,
    pub input_dim: usize,
    #[serde(default = "one")]
    pub output_dim: usize,
    #[serde(default = "default_activation")]
    pub activation: Activation,
    #[serde(default = "default_scale")]
    pub scale_rule: ScaleRule,
    pub init: InitSpec,
    #[serde(default)]
    pub wrappers: Vec<WrapperSpec>,
}

fn one() -> usize {
    1
}

fn default_activation() -> Activation {
    Activation::Relu
}

fn default_scale() -> ScaleRule {
    ScaleRule::One
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitDist {
    Normal,
    Xavier,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitSpec {
    #[serde(default = "default_dist")]
    pub dist: InitDist,
    /// Standard deviation `tau` of the normal initialization.
    #[serde(default)]
    pub std: Option<f64>,
    pub seed: u64,
}

fn default_dist() -> InitDist {
    InitDist::Xavier
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WrapperSpec {
    Centered,
    Symmetrized,
    Scaled(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKindSpec {
    #[default]
    Square,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetSource {
    #[default]
    Teacher,
    Explicit,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossSpec {
    #[serde(default)]
    pub kind: LossKindSpec,
    #[serde(default)]
    pub target_source: TargetSource,
    /// Training targets, row-major, for `target_source = explicit`.
    #[serde(default)]
    pub targets: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSpec {
    pub n_train: usize,
    #[serde(default = "default_n_test")]
    pub n_test: usize,
    pub seed: u64,
}

fn default_n_test() -> usize {
    2000
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SgdSpec {
    pub batch_size: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    Tau,
    Alpha,
    M,
}

impl SweepVariable {
    pub fn name(self) -> &'static str {
        match self {
            SweepVariable::Tau => "tau",
            SweepVariable::Alpha => "alpha",
            SweepVariable::M => "m",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "tau" => Ok(SweepVariable::Tau),
            "alpha" => Ok(SweepVariable::Alpha),
            "m" => Ok(SweepVariable::M),
            other => Err(Error::config(
                "sweep.variable",
                format!("unknown sweep variable `{other}`"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub grid: Vec<f64>,
    #[serde(default = "one")]
    pub repeats: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsSpec {
    /// Estimate the scale criterion at initialization.
    #[serde(default = "yes")]
    pub kappa: bool,
    /// Training points used for the criterion (a prefix of the set).
    #[serde(default = "default_kappa_points")]
    pub kappa_points: usize,
    #[serde(default = "default_estimator")]
    pub estimator: EstimatorConfig,
}

fn yes() -> bool {
    true
}

fn default_kappa_points() -> usize {
    64
}

fn default_estimator() -> EstimatorConfig {
    EstimatorConfig {
        directions: 16,
        refinements: 2,
        ..EstimatorConfig::default()
    }
}

impl Default for DiagnosticsSpec {
    fn default() -> Self {
        DiagnosticsSpec {
            kappa: true,
            kappa_points: default_kappa_points(),
            estimator: default_estimator(),
        }
    }
}

/// Settings of the `kernel` command.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    /// Points of the angle grid on `[0, pi]` for the section.
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    /// Random-feature realizations drawn for the section.
    #[serde(default = "default_kernel_seeds")]
    pub seeds: usize,
    /// Feature count of the realizations; the student width when absent.
    #[serde(default)]
    pub width: Option<usize>,
}

fn default_grid_points() -> usize {
    181
}

fn default_kernel_seeds() -> usize {
    10
}

impl Default for KernelSpec {
    fn default() -> Self {
        KernelSpec {
            grid_points: default_grid_points(),
            seeds: default_kernel_seeds(),
            width: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(path, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::config(
                path.display().to_string(),
                format!("cannot read config: {e}"),
            )
        })?;
        Self::from_json_str(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Semantic checks beyond the schema.
    pub fn validate(&self) -> Result<()> {
        let s = &self.student;
        if s.width == 0 {
            return Err(Error::config("student.width", "must be at least 1"));
        }
        if s.input_dim == 0 {
            return Err(Error::config("student.input_dim", "must be at least 1"));
        }
        if s.output_dim != 1 && self.loss.target_source == TargetSource::Teacher {
            return Err(Error::config(
                "student.output_dim",
                "teacher labels are scalar, use 1",
            ));
        }
        if let Activation::Softplus { beta } = s.activation {
            if !(beta > 0.0) {
                return Err(Error::config(
                    "student.activation.softplus.beta",
                    "must be positive",
                ));
            }
        }
        match s.init.dist {
            InitDist::Normal if !s.init.std.is_some_and(|v| v > 0.0) => {
                return Err(Error::config(
                    "student.init.std",
                    "normal init needs a positive std",
                ));
            }
            _ => {}
        }
        let symmetrized = s
            .wrappers
            .iter()
            .filter(|w| **w == WrapperSpec::Symmetrized)
            .count();
        if symmetrized > 1 {
            return Err(Error::config(
                "student.wrappers",
                "symmetrized may appear at most once",
            ));
        }
        if symmetrized == 1 && !s.width.is_multiple_of(2) {
            return Err(Error::config(
                "student.width",
                "symmetrized networks need an even width",
            ));
        }
        for (i, w) in s.wrappers.iter().enumerate() {
            if let WrapperSpec::Scaled(a) = w {
                if !(*a > 0.0) {
                    return Err(Error::config(
                        format!("student.wrappers[{i}].scaled"),
                        "must be positive",
                    ));
                }
            }
        }
        if self.teacher.width == 0 {
            return Err(Error::config("teacher.width", "must be at least 1"));
        }
        if self.data.n_train == 0 {
            return Err(Error::config("data.n_train", "must be at least 1"));
        }
        if self.data.n_test == 0 {
            return Err(Error::config("data.n_test", "must be at least 1"));
        }
        if self.loss.target_source == TargetSource::Explicit {
            let expected = self.data.n_train * s.output_dim;
            match &self.loss.targets {
                Some(t) if t.len() == expected => {}
                Some(t) => {
                    return Err(Error::config(
                        "loss.targets",
                        format!("expected {expected} values, got {}", t.len()),
                    ))
                }
                None => {
                    return Err(Error::config(
                        "loss.targets",
                        "explicit targets are missing",
                    ))
                }
            }
        }
        if self.kernel.grid_points < 2 {
            return Err(Error::config("kernel.grid_points", "must be at least 2"));
        }
        if self.kernel.seeds == 0 || self.kernel.width == Some(0) {
            return Err(Error::config(
                "kernel",
                "seeds and width must be at least 1",
            ));
        }
        self.flow
            .validate()
            .map_err(|e| Error::config("flow", e.to_string()))?;
        if let Some(sgd) = &self.sgd {
            if sgd.batch_size == 0 {
                return Err(Error::config("sgd.batch_size", "must be at least 1"));
            }
        }
        if let Some(sw) = &self.sweep {
            if sw.repeats == 0 {
                return Err(Error::config("sweep.repeats", "must be at least 1"));
            }
            if sw.grid.is_empty() {
                return Err(Error::config("sweep.grid", "must not be empty"));
            }
            for (i, v) in sw.grid.iter().enumerate() {
                let ok = match sw.variable {
                    SweepVariable::M => *v >= 1.0 && v.fract() == 0.0,
                    _ => *v > 0.0 && v.is_finite(),
                };
                if !ok {
                    return Err(Error::config(
                        format!("sweep.grid[{i}]"),
                        format!("invalid value {v}"),
                    ));
                }
            }
        }
        Ok(())
    }

    /// A copy with the sweep variable set to `value`.
    pub fn with_value(&self, variable: SweepVariable, value: f64) -> ExperimentConfig {
        let mut c = self.clone();
        match variable {
            SweepVariable::Tau => {
                c.student.init.dist = InitDist::Normal;
                c.student.init.std = Some(value);
            }
            SweepVariable::Alpha => c.flow.alpha = value,
            SweepVariable::M => c.student.width = value as usize,
        }
        c
    }
}

/// Student network with all wrappers applied, and its initialization.
pub type Student = Box<dyn NeuronModel>;

impl StudentSpec {
    fn scheme(&self) -> InitScheme {
        match self.init.dist {
            InitDist::Normal => InitScheme::Normal {
                std: self.init.std.unwrap_or(1.0),
            },
            InitDist::Xavier => InitScheme::Xavier,
        }
    }

    /// The bare network (half width when symmetrized, with the output
    /// normalization of the full width).
    pub fn base_network(&self) -> TwoLayerNet {
        let symmetrized = self.wrappers.contains(&WrapperSpec::Symmetrized);
        let width = if symmetrized {
            self.width / 2
        } else {
            self.width
        };
        let scale = if symmetrized {
            ScaleRule::Constant(self.scale_rule.factor(self.width))
        } else {
            self.scale_rule
        };
        TwoLayerNet::new(
            width,
            self.input_dim,
            self.output_dim,
            self.activation,
            scale,
        )
    }

    /// Builds the wrapped student and its initial parameters, with the
    /// initialization seed replaced by `seed`.
    pub fn build_with_seed(&self, seed: u64) -> (Student, ParamVector) {
        let net = self.base_network();
        let mut w0 = net.init(self.scheme(), seed);
        let mut model: Student = Box::new(net);
        for wrapper in &self.wrappers {
            model = match wrapper {
                WrapperSpec::Centered => Box::new(Centered::new(model, w0.clone())),
                WrapperSpec::Symmetrized => {
                    let sym = Symmetrized::new(model);
                    w0 = sym.init(&w0);
                    Box::new(sym)
                }
                WrapperSpec::Scaled(a) => Box::new(Scaled::new(model, *a)),
            };
        }
        (model, w0)
    }

    pub fn build(&self) -> (Student, ParamVector) {
        self.build_with_seed(self.init.seed)
    }
}
