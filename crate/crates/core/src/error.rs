use thiserror::Error;

/// Axis along which two objects failed to line up.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Parameters,
    InputDim,
    OutputDim,
    Points,
}

impl std::fmt::Display for Axis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Axis::Parameters => "parameter count",
            Axis::InputDim => "input dimension",
            Axis::OutputDim => "output dimension",
            Axis::Points => "number of points",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch on {axis}: expected {expected}, got {found}")]
    DimensionMismatch {
        axis: Axis,
        expected: usize,
        found: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("critical initialization: {0}")]
    CriticalInitialization(String),

    #[error("flow diverged at t={t}: loss {loss} exceeds 10x the initial loss {initial}")]
    Diverged { t: f64, loss: f64, initial: f64 },

    #[error("non-finite state encountered at t={t}")]
    NonFinite { t: f64 },

    #[error("eigensolver did not converge: {0}")]
    NoConvergence(String),

    #[error("dense materialization refused: {entries} entries exceeds the limit of {limit}")]
    TooLarge { entries: usize, limit: usize },

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Diverged { .. }
                | Error::NonFinite { .. }
                | Error::NoConvergence(_)
                | Error::CriticalInitialization(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(axis: Axis, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            axis,
            expected,
            found,
        })
    }
}
