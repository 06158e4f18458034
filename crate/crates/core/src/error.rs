use std::path::PathBuf;

/// Errors produced by the solver, the decomposition and the reporting layers.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("singular geometry: {0}")]
    SingularGeometry(String),

    #[error("numerical failure in {scenario}: {detail}")]
    NumericalFailure { scenario: String, detail: String },

    #[error(
        "degenerate normalization: isolated current at mesh {mesh} is {ratio:.3e} of the peak \
         (guard {guard:e})"
    )]
    DegenerateNormalization { mesh: usize, ratio: f64, guard: f64 },

    #[error("degenerate main-lobe region: {0}")]
    DegenerateRegion(String),

    #[error("size guard: {unknowns} unknowns exceeds the dense-solve limit of {limit}")]
    SizeGuard { unknowns: usize, limit: usize },

    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn config(field: &str, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.to_string(),
            message: message.into(),
        }
    }

    pub(crate) fn numerical(scenario: &str, detail: impl Into<String>) -> Self {
        Error::NumericalFailure {
            scenario: scenario.to_string(),
            detail: detail.into(),
        }
    }
}
