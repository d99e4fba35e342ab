use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A state lies outside the model's admissible box.
    #[error("state entry {index} = {value} outside admissible interval [{lower}, {upper}]")]
    Domain {
        index: usize,
        value: f64,
        lower: f64,
        upper: f64,
    },

    #[error("negative relaxation parameter eps = {0}")]
    NegativeEps(f64),

    /// A model callback produced NaN or an infinite value.
    #[error("non-finite output from {what}")]
    Evaluation { what: String },

    #[error("model construction failed: {0}")]
    Construction(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("unknown model `{0}`")]
    UnknownModel(String),

    #[error("unknown exact solution `{0}`")]
    UnknownSolution(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("degenerate fit: {0}")]
    Degenerate(String),

    #[error("solution diverged at t = {t}: {reason}")]
    Divergence { t: f64, reason: String },

    #[error("random instance generation failed after {attempts} attempts: {reason}")]
    GeneratorExhausted { attempts: usize, reason: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serde(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn eval(what: impl Into<String>) -> Self {
        Error::Evaluation { what: what.into() }
    }
}
