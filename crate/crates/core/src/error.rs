use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("chart point outside the chart domain: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("mesh error: {0}")]
    Mesh(String),

    #[error("resolution error: {0}")]
    Resolution(String),

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("size error: {0}")]
    Size(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("chain {chain} failed at step {step}: {source}")]
    Chain {
        chain: usize,
        step: u64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
        if expected == got {
            Ok(())
        } else {
            Err(Error::Dimension { expected, got })
        }
    }
}
