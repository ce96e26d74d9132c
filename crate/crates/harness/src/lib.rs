//! Experiment harness for `manifold-langevin`: TOML configs, named
//! experiment presets, run directories with CSV and JSON artifacts.

pub mod config;
pub mod experiments;
pub mod presets;
pub mod record;
pub mod table;
pub mod targets;

pub use config::{ExperimentConfig, ExperimentKind};
pub use record::{rerun, run, Manifest, RunRecord};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    /// Bad config or arguments, raised before any computation.
    #[error("invalid configuration: {0}")]
    Validation(String),

    #[error(transparent)]
    Runtime(#[from] manifold_langevin::Error),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl LabError {
    pub fn invalid(e: impl std::fmt::Display) -> Self {
        LabError::Validation(e.to_string())
    }

    /// Process exit code: 2 for validation errors, 3 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Validation(_) => 2,
            _ => 3,
        }
    }
}

pub type Result<T, E = LabError> = std::result::Result<T, E>;
