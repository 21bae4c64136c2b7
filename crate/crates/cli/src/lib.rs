//! Experiment runner behind the `bsviel` binary.

pub mod config;
pub mod output;
pub mod run;

pub use config::{parse, Experiment, RunConfig};
pub use run::{run, run_config, Check, RunOptions, RunOutcome};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] bsviel::Error),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("thread pool: {0}")]
    Threads(String),
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECKS_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_CONTRACTION: i32 = 3;
pub const EXIT_NON_CONVERGENCE: i32 = 4;
pub const EXIT_OTHER: i32 = 5;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use bsviel::Error as E;
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Core(E::InvalidSpec { .. } | E::UnsupportedJumpLaw(_)) => EXIT_CONFIG,
            CliError::Core(E::ContractionRejected { .. } | E::CoefficientsTooLarge { .. }) => EXIT_CONTRACTION,
            CliError::Core(E::NonConvergence { .. }) => EXIT_NON_CONVERGENCE,
            _ => EXIT_OTHER,
        }
    }
}
