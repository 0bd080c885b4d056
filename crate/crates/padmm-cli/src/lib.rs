//! Batch front end for the `padmm-core` solver: loads scenario configs,
//! runs the online iteration alongside its stationary-point oracle, checks
//! the per-step contraction/tracking inequalities, and emits CSV and JSON
//! artifacts suitable for plotting and CI gating.

pub mod config;
pub mod csvio;
pub mod report;
pub mod runner;
pub mod sweep;

/// Failure classes, each mapped to a stable process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Config unreadable, unparsable, or semantically invalid (exit 2).
    #[error("config error: {0}")]
    Schema(String),
    /// Solver diverged; partial outputs are retained (exit 3).
    #[error("divergence at step {step}: {detail}")]
    Divergence { step: usize, detail: String },
    /// Stationary-point oracle failed to produce a solution (exit 4).
    #[error("oracle failure: {0}")]
    Oracle(String),
    /// Filesystem trouble while writing outputs (exit 1).
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Exit code for a run that finished but failed one of its inequality checks.
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_SCHEMA: i32 = 2;
pub const EXIT_DIVERGENCE: i32 = 3;
pub const EXIT_ORACLE: i32 = 4;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Schema(_) => EXIT_SCHEMA,
            CliError::Divergence { .. } => EXIT_DIVERGENCE,
            CliError::Oracle(_) => EXIT_ORACLE,
            CliError::Io(_) => EXIT_CHECK_FAILED,
        }
    }
}
