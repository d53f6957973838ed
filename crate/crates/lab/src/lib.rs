//! Scenario runner: reads a TOML scenario, builds tables, runs solver
//! sweeps against the limit oracle and writes a report plus CSV data.

pub mod config;
pub mod run;

pub use config::ScenarioConfig;
pub use run::{run, Report, RunOptions};

#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error("config parse error: {0}")]
    Parse(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("hypothesis check failed (strict mode): {0}")]
    Hypothesis(String),

    #[error(transparent)]
    Core(#[from] phasefield_core::Error),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}
