//! Plumbing behind the `htq` binary: error classification and exit codes,
//! run manifests, the subcommand implementations and the verification
//! suites.

pub mod commands;
pub mod verify;

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::io::IoError;
use crate::quant::QuantError;
use crate::sim::SimError;
use crate::solver::SolverError;
use crate::tail::TailError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitCode {
    Success = 0,
    Usage = 2,
    Input = 3,
    Numerical = 4,
    Verification = 5,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Numerical(String),
    #[error("{0}")]
    Verification(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Usage(_) => ExitCode::Usage,
            CliError::Input(_) => ExitCode::Input,
            CliError::Numerical(_) => ExitCode::Numerical,
            CliError::Verification(_) => ExitCode::Verification,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Input(_) => "input",
            CliError::Numerical(_) => "numerical",
            CliError::Verification(_) => "verification",
        }
    }

    /// One-line JSON for stderr.
    pub fn to_json(&self) -> String {
        serde_json::json!({
            "error": self.kind(),
            "message": self.to_string(),
            "exit_code": self.exit_code() as i32,
        })
        .to_string()
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<TailError> for CliError {
    fn from(e: TailError) -> Self {
        CliError::Input(format!("tail fit: {e}"))
    }
}

impl From<QuantError> for CliError {
    fn from(e: QuantError) -> Self {
        CliError::Input(format!("quantizer: {e}"))
    }
}

impl From<SolverError> for CliError {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::InvalidEta { .. } | SolverError::InvalidInput(_) | SolverError::InvalidK(_) => {
                CliError::Usage(e.to_string())
            }
            SolverError::BudgetTooSmall { .. } => CliError::Usage(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Config(_) | SimError::IncompatibleConfigs(_) => CliError::Usage(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

/// Sidecar describing how an output file was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub config: serde_json::Value,
    pub seed: u64,
    pub version: String,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub duration_secs: f64,
}

impl RunManifest {
    pub fn new(subcommand: &str, config: serde_json::Value, seed: u64) -> Self {
        Self {
            subcommand: subcommand.to_string(),
            config,
            seed,
            version: VERSION.to_string(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            duration_secs: 0.0,
        }
    }

    pub fn input(mut self, p: &Path) -> Self {
        self.inputs.push(p.display().to_string());
        self
    }

    pub fn output(mut self, p: &Path) -> Self {
        self.outputs.push(p.display().to_string());
        self
    }

    /// Writes `<output>.manifest.json` next to every output file.
    pub fn write(mut self, elapsed: Duration) -> Result<(), CliError> {
        self.duration_secs = elapsed.as_secs_f64();
        for out in &self.outputs {
            crate::io::write_json(&manifest_path(Path::new(out)), &self)?;
        }
        Ok(())
    }
}

pub fn manifest_path(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}
