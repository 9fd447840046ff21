//! Shared plumbing for the `sim` and `graph` binaries.

use std::fmt;
use std::path::Path;
use std::process::ExitCode;

use graph_sync::discrepancy::{DiscrepancyConfig, DiscrepancyError, Thresholds};
use graph_sync::monitor::MonitorError;
use graph_sync::optimizer::OptimizerError;
use graph_sync::posegraph::{GraphError, ParseError};
use graph_sync::proxy::ProxyError;
use graph_sync::sim::{ServerOracle, SimError, Strategy};
use graph_sync::spectral::SpectralError;
use serde::Deserialize;

/// Exit status for rejected input.
pub const EXIT_INVALID: u8 = 2;
/// Exit status for I/O and numerical failures.
pub const EXIT_FAILURE: u8 = 1;

#[derive(Debug)]
pub enum CliError {
    /// Bad arguments, files or configuration.
    Invalid(String),
    Failed(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Invalid(m) => write!(f, "invalid input: {m}"),
            CliError::Failed(m) => write!(f, "{m}"),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Invalid(_) => ExitCode::from(EXIT_INVALID),
            CliError::Failed(_) => ExitCode::from(EXIT_FAILURE),
        }
    }
}

pub fn finish(r: Result<(), CliError>) -> ExitCode {
    match r {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Failed(e.to_string())
    }
}

impl From<ParseError> for CliError {
    fn from(e: ParseError) -> Self {
        CliError::Invalid(e.to_string())
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Io(m) => CliError::Failed(m),
            SimError::Optimizer(OptimizerError::NumericalFailure) => CliError::Failed(e.to_string()),
            other => CliError::Invalid(other.to_string()),
        }
    }
}

macro_rules! invalid_from {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Invalid(e.to_string())
            }
        }
    )*};
}

invalid_from!(GraphError, ProxyError, MonitorError, DiscrepancyError, SpectralError);

/// Per-band thresholds as written in a TOML file, with an optional
/// `[reduced]` table for Kron-reduced broadcasts.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdFile {
    pub small: f64,
    pub mid: f64,
    pub large: f64,
    pub reduced: Option<Thresholds>,
}

impl ThresholdFile {
    pub fn apply(&self, config: &mut DiscrepancyConfig) {
        config.thresholds = Thresholds {
            small: self.small,
            mid: self.mid,
            large: self.large,
        };
        config.reduced_thresholds = self.reduced;
    }
}

/// Optional run settings, read from a TOML file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    pub strategy: Option<Strategy>,
    pub oracle: Option<ServerOracle>,
    pub thresholds: Option<ThresholdFile>,
    /// Derive thresholds from a drift-free rehearsal of the scenario.
    pub calibrate: Option<bool>,
    pub threshold_floor: Option<f64>,
    pub radius: Option<f64>,
    pub mid_hops: Option<usize>,
    pub squared_distance: Option<bool>,
    pub sequential: Option<bool>,
}

pub fn read_toml<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))
}
