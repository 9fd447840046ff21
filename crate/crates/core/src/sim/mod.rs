//! Closed-loop multi-robot simulation: scenario generation, a server
//! oracle, the epoch loop and its reports.

mod oracle;
mod report;
mod run;
mod scenario;

pub use oracle::{OracleMode, Server, ServerOracle};
pub use report::{epochs_csv, broadcasts_csv, summary_text, write_report};
pub use run::{
    calibrate, encode_upload, Calibration, oracle_correction_information, run_epochs, BroadcastRow, EpochRow, RobotSummary, RunConfig, RunMetrics, RunOutput,
    StageTimings, Strategy, DEFAULT_THRESHOLD_FLOOR,
};
pub use scenario::{
    corridor, generate_scenario, node_id, rounded_loop, DriftModel, RobotData, Scenario, ScenarioData,
    Sigmas, StepFault, Trajectory, NODE_ID_STRIDE, PRESETS,
};

use thiserror::Error;

use crate::discrepancy::DiscrepancyError;
use crate::monitor::MonitorError;
use crate::optimizer::OptimizerError;
use crate::posegraph::GraphError;
use crate::proxy::ProxyError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    InvalidSpec(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Optimizer(#[from] OptimizerError),
    #[error(transparent)]
    Discrepancy(#[from] DiscrepancyError),
    #[error(transparent)]
    Monitor(#[from] MonitorError),
    #[error(transparent)]
    Proxy(#[from] ProxyError),
}

impl From<std::io::Error> for SimError {
    fn from(e: std::io::Error) -> Self {
        SimError::Io(e.to_string())
    }
}
