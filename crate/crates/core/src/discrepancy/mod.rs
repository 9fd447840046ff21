//! Discrepancy detection between a robot's onboard graph and the server
//! broadcast, and the corrective constraints derived from it.

mod audit;
mod bands;
mod constraints;
mod signal;

pub use audit::{AuditRecord, AuditLog};
pub use bands::{band_of_scale, band_stats, calibrate_thresholds, classify, Band, BandSet, DiscrepancyVerdict, PerBand, Thresholds};
pub use constraints::{
    baseline_constraints, generate_constraints, upsert_constraints, UpsertReport, DEFAULT_UPDATE_ROTATION,
    DEFAULT_UPDATE_TRANSLATION,
};
pub use signal::{
    comparison_graphs, comparison_signal, robot_proxy_nodes, scale_distances, ComparisonSignal, ScaleDistance,
    Side,
};

use thiserror::Error;

use crate::monitor::{synchronize, BroadcastPayload, Correspondence, MonitorError, DEFAULT_SYNC_TOLERANCE_NS};
use crate::par::Exec;
use crate::posegraph::{Information, PoseGraph};
use crate::proxy::{laplacian, ProxyError, ProxyParams};
use crate::spectral::{eigendecompose, wavelet_features_with, FilterBank, SpectralError, DEFAULT_SCALE_COUNT};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiscrepancyError {
    #[error("feature lists disagree: expected {expected} entries, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("server orientations are missing from the broadcast")]
    MissingAuxiliary,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Monitor(#[from] MonitorError),
    #[error(transparent)]
    Proxy(#[from] ProxyError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscrepancyConfig {
    pub proxy: ProxyParams,
    pub sync_tolerance_ns: i64,
    pub scale_count: usize,
    pub thresholds: Thresholds,
    /// Replaces `thresholds` for Kron-reduced broadcasts, whose sparser
    /// comparison graphs are noisier. `None` keeps the same levels.
    pub reduced_thresholds: Option<Thresholds>,
    /// Half-width, in correspondence hops, of mid-band constraints.
    pub mid_hops: usize,
    /// Number of nearest submaps linked by a large-band trigger.
    pub submap_neighbors: usize,
    /// Keep only the strongest trigger per band within each submap.
    pub peak_per_submap: bool,
    pub information: Information,
}

impl Default for DiscrepancyConfig {
    fn default() -> Self {
        Self {
            proxy: ProxyParams::default(),
            sync_tolerance_ns: DEFAULT_SYNC_TOLERANCE_NS,
            scale_count: DEFAULT_SCALE_COUNT,
            thresholds: Thresholds::default(),
            reduced_thresholds: None,
            mid_hops: 5,
            submap_neighbors: 4,
            peak_per_submap: true,
            information: Information::correction_default(),
        }
    }
}

impl DiscrepancyConfig {
    pub fn validate(&self) -> Result<(), DiscrepancyError> {
        self.proxy.validate()?;
        if self.scale_count < 3 {
            return Err(DiscrepancyError::InvalidConfig("at least 3 scales are needed".into()));
        }
        if self.mid_hops == 0 {
            return Err(DiscrepancyError::InvalidConfig("mid_hops must be positive".into()));
        }
        if self.sync_tolerance_ns < 0 {
            return Err(DiscrepancyError::InvalidConfig("negative sync tolerance".into()));
        }
        if let Some(t) = &self.reduced_thresholds {
            t.validate()?;
        }
        self.thresholds.validate()
    }

    /// The config to analyze a broadcast with: reduced broadcasts use
    /// `reduced_thresholds` when set.
    pub fn for_broadcast(&self, reduced: bool) -> DiscrepancyConfig {
        match (reduced, self.reduced_thresholds) {
            (true, Some(t)) => DiscrepancyConfig {
                thresholds: t,
                ..*self
            },
            _ => *self,
        }
    }
}

/// Everything the robot learns from one broadcast.
#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub correspondence: Correspondence,
    pub distances: Vec<ScaleDistance>,
    pub verdicts: Vec<DiscrepancyVerdict>,
}

/// Synchronizes, builds both comparison graphs and signals, and computes
/// scale-wise distances and verdicts for one robot.
pub fn analyze(
    payload: &BroadcastPayload,
    robot_graph: &PoseGraph,
    robot_id: u32,
    config: &DiscrepancyConfig,
    exec: Exec,
) -> Result<Analysis, DiscrepancyError> {
    config.validate()?;
    let robot_nodes = robot_proxy_nodes(robot_graph, robot_id);
    let corr = synchronize(payload, &robot_nodes, robot_id, config.sync_tolerance_ns)?;
    let (server_graph, robot_graph_c) = comparison_graphs(payload, &robot_nodes, &corr, &config.proxy, exec)?;
    let f = comparison_signal(payload.proxy.nodes(), &corr, Side::Server);
    let h = comparison_signal(&robot_nodes, &corr, Side::Robot);

    let server_basis = eigendecompose(&laplacian(&server_graph))?;
    let robot_basis = eigendecompose(&laplacian(&robot_graph_c))?;
    let lambda_max = server_basis.lambda_max().max(robot_basis.lambda_max());
    if lambda_max <= 0.0 {
        // a single node or no edges: nothing to compare at any scale
        return Ok(Analysis {
            correspondence: corr,
            distances: Vec::new(),
            verdicts: Vec::new(),
        });
    }
    let bank = FilterBank::meyer(lambda_max, config.scale_count)?;
    let server_feats = wavelet_features_with(&server_basis, &bank, &f.values, exec)?;
    let robot_feats = wavelet_features_with(&robot_basis, &bank, &h.values, exec)?;
    let distances = scale_distances(&server_feats, &robot_feats, &corr)?;
    let verdicts = distances
        .iter()
        .enumerate()
        .filter_map(|(k, d)| {
            let v = classify(k, d, &config.thresholds);
            (!v.bands.is_empty()).then_some(v)
        })
        .collect();
    Ok(Analysis {
        correspondence: corr,
        distances,
        verdicts,
    })
}
