use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::oracle::{Server, ServerOracle};
use super::scenario::{generate_scenario, RobotData, Scenario, ScenarioData};
use super::SimError;
use crate::discrepancy::{
    analyze, band_stats, baseline_constraints, calibrate_thresholds, generate_constraints, robot_proxy_nodes,
    upsert_constraints, AuditLog, AuditRecord, DiscrepancyConfig, PerBand, Thresholds, UpsertReport,
    DEFAULT_UPDATE_ROTATION, DEFAULT_UPDATE_TRANSLATION,
};
use crate::monitor::{make_broadcast_with, synchronize, BroadcastPayload, MonitorConfig};
use crate::optimizer::{optimize_with, LmSettings, OptimizationProblem};
use crate::par::{self, Exec};
use crate::posegraph::{rmse_ate, rmse_ate_robot, ConstraintKind, Information, Pose, PoseGraph, PoseNode, RelativeConstraint};

/// How robots react to a broadcast.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Spectral discrepancy detection with sparse corrections.
    #[default]
    Proposed,
    /// One correction per matched node, no detection.
    Baseline,
    /// Run detection and record statistics, but never correct.
    Observe,
    /// Ignore broadcasts entirely.
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    pub oracle: ServerOracle,
    pub monitor: MonitorConfig,
    pub discrepancy: DiscrepancyConfig,
    pub strategy: Strategy,
    /// Epoch limit; `None` runs the whole scenario.
    pub epochs: Option<usize>,
    pub lm: LmSettings,
    pub update_translation: f64,
    pub update_rotation: f64,
    pub exec: Exec,
}

/// Lower bound on calibrated thresholds, meters.
pub const DEFAULT_THRESHOLD_FLOOR: f64 = 0.01;

/// Uncertainty of corrections measured on the oracle map. Its orientations
/// are exact, so rotations are trusted far more than the library default.
pub fn oracle_correction_information() -> Information {
    Information::isotropic(0.1, 0.005)
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            oracle: ServerOracle::default(),
            monitor: MonitorConfig::default(),
            discrepancy: DiscrepancyConfig {
                information: oracle_correction_information(),
                ..DiscrepancyConfig::default()
            },
            strategy: Strategy::default(),
            epochs: None,
            lm: LmSettings::default(),
            update_translation: DEFAULT_UPDATE_TRANSLATION,
            update_rotation: DEFAULT_UPDATE_ROTATION,
            exec: Exec::default(),
        }
    }
}

/// One robot in one epoch.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct EpochRow {
    pub epoch: u64,
    pub robot: u32,
    pub time_s: f64,
    pub nodes: usize,
    pub bytes_up: usize,
    pub bytes_down: usize,
    pub matched: usize,
    pub triggered: usize,
    pub added: usize,
    pub updated: usize,
    pub skipped: usize,
    pub correction_factors: usize,
    pub odometry_factors: usize,
    pub rmse_uncorrected: f64,
    pub rmse_corrected: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct BroadcastRow {
    pub epoch: u64,
    pub server_nodes: usize,
    pub server_factors: usize,
    pub full_nodes: usize,
    pub nodes: usize,
    pub full_bytes: usize,
    pub bytes: usize,
    pub reduced: bool,
    pub server_rmse: f64,
}

/// Final per-robot figures.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobotSummary {
    pub robot: u32,
    pub nodes: usize,
    pub rmse_uncorrected: f64,
    pub rmse_corrected: f64,
    pub added: usize,
    pub updated: usize,
    pub skipped: usize,
    pub correction_factors: usize,
    pub odometry_factors: usize,
    pub bytes_up: usize,
    pub bytes_down: usize,
}

/// Accumulated wall time per stage, milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct StageTimings {
    pub server_ms: f64,
    pub broadcast_ms: f64,
    pub discrepancy_ms: f64,
    pub optimize_ms: f64,
    pub total_ms: f64,
}

/// Everything measured during a run. Equality ignores wall times, which
/// are the only nondeterministic part.
#[derive(Debug, Clone, Serialize)]
pub struct RunMetrics {
    pub scenario: String,
    pub seed: u64,
    pub strategy: Strategy,
    pub rows: Vec<EpochRow>,
    pub broadcasts: Vec<BroadcastRow>,
    pub robots: Vec<RobotSummary>,
    pub server_rmse: f64,
    pub timings: StageTimings,
}

impl PartialEq for RunMetrics {
    fn eq(&self, o: &Self) -> bool {
        self.scenario == o.scenario
            && self.seed == o.seed
            && self.strategy == o.strategy
            && self.rows == o.rows
            && self.broadcasts == o.broadcasts
            && self.robots == o.robots
            && self.server_rmse.to_bits() == o.server_rmse.to_bits()
    }
}

impl RunMetrics {
    pub fn total_added(&self) -> usize {
        self.robots.iter().map(|r| r.added).sum()
    }

    pub fn total_nodes(&self) -> usize {
        self.robots.iter().map(|r| r.nodes).sum()
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub metrics: RunMetrics,
    /// Final onboard graphs, odometry plus corrections, by robot id.
    pub onboard: Vec<PoseGraph>,
    pub server: PoseGraph,
    pub audit: AuditLog,
    /// Band statistics of every compared pair against a full broadcast,
    /// when detection ran.
    pub band_samples: Vec<PerBand<f64>>,
    /// The same against Kron-reduced broadcasts.
    pub reduced_band_samples: Vec<PerBand<f64>>,
}

struct Robot<'a> {
    data: &'a RobotData,
    released: usize,
    uploaded: usize,
    /// Odometry edges and current estimates.
    onboard: PoseGraph,
    corrections: Vec<RelativeConstraint>,
    totals: UpsertReport,
    bytes_up: usize,
    bytes_down: usize,
}

impl<'a> Robot<'a> {
    fn new(data: &'a RobotData) -> Self {
        Self {
            data,
            released: 0,
            uploaded: 0,
            onboard: PoseGraph::new("world"),
            corrections: Vec::new(),
            totals: UpsertReport::default(),
            bytes_up: 0,
            bytes_down: 0,
        }
    }

    fn id(&self) -> u32 {
        self.data.robot_id
    }

    /// Appends odometry up to `until_ns`, dead-reckoning from the current
    /// estimate of the previous node.
    fn advance(&mut self, until_ns: i64) -> Result<(), SimError> {
        let odo = &self.data.odometry;
        while self.released < odo.len() && odo.nodes()[self.released].timestamp < until_ns {
            let k = self.released;
            let mut node = odo.nodes()[k];
            if k > 0 {
                let e = &odo.edges()[k - 1];
                let prev = self.onboard.nodes()[k - 1].pose;
                node.pose = prev.compose(&e.measurement);
                self.onboard.add_node(node)?;
                self.onboard.add_edge(*e)?;
            } else {
                self.onboard.add_node(node)?;
            }
            self.released += 1;
        }
        Ok(())
    }

    fn pending_upload(&self) -> (&[PoseNode], &[RelativeConstraint], &[PoseNode]) {
        let nodes = &self.data.odometry.nodes()[self.uploaded..self.released];
        let e0 = self.uploaded.saturating_sub(1);
        let e1 = self.released.saturating_sub(1);
        let edges = &self.data.odometry.edges()[e0.min(e1)..e1];
        let truth = &self.data.ground_truth.nodes()[self.uploaded..self.released];
        (nodes, edges, truth)
    }

    fn ground_truth_so_far(&self) -> PoseGraph {
        let mut g = PoseGraph::new("world");
        for n in &self.data.ground_truth.nodes()[..self.released] {
            g.add_node(*n).expect("ground truth is valid");
        }
        g
    }

    /// What `advance` would have produced without any corrections.
    fn uncorrected_so_far(&self) -> PoseGraph {
        let odo = &self.data.odometry;
        let mut g = PoseGraph::new("world");
        let mut pose = Pose::identity();
        for (k, n) in odo.nodes()[..self.released].iter().enumerate() {
            pose = if k == 0 { n.pose } else { pose.compose(&odo.edges()[k - 1].measurement) };
            g.add_node(PoseNode { pose, ..*n }).expect("odometry is valid");
        }
        g
    }

    fn full_graph(&self) -> PoseGraph {
        let mut g = self.onboard.clone();
        g.extend_edges(self.corrections.iter().copied()).expect("corrections reference known nodes");
        g
    }
}

/// Binary size of an upload: nodes and odometry edges, little-endian.
pub fn encode_upload(nodes: &[PoseNode], edges: &[RelativeConstraint]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(b"GSU1");
    out.extend_from_slice(&(nodes.len() as u32).to_le_bytes());
    for n in nodes {
        out.extend_from_slice(&n.node_id.to_le_bytes());
        out.extend_from_slice(&n.robot_id.to_le_bytes());
        out.extend_from_slice(&n.submap_id.to_le_bytes());
        out.extend_from_slice(&n.timestamp.to_le_bytes());
        put_pose(&mut out, &n.pose);
    }
    out.extend_from_slice(&(edges.len() as u32).to_le_bytes());
    for e in edges {
        out.extend_from_slice(&e.from_id.to_le_bytes());
        out.extend_from_slice(&e.to_id.to_le_bytes());
        out.push(ConstraintKind::ALL.iter().position(|&k| k == e.kind).unwrap_or(0) as u8);
        put_pose(&mut out, &e.measurement);
        for v in e.information.upper_triangle() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

fn put_pose(out: &mut Vec<u8>, p: &crate::posegraph::Pose) {
    for v in p.translation.iter().chain(p.quaternion_wxyz().iter()) {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

/// What one robot did with one broadcast.
#[derive(Default)]
struct Reaction {
    matched: usize,
    triggered: usize,
    constraints: Vec<RelativeConstraint>,
    samples: Vec<PerBand<f64>>,
    verdict_log: Vec<AuditRecord>,
}

fn react(
    robot: &Robot,
    payload: &BroadcastPayload,
    reduced: bool,
    epoch: u64,
    config: &RunConfig,
    exec: Exec,
) -> Result<Reaction, SimError> {
    let id = robot.id();
    let discrepancy = config.discrepancy.for_broadcast(reduced);
    match config.strategy {
        Strategy::Off => Ok(Reaction::default()),
        Strategy::Baseline => {
            let nodes = robot_proxy_nodes(&robot.onboard, id);
            let corr = match synchronize(payload, &nodes, id, config.discrepancy.sync_tolerance_ns) {
                Ok(c) => c,
                Err(_) => return Ok(Reaction::default()),
            };
            let constraints = baseline_constraints(&robot.onboard, id, payload, &corr, config.discrepancy.information)?;
            Ok(Reaction {
                matched: corr.len(),
                constraints,
                ..Default::default()
            })
        }
        Strategy::Proposed | Strategy::Observe => {
            let analysis = match analyze(payload, &robot.onboard, id, &discrepancy, exec) {
                Ok(a) => a,
                Err(crate::discrepancy::DiscrepancyError::Monitor(_)) => return Ok(Reaction::default()),
                Err(e) => return Err(e.into()),
            };
            let samples = analysis.distances.iter().map(band_stats).collect();
            let node_ids: Vec<_> = robot.onboard.robot_nodes(id).map(|n| n.node_id).collect();
            let verdict_log = analysis
                .verdicts
                .iter()
                .map(|v| AuditRecord::Verdict {
                    epoch,
                    robot: id,
                    server_index: v.server_index,
                    robot_node: node_ids[v.robot_index],
                    bands: v.bands.iter().collect(),
                    stats: v.stats,
                })
                .collect();
            let constraints = if config.strategy == Strategy::Proposed {
                generate_constraints(
                    &analysis.verdicts,
                    &robot.full_graph(),
                    id,
                    payload,
                    &analysis.correspondence,
                    &discrepancy,
                )?
            } else {
                Vec::new()
            };
            Ok(Reaction {
                matched: analysis.correspondence.len(),
                triggered: analysis.verdicts.len(),
                constraints,
                samples,
                verdict_log,
            })
        }
    }
}

/// Runs the closed loop over a generated scenario.
pub fn run_epochs(data: &ScenarioData, config: &RunConfig) -> Result<RunOutput, SimError> {
    let start = Instant::now();
    let scenario = &data.scenario;
    config.discrepancy.validate()?;
    config.oracle.validate()?;
    let epochs = config.epochs.unwrap_or(scenario.epoch_count());
    let exec = config.exec;

    let mut robots: Vec<Robot> = data.robots.iter().map(Robot::new).collect();
    let mut server = Server::new(config.oracle, scenario.seed, config.lm, exec);
    let mut drops = ChaCha8Rng::seed_from_u64(scenario.seed ^ 0xd409_0000_0000_0000);
    let mut audit = AuditLog::default();
    let mut samples = Vec::new();
    let mut reduced_samples = Vec::new();
    let mut rows = Vec::new();
    let mut broadcasts = Vec::new();
    let mut timings = StageTimings::default();

    for epoch in 0..epochs as u64 {
        let until_ns = ((epoch + 1) as f64 * scenario.epoch_period_s * 1e9).round() as i64;

        let mut up = vec![0; robots.len()];
        let t = Instant::now();
        for (i, r) in robots.iter_mut().enumerate() {
            r.advance(until_ns)?;
            let dropped = drops.random::<f64>() < scenario.drop_probability;
            if dropped || r.uploaded == r.released {
                continue;
            }
            let (nodes, edges, truth) = r.pending_upload();
            up[i] = encode_upload(nodes, edges).len();
            server.ingest(nodes, edges, truth)?;
            r.uploaded = r.released;
            r.bytes_up += up[i];
        }
        server.update()?;
        timings.server_ms += t.elapsed().as_secs_f64() * 1e3;

        let t = Instant::now();
        let broadcast = if server.graph().is_empty() {
            None
        } else {
            Some(make_broadcast_with(server.graph(), epoch, &config.monitor, exec)?)
        };
        timings.broadcast_ms += t.elapsed().as_secs_f64() * 1e3;
        let server_rmse = server_rmse(server.graph(), &robots);
        if let Some(b) = &broadcast {
            broadcasts.push(BroadcastRow {
                epoch,
                server_nodes: server.graph().len(),
                server_factors: server.graph().edges().len(),
                full_nodes: b.full_nodes,
                nodes: b.payload.proxy.len(),
                full_bytes: b.full_bytes,
                bytes: b.bytes,
                reduced: b.reduced,
                server_rmse,
            });
        }

        let delivered: Vec<bool> = robots
            .iter()
            .map(|_| broadcast.is_some() && drops.random::<f64>() >= scenario.drop_probability)
            .collect();
        let t = Instant::now();
        let reactions: Vec<Result<Reaction, SimError>> = match &broadcast {
            Some(b) => {
                let idx: Vec<usize> = (0..robots.len()).collect();
                par::map(exec, &idx, |&i| {
                    if delivered[i] && !robots[i].onboard.is_empty() {
                        react(&robots[i], &b.payload, b.reduced, epoch, config, Exec::Sequential)
                    } else {
                        Ok(Reaction::default())
                    }
                })
            }
            None => robots.iter().map(|_| Ok(Reaction::default())).collect(),
        };
        timings.discrepancy_ms += t.elapsed().as_secs_f64() * 1e3;

        for ((i, r), reaction) in robots.iter_mut().enumerate().zip(reactions) {
            let reaction = reaction?;
            let down = match (&broadcast, delivered[i]) {
                (Some(b), true) => b.bytes,
                _ => 0,
            };
            r.bytes_down += down;
            if broadcast.as_ref().is_some_and(|b| b.reduced) {
                reduced_samples.extend(reaction.samples);
            } else {
                samples.extend(reaction.samples);
            }
            for rec in &reaction.verdict_log {
                audit.push(rec);
            }
            let (merged, report) = upsert_constraints(
                &r.corrections,
                &reaction.constraints,
                config.update_translation,
                config.update_rotation,
            );
            if report.added + report.updated > 0 {
                for c in merged.iter().skip(r.corrections.len()) {
                    audit.constraint(epoch, r.id(), c);
                }
                r.corrections = merged;
                let t = Instant::now();
                let problem = OptimizationProblem {
                    graph: r.full_graph(),
                    gauge: r.onboard.nodes()[0].node_id,
                    settings: config.lm,
                };
                let (solved, _) = optimize_with(&problem, exec)?;
                for (k, n) in solved.nodes().iter().enumerate() {
                    r.onboard.set_pose(n.node_id, n.pose).expect("same nodes");
                    debug_assert_eq!(r.onboard.nodes()[k].node_id, n.node_id);
                }
                timings.optimize_ms += t.elapsed().as_secs_f64() * 1e3;
            }
            if !reaction.constraints.is_empty() || report != UpsertReport::default() {
                audit.push(&AuditRecord::Upsert {
                    epoch,
                    robot: r.id(),
                    report,
                });
            }
            r.totals += report;

            let truth = r.ground_truth_so_far();
            rows.push(EpochRow {
                epoch,
                robot: r.id(),
                time_s: until_ns as f64 * 1e-9,
                nodes: r.onboard.len(),
                bytes_up: up[i],
                bytes_down: down,
                matched: reaction.matched,
                triggered: reaction.triggered,
                added: report.added,
                updated: report.updated,
                skipped: report.skipped,
                correction_factors: r.corrections.len(),
                odometry_factors: r.onboard.edges().len(),
                rmse_uncorrected: rmse_or_zero(&r.uncorrected_so_far(), &truth, r.id()),
                rmse_corrected: rmse_or_zero(&r.onboard, &truth, r.id()),
            });
        }
    }

    let summaries = robots
        .iter()
        .map(|r| {
            let truth = r.ground_truth_so_far();
            RobotSummary {
                robot: r.id(),
                nodes: r.onboard.len(),
                rmse_uncorrected: rmse_or_zero(&r.uncorrected_so_far(), &truth, r.id()),
                rmse_corrected: rmse_or_zero(&r.onboard, &truth, r.id()),
                added: r.totals.added,
                updated: r.totals.updated,
                skipped: r.totals.skipped,
                correction_factors: r.corrections.len(),
                odometry_factors: r.onboard.edges().len(),
                bytes_up: r.bytes_up,
                bytes_down: r.bytes_down,
            }
        })
        .collect();
    timings.total_ms = start.elapsed().as_secs_f64() * 1e3;
    let metrics = RunMetrics {
        scenario: scenario.name.clone(),
        seed: scenario.seed,
        strategy: config.strategy,
        rows,
        broadcasts,
        robots: summaries,
        server_rmse: server_rmse(server.graph(), &robots),
        timings,
    };
    Ok(RunOutput {
        metrics,
        onboard: robots.iter().map(|r| r.full_graph()).collect(),
        server: server.graph().clone(),
        audit,
        band_samples: samples,
        reduced_band_samples: reduced_samples,
    })
}

fn rmse_or_zero(estimate: &PoseGraph, truth: &PoseGraph, robot: u32) -> f64 {
    rmse_ate_robot(estimate, truth, robot).unwrap_or(0.0)
}

fn server_rmse(server: &PoseGraph, robots: &[Robot]) -> f64 {
    let mut truth = PoseGraph::new("world");
    for r in robots {
        for n in &r.data.ground_truth.nodes()[..r.uploaded] {
            truth.add_node(*n).expect("ground truth is valid");
        }
    }
    rmse_ate(server, &truth).unwrap_or(0.0)
}

/// Thresholds learned from a drift-free rehearsal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub thresholds: Thresholds,
    /// `None` when the rehearsal saw no reduced broadcast.
    pub reduced_thresholds: Option<Thresholds>,
}

impl Calibration {
    pub fn apply(&self, config: &mut DiscrepancyConfig) {
        config.thresholds = self.thresholds;
        config.reduced_thresholds = self.reduced_thresholds;
    }
}

/// Per-band thresholds from a drift-free run of the same scenario: `μ + 3σ`
/// of the band statistics, never below `floor`. Full and Kron-reduced
/// broadcasts are calibrated separately.
pub fn calibrate(scenario: &Scenario, config: &RunConfig, floor: f64) -> Result<Calibration, SimError> {
    let data = generate_scenario(&scenario.drift_free())?;
    let observe = RunConfig {
        strategy: Strategy::Observe,
        ..*config
    };
    let out = run_epochs(&data, &observe)?;
    Ok(Calibration {
        thresholds: calibrate_thresholds(&out.band_samples, floor),
        reduced_thresholds: (!out.reduced_band_samples.is_empty())
            .then(|| calibrate_thresholds(&out.reduced_band_samples, floor)),
    })
}
