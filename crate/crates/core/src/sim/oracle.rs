use std::collections::HashMap;

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::SimError;
use crate::optimizer::{optimize_with, LmSettings, OptimizationProblem};
use crate::par::Exec;
use crate::posegraph::{ConstraintKind, Information, NodeId, Pose, PoseGraph, PoseNode, RelativeConstraint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleMode {
    /// Ground truth with i.i.d. position noise, fixed per node.
    GroundTruthNoisy,
    /// Received odometry plus synthetic loop closures, optimized.
    LoopClosed,
}

/// Stand-in for the server's globally optimized map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServerOracle {
    pub mode: OracleMode,
    /// Position noise in `ground_truth_noisy`, loop-closure translation
    /// noise in `loop_closed`; meters.
    pub sigma: f64,
    /// Revisit distance that produces a loop closure, meters.
    #[serde(default = "default_loop_radius")]
    pub loop_radius: f64,
    /// Minimum time between same-robot nodes for a loop closure, seconds.
    #[serde(default = "default_loop_separation")]
    pub loop_separation_s: f64,
    /// Only every `loop_stride`-th received node looks for a loop closure.
    #[serde(default = "default_loop_stride")]
    pub loop_stride: u64,
}

fn default_loop_radius() -> f64 {
    2.0
}

fn default_loop_separation() -> f64 {
    30.0
}

fn default_loop_stride() -> u64 {
    10
}

impl ServerOracle {
    pub fn ground_truth_noisy() -> Self {
        Self {
            mode: OracleMode::GroundTruthNoisy,
            sigma: 0.05,
            loop_radius: default_loop_radius(),
            loop_separation_s: default_loop_separation(),
            loop_stride: default_loop_stride(),
        }
    }

    pub fn loop_closed() -> Self {
        Self {
            mode: OracleMode::LoopClosed,
            sigma: 0.0,
            ..Self::ground_truth_noisy()
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(SimError::InvalidSpec(format!("oracle sigma must be nonnegative, got {}", self.sigma)));
        }
        if !(self.loop_radius > 0.0 && self.loop_separation_s >= 0.0 && self.loop_stride > 0) {
            return Err(SimError::InvalidSpec("invalid loop-closure parameters".into()));
        }
        Ok(())
    }
}

impl Default for ServerOracle {
    fn default() -> Self {
        Self::ground_truth_noisy()
    }
}

/// Loop closures use a tight, fixed uncertainty.
fn loop_information() -> Information {
    Information::isotropic(0.02, 0.005)
}

/// The server's multi-robot graph, maintained per oracle mode.
#[derive(Debug, Clone)]
pub struct Server {
    oracle: ServerOracle,
    seed: u64,
    exec: Exec,
    lm: LmSettings,
    graph: PoseGraph,
    truth: HashMap<NodeId, (Pose, u32, i64)>,
    /// First node of every robot seen so far.
    first: Vec<(u32, NodeId)>,
    last_report_ms: f64,
}

impl Server {
    pub fn new(oracle: ServerOracle, seed: u64, lm: LmSettings, exec: Exec) -> Self {
        Self {
            oracle,
            seed,
            exec,
            lm,
            graph: PoseGraph::new("world"),
            truth: HashMap::new(),
            first: Vec::new(),
            last_report_ms: 0.0,
        }
    }

    pub fn graph(&self) -> &PoseGraph {
        &self.graph
    }

    /// Wall time of the last server-side optimization, milliseconds.
    pub fn last_optimization_ms(&self) -> f64 {
        self.last_report_ms
    }

    fn noise(&self, id: NodeId) -> Vector3<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ 0x5eed_5e7e_0000_0000);
        rng.set_stream(id);
        let mut d = || -> f64 { StandardNormal.sample(&mut rng) };
        Vector3::new(d(), d(), d()) * self.oracle.sigma
    }

    /// Adds uploaded nodes and odometry edges. `truth` holds the matching
    /// ground-truth nodes.
    pub fn ingest(&mut self, nodes: &[PoseNode], edges: &[RelativeConstraint], truth: &[PoseNode]) -> Result<(), SimError> {
        for t in truth {
            self.truth.insert(t.node_id, (t.pose, t.robot_id, t.timestamp));
        }
        for n in nodes {
            let (gt, _, _) = self.truth[&n.node_id];
            let pose = match self.oracle.mode {
                OracleMode::GroundTruthNoisy => Pose::new(gt.translation + self.noise(n.node_id), gt.rotation),
                OracleMode::LoopClosed => self.initial_guess(n, edges, gt),
            };
            self.graph.add_node(PoseNode { pose, ..*n })?;
            if !self.first.iter().any(|&(r, _)| r == n.robot_id) {
                self.anchor(n.robot_id, n.node_id)?;
            }
        }
        for e in edges {
            self.graph.add_edge(*e)?;
        }
        if self.oracle.mode == OracleMode::LoopClosed {
            for n in nodes {
                self.close_loop(n.node_id)?;
            }
        }
        Ok(())
    }

    fn initial_guess(&self, n: &PoseNode, edges: &[RelativeConstraint], gt: Pose) -> Pose {
        edges
            .iter()
            .find(|e| e.to_id == n.node_id)
            .and_then(|e| self.graph.node(e.from_id).map(|p| p.pose.compose(&e.measurement)))
            .unwrap_or(gt)
    }

    /// Ties a robot's first node to the first robot's start, which is known.
    fn anchor(&mut self, robot: u32, id: NodeId) -> Result<(), SimError> {
        if let (Some(&(_, root)), OracleMode::LoopClosed) = (self.first.first(), self.oracle.mode) {
            let z = self.truth[&root].0.relative_to(&self.truth[&id].0);
            self.graph
                .add_edge(RelativeConstraint::new(root, id, z, loop_information(), ConstraintKind::LoopClosure)?)?;
        }
        self.first.push((robot, id));
        Ok(())
    }

    fn close_loop(&mut self, id: NodeId) -> Result<(), SimError> {
        if id % self.oracle.loop_stride != 0 {
            return Ok(());
        }
        let (pose, robot, t) = self.truth[&id];
        let min_dt = (self.oracle.loop_separation_s * 1e9) as i64;
        let mut best: Option<(f64, NodeId)> = None;
        for n in self.graph.nodes() {
            if n.node_id == id {
                continue;
            }
            let (other, r, ot) = self.truth[&n.node_id];
            let eligible = if r == robot { t - ot > min_dt } else { ot < t || (ot == t && n.node_id < id) };
            if !eligible {
                continue;
            }
            let d = (other.translation - pose.translation).norm();
            if d <= self.oracle.loop_radius && best.is_none_or(|(bd, bid)| (d, n.node_id) < (bd, bid)) {
                best = Some((d, n.node_id));
            }
        }
        if let Some((_, j)) = best {
            let mut z = self.truth[&j].0.relative_to(&pose);
            if self.oracle.sigma > 0.0 {
                z.translation += self.noise(id);
            }
            self.graph
                .add_edge(RelativeConstraint::new(j, id, z, loop_information(), ConstraintKind::LoopClosure)?)?;
        }
        Ok(())
    }

    /// Brings the server graph up to date after ingesting; a no-op in
    /// `ground_truth_noisy` mode.
    pub fn update(&mut self) -> Result<(), SimError> {
        if self.oracle.mode != OracleMode::LoopClosed || self.graph.is_empty() {
            return Ok(());
        }
        let problem = OptimizationProblem {
            graph: self.graph.clone(),
            gauge: self.first[0].1,
            settings: self.lm,
        };
        let (g, report) = optimize_with(&problem, self.exec)?;
        self.graph = g;
        self.last_report_ms = report.wall_time_ms;
        Ok(())
    }
}
