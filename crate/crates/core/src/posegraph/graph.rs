use std::collections::HashMap;
use std::fmt;

use nalgebra::Matrix6;

use super::pose::Pose;
use super::GraphError;

pub type NodeId = u64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseNode {
    pub node_id: NodeId,
    pub robot_id: u32,
    pub submap_id: u32,
    /// Nanoseconds since epoch.
    pub timestamp: i64,
    pub pose: Pose,
}

/// Provenance of a relative constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ConstraintKind {
    Odometry,
    LoopClosure,
    CorrectionAdjacent,
    CorrectionMidscale,
    CorrectionSubmap,
}

impl ConstraintKind {
    pub const ALL: [ConstraintKind; 5] = [
        ConstraintKind::Odometry,
        ConstraintKind::LoopClosure,
        ConstraintKind::CorrectionAdjacent,
        ConstraintKind::CorrectionMidscale,
        ConstraintKind::CorrectionSubmap,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ConstraintKind::Odometry => "odometry",
            ConstraintKind::LoopClosure => "loop_closure",
            ConstraintKind::CorrectionAdjacent => "correction_adjacent",
            ConstraintKind::CorrectionMidscale => "correction_midscale",
            ConstraintKind::CorrectionSubmap => "correction_submap",
        }
    }

    pub fn is_correction(self) -> bool {
        matches!(
            self,
            ConstraintKind::CorrectionAdjacent
                | ConstraintKind::CorrectionMidscale
                | ConstraintKind::CorrectionSubmap
        )
    }
}

impl fmt::Display for ConstraintKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ConstraintKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ConstraintKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown constraint kind `{s}`"))
    }
}

/// 6×6 information matrix, translation block first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Information(Matrix6<f64>);

impl Information {
    pub fn new(m: Matrix6<f64>) -> Result<Self, GraphError> {
        for i in 0..6 {
            for j in (i + 1)..6 {
                if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 {
                    return Err(GraphError::InvalidInformation("not symmetric"));
                }
            }
        }
        if !m.iter().all(|v| v.is_finite()) || m.cholesky().is_none() {
            return Err(GraphError::InvalidInformation("not positive definite"));
        }
        Ok(Self(m))
    }

    /// `1/σt²` on the translation block and `1/σr²` on the rotation block.
    pub fn isotropic(sigma_translation: f64, sigma_rotation: f64) -> Self {
        let t = 1.0 / (sigma_translation * sigma_translation);
        let r = 1.0 / (sigma_rotation * sigma_rotation);
        Self(Matrix6::from_diagonal(&nalgebra::Vector6::new(t, t, t, r, r, r)))
    }

    /// Default weighting for correction constraints: σt = 0.1 m, σr = 0.05 rad.
    pub fn correction_default() -> Self {
        Self::isotropic(0.1, 0.05)
    }

    pub fn matrix(&self) -> &Matrix6<f64> {
        &self.0
    }

    /// The 21 upper-triangular entries, row-major.
    pub fn upper_triangle(&self) -> [f64; 21] {
        let mut out = [0.0; 21];
        let mut k = 0;
        for i in 0..6 {
            for j in i..6 {
                out[k] = self.0[(i, j)];
                k += 1;
            }
        }
        out
    }

    pub fn from_upper_triangle(v: &[f64; 21]) -> Result<Self, GraphError> {
        let mut m = Matrix6::zeros();
        let mut k = 0;
        for i in 0..6 {
            for j in i..6 {
                m[(i, j)] = v[k];
                m[(j, i)] = v[k];
                k += 1;
            }
        }
        Self::new(m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelativeConstraint {
    pub from_id: NodeId,
    pub to_id: NodeId,
    /// Transform of `to` expressed in the frame of `from`.
    pub measurement: Pose,
    pub information: Information,
    pub kind: ConstraintKind,
}

impl RelativeConstraint {
    pub fn new(
        from_id: NodeId,
        to_id: NodeId,
        measurement: Pose,
        information: Information,
        kind: ConstraintKind,
    ) -> Result<Self, GraphError> {
        if from_id == to_id {
            return Err(GraphError::SelfLoop(from_id));
        }
        Ok(Self {
            from_id,
            to_id,
            measurement,
            information,
            kind,
        })
    }
}

/// Timestamped SE(3) poses connected by relative constraints.
///
/// Node ids are unique and every edge endpoint resolves to a node. Nodes of
/// one robot appear in strictly increasing timestamp order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PoseGraph {
    frame_id: String,
    nodes: Vec<PoseNode>,
    edges: Vec<RelativeConstraint>,
    index: HashMap<NodeId, usize>,
}

impl PoseGraph {
    pub fn new(frame_id: impl Into<String>) -> Self {
        Self {
            frame_id: frame_id.into(),
            ..Default::default()
        }
    }

    pub fn frame_id(&self) -> &str {
        &self.frame_id
    }

    pub fn nodes(&self) -> &[PoseNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[RelativeConstraint] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn index_of(&self, id: NodeId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn node(&self, id: NodeId) -> Option<&PoseNode> {
        self.index_of(id).map(|i| &self.nodes[i])
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.index.contains_key(&id)
    }

    pub fn add_node(&mut self, node: PoseNode) -> Result<(), GraphError> {
        if self.index.contains_key(&node.node_id) {
            return Err(GraphError::DuplicateNode(node.node_id));
        }
        if let Some(last) = self
            .nodes
            .iter()
            .rev()
            .find(|n| n.robot_id == node.robot_id)
        {
            if node.timestamp <= last.timestamp {
                return Err(GraphError::NonMonotonicTimestamp {
                    robot_id: node.robot_id,
                    node_id: node.node_id,
                });
            }
        }
        self.index.insert(node.node_id, self.nodes.len());
        self.nodes.push(node);
        Ok(())
    }

    pub fn add_edge(&mut self, edge: RelativeConstraint) -> Result<(), GraphError> {
        for id in [edge.from_id, edge.to_id] {
            if !self.index.contains_key(&id) {
                return Err(GraphError::UnknownNode(id));
            }
        }
        if edge.from_id == edge.to_id {
            return Err(GraphError::SelfLoop(edge.from_id));
        }
        self.edges.push(edge);
        Ok(())
    }

    pub fn extend_edges(
        &mut self,
        edges: impl IntoIterator<Item = RelativeConstraint>,
    ) -> Result<(), GraphError> {
        for e in edges {
            self.add_edge(e)?;
        }
        Ok(())
    }

    /// Removes every edge for which `keep` returns false.
    pub fn retain_edges(&mut self, keep: impl FnMut(&RelativeConstraint) -> bool) {
        self.edges.retain(keep);
    }

    /// Copy of this graph with node poses replaced, in node order.
    pub fn with_poses(&self, poses: &[Pose]) -> Self {
        assert_eq!(poses.len(), self.nodes.len(), "pose count mismatch");
        let mut g = self.clone();
        for (n, p) in g.nodes.iter_mut().zip(poses) {
            n.pose = *p;
        }
        g
    }

    pub fn set_pose(&mut self, id: NodeId, pose: Pose) -> Result<(), GraphError> {
        let i = self.index_of(id).ok_or(GraphError::UnknownNode(id))?;
        self.nodes[i].pose = pose;
        Ok(())
    }

    pub fn robot_ids(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = self.nodes.iter().map(|n| n.robot_id).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    /// Nodes of one robot in chronological order.
    pub fn robot_nodes(&self, robot_id: u32) -> impl Iterator<Item = &PoseNode> {
        self.nodes.iter().filter(move |n| n.robot_id == robot_id)
    }

    pub fn count_edges(&self, kind: ConstraintKind) -> usize {
        self.edges.iter().filter(|e| e.kind == kind).count()
    }
}
