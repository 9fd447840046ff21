//! SE(3) pose-graph data model shared by robots and the server.

mod ate;
mod graph;
mod io;
mod pose;

pub use ate::{align_rigid, rmse_ate, rmse_ate_robot, rms, NoCommonNodes, RigidAlignment};
pub use graph::{ConstraintKind, Information, NodeId, PoseGraph, PoseNode, RelativeConstraint};
pub use io::{parse_graph, read_graph, serialize_graph, write_graph, ParseError};
pub use pose::{compose, relative_pose, skew, so3_log, so3_right_jacobian_inv, Pose};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("duplicate node id {0}")]
    DuplicateNode(NodeId),
    #[error("unknown node id {0}")]
    UnknownNode(NodeId),
    #[error("constraint connects node {0} to itself")]
    SelfLoop(NodeId),
    #[error("invalid information matrix: {0}")]
    InvalidInformation(&'static str),
    #[error("timestamp of node {node_id} does not increase along robot {robot_id}")]
    NonMonotonicTimestamp { robot_id: u32, node_id: NodeId },
}
