use super::DiscrepancyError;
use crate::monitor::{BroadcastPayload, Correspondence};
use crate::par::Exec;
use crate::posegraph::PoseGraph;
use crate::proxy::{build_from_proxy_nodes, ProxyGraph, ProxyNode, ProxyParams};
use crate::spectral::WaveletFeature;

/// Which end of a correspondence a graph belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Server,
    Robot,
}

impl Side {
    fn pick(self, pair: (usize, usize)) -> usize {
        match self {
            Side::Server => pair.0,
            Side::Robot => pair.1,
        }
    }
}

/// Distance to the origin per correspondence pair, in that side's own frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonSignal {
    pub values: Vec<f64>,
}

/// Per-scale coefficient differences at one correspondence pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleDistance {
    pub server_index: usize,
    pub robot_index: usize,
    /// One entry per scale, largest scale first.
    pub distances: Vec<f64>,
}

/// The robot's own nodes as proxy nodes, indexed in graph order.
pub fn robot_proxy_nodes(g: &PoseGraph, robot_id: u32) -> Vec<ProxyNode> {
    g.robot_nodes(robot_id)
        .enumerate()
        .map(|(i, n)| ProxyNode::from_pose_node(i, n))
        .collect()
}

/// Distance of each matched node to the origin, ordered like the pairs.
///
/// The origin is the chronologically first matched node on this side, so
/// both sides measure from the same physical node.
pub fn comparison_signal(nodes: &[ProxyNode], corr: &Correspondence, side: Side) -> ComparisonSignal {
    let Some(origin) = corr
        .pairs
        .iter()
        .map(|&p| side.pick(p))
        .min_by_key(|&i| (nodes[i].timestamp, i))
    else {
        return ComparisonSignal { values: Vec::new() };
    };
    let o = nodes[origin].position;
    ComparisonSignal {
        values: corr
            .pairs
            .iter()
            .map(|&p| (nodes[side.pick(p)].position - o).norm())
            .collect(),
    }
}

/// Proxy graphs over the matched nodes only, in pair order, for the server
/// and the robot side.
pub fn comparison_graphs(
    payload: &BroadcastPayload,
    robot_nodes: &[ProxyNode],
    corr: &Correspondence,
    params: &ProxyParams,
    exec: Exec,
) -> Result<(ProxyGraph, ProxyGraph), DiscrepancyError> {
    let server: Vec<ProxyNode> = corr.pairs.iter().map(|&(s, _)| *payload.proxy.node(s)).collect();
    let robot: Vec<ProxyNode> = corr.pairs.iter().map(|&(_, r)| robot_nodes[r]).collect();
    Ok((
        build_from_proxy_nodes(server, params, exec)?,
        build_from_proxy_nodes(robot, params, exec)?,
    ))
}

/// `|W_s(n) − W_s(n')|` per scale for every correspondence pair. Both
/// feature lists are indexed by pair.
pub fn scale_distances(
    server_feats: &[WaveletFeature],
    robot_feats: &[WaveletFeature],
    corr: &Correspondence,
) -> Result<Vec<ScaleDistance>, DiscrepancyError> {
    for feats in [server_feats, robot_feats] {
        if feats.len() != corr.len() {
            return Err(DiscrepancyError::DimensionMismatch {
                expected: corr.len(),
                got: feats.len(),
            });
        }
    }
    corr.pairs
        .iter()
        .zip(server_feats.iter().zip(robot_feats))
        .map(|(&(s, r), (a, b))| {
            if a.coefficients.len() != b.coefficients.len() {
                return Err(DiscrepancyError::DimensionMismatch {
                    expected: a.coefficients.len(),
                    got: b.coefficients.len(),
                });
            }
            Ok(ScaleDistance {
                server_index: s,
                robot_index: r,
                distances: a
                    .coefficients
                    .iter()
                    .zip(&b.coefficients)
                    .map(|(x, y)| (x - y).abs())
                    .collect(),
            })
        })
        .collect()
}
