use std::collections::HashMap;

use faer::Mat;
use nalgebra::Vector3;

use super::ProxyError;
use crate::par::{self, Exec};
use crate::posegraph::{NodeId, PoseNode};

/// Above this node count the radius search switches from all-pairs to grid
/// hashing.
pub const BRUTE_FORCE_LIMIT: usize = 2000;

/// Floor for the weight of forced trajectory edges so that far-apart
/// consecutive nodes never disconnect the graph through underflow.
const MIN_CHAIN_WEIGHT: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProxyNode {
    pub index: usize,
    pub position: Vector3<f64>,
    pub source_node_id: NodeId,
    pub timestamp: i64,
    pub submap_id: u32,
    pub robot_id: u32,
}

impl ProxyNode {
    pub fn from_pose_node(index: usize, n: &PoseNode) -> Self {
        Self {
            index,
            position: n.pose.translation,
            source_node_id: n.node_id,
            timestamp: n.timestamp,
            submap_id: n.submap_id,
            robot_id: n.robot_id,
        }
    }
}

/// Edge-weight construction parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProxyParams {
    /// Radius of the neighbor search, meters.
    pub radius: f64,
    /// Length scale of the distance weight, meters.
    pub sigma: f64,
    /// Use `exp(-d²/2σ²)` instead of `exp(-d/2σ²)`.
    pub squared_distance: bool,
}

impl Default for ProxyParams {
    fn default() -> Self {
        Self::with_radius(7.0)
    }
}

impl ProxyParams {
    /// `sigma` defaults to a third of the radius.
    pub fn with_radius(radius: f64) -> Self {
        Self {
            radius,
            sigma: radius / 3.0,
            squared_distance: false,
        }
    }

    pub fn weight(&self, distance: f64) -> f64 {
        let num = if self.squared_distance {
            distance * distance
        } else {
            distance
        };
        (-num / (2.0 * self.sigma * self.sigma)).exp()
    }

    pub fn validate(&self) -> Result<(), ProxyError> {
        if !(self.radius > 0.0) || !(self.sigma > 0.0) {
            return Err(ProxyError::InvalidParams {
                radius: self.radius,
                sigma: self.sigma,
            });
        }
        Ok(())
    }
}

/// Weighted undirected positional graph.
#[derive(Debug, Clone)]
pub struct ProxyGraph {
    nodes: Vec<ProxyNode>,
    adjacency: Mat<f64>,
    degree: Vec<f64>,
    radius: f64,
    sigma: f64,
}

impl PartialEq for ProxyGraph {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes
            && self.degree == other.degree
            && self.radius == other.radius
            && self.sigma == other.sigma
            && self.adjacency == other.adjacency
    }
}

impl ProxyGraph {
    /// Assembles a graph from nodes and a symmetric adjacency; the degree
    /// vector is recomputed.
    pub fn from_parts(nodes: Vec<ProxyNode>, adjacency: Mat<f64>, radius: f64, sigma: f64) -> Self {
        assert_eq!(adjacency.nrows(), nodes.len());
        assert_eq!(adjacency.ncols(), nodes.len());
        let degree = (0..nodes.len())
            .map(|i| (0..nodes.len()).map(|j| adjacency[(i, j)]).sum())
            .collect();
        Self {
            nodes,
            adjacency,
            degree,
            radius,
            sigma,
        }
    }

    pub fn nodes(&self) -> &[ProxyNode] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> &ProxyNode {
        &self.nodes[i]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn adjacency(&self) -> &Mat<f64> {
        &self.adjacency
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.adjacency[(i, j)]
    }

    pub fn degree(&self) -> &[f64] {
        &self.degree
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Number of undirected edges (nonzero upper-triangular entries).
    pub fn edge_count(&self) -> usize {
        let n = self.len();
        (0..n)
            .map(|i| ((i + 1)..n).filter(|&j| self.adjacency[(i, j)] != 0.0).count())
            .sum()
    }

    pub fn positions(&self) -> Vec<Vector3<f64>> {
        self.nodes.iter().map(|n| n.position).collect()
    }
}

/// Builds the proxy graph over the given pose nodes, one proxy node each.
pub fn build_proxy(nodes: &[PoseNode], params: &ProxyParams) -> Result<ProxyGraph, ProxyError> {
    build_proxy_with(nodes, params, Exec::default())
}

pub fn build_proxy_with(
    nodes: &[PoseNode],
    params: &ProxyParams,
    exec: Exec,
) -> Result<ProxyGraph, ProxyError> {
    let proxy_nodes = nodes
        .iter()
        .enumerate()
        .map(|(i, n)| ProxyNode::from_pose_node(i, n))
        .collect();
    build_from_proxy_nodes(proxy_nodes, params, exec)
}

/// Builds a proxy graph from positioned nodes. Nodes are reindexed densely
/// in the given order; consecutive nodes of the same robot are always
/// connected.
pub fn build_from_proxy_nodes(
    mut nodes: Vec<ProxyNode>,
    params: &ProxyParams,
    exec: Exec,
) -> Result<ProxyGraph, ProxyError> {
    params.validate()?;
    if nodes.is_empty() {
        return Err(ProxyError::EmptyGraph);
    }
    for (i, n) in nodes.iter_mut().enumerate() {
        n.index = i;
    }
    let n = nodes.len();
    let positions: Vec<Vector3<f64>> = nodes.iter().map(|n| n.position).collect();
    let neighbors = if n <= BRUTE_FORCE_LIMIT {
        radius_pairs_brute(&positions, params.radius, exec)
    } else {
        radius_pairs_grid(&positions, params.radius, exec)
    };

    let mut adjacency = Mat::<f64>::zeros(n, n);
    for (i, row) in neighbors.iter().enumerate() {
        for &(j, d) in row {
            let w = params.weight(d);
            adjacency[(i, j)] = w;
            adjacency[(j, i)] = w;
        }
    }
    for i in 1..n {
        if nodes[i].robot_id == nodes[i - 1].robot_id && adjacency[(i - 1, i)] == 0.0 {
            let d = (positions[i] - positions[i - 1]).norm();
            let w = params.weight(d).max(MIN_CHAIN_WEIGHT);
            adjacency[(i - 1, i)] = w;
            adjacency[(i, i - 1)] = w;
        }
    }
    Ok(ProxyGraph::from_parts(nodes, adjacency, params.radius, params.sigma))
}

/// For each `i`, the `(j, distance)` pairs with `j > i` and distance within
/// `radius`, sorted by `j`.
pub(crate) fn radius_pairs_brute(
    positions: &[Vector3<f64>],
    radius: f64,
    exec: Exec,
) -> Vec<Vec<(usize, f64)>> {
    par::map_range(exec, positions.len(), |i| {
        let pi = positions[i];
        ((i + 1)..positions.len())
            .filter_map(|j| {
                let d = (positions[j] - pi).norm();
                (d <= radius).then_some((j, d))
            })
            .collect()
    })
}

pub(crate) fn radius_pairs_grid(
    positions: &[Vector3<f64>],
    radius: f64,
    exec: Exec,
) -> Vec<Vec<(usize, f64)>> {
    let cell = |p: &Vector3<f64>| -> [i64; 3] {
        [
            (p.x / radius).floor() as i64,
            (p.y / radius).floor() as i64,
            (p.z / radius).floor() as i64,
        ]
    };
    let mut buckets: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
    for (i, p) in positions.iter().enumerate() {
        buckets.entry(cell(p)).or_default().push(i);
    }
    par::map_range(exec, positions.len(), |i| {
        let pi = positions[i];
        let c = cell(&pi);
        let mut out = Vec::new();
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(b) = buckets.get(&[c[0] + dx, c[1] + dy, c[2] + dz]) {
                        for &j in b.iter().filter(|&&j| j > i) {
                            let d = (positions[j] - pi).norm();
                            if d <= radius {
                                out.push((j, d));
                            }
                        }
                    }
                }
            }
        }
        out.sort_by_key(|&(j, _)| j);
        out
    })
}
