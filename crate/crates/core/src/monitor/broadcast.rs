use std::collections::VecDeque;

use faer::Mat;
use nalgebra::{Quaternion, UnitQuaternion};

use super::representatives::{select_representatives_with, RepresentativeRule};
use super::MonitorError;
use crate::par::Exec;
use crate::posegraph::{Pose, PoseGraph, PoseNode};
use crate::proxy::{
    self, build_proxy_with, decode_proxy_from, encode_proxy_into, kron_reduce, kron_select_or_alternate, prune_to_radius,
    DecodeError, Laplacian, ProxyGraph, ProxyParams, Reader,
};

const MAGIC: &[u8; 4] = b"GSB1";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonitorConfig {
    pub proxy: ProxyParams,
    pub representatives: RepresentativeRule,
    /// Kron reduction runs when the proxy graph has more nodes than this.
    pub kron_trigger: usize,
    pub fill_in: FillIn,
}

/// What happens to Kron fill-in edges before transmission.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FillIn {
    /// Send every fill-in edge the reduction produced.
    Keep,
    /// Send only edges within the proxy radius (plus trajectory links).
    #[default]
    WithinRadius,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        Self {
            proxy: ProxyParams::default(),
            representatives: RepresentativeRule::default(),
            kron_trigger: 1000,
            fill_in: FillIn::default(),
        }
    }
}

/// Snapshot of the global proxy graph sent to every robot.
#[derive(Debug, Clone, PartialEq)]
pub struct BroadcastPayload {
    pub epoch: u64,
    pub proxy: ProxyGraph,
    /// Orientation of each proxy node's source pose, `(w, x, y, z)`.
    pub orientations: Vec<[f64; 4]>,
}

impl BroadcastPayload {
    pub fn new(epoch: u64, proxy: ProxyGraph, orientations: Vec<[f64; 4]>) -> Result<Self, MonitorError> {
        if orientations.len() != proxy.len() {
            return Err(MonitorError::AuxiliaryMismatch {
                nodes: proxy.len(),
                auxiliary: orientations.len(),
            });
        }
        Ok(Self {
            epoch,
            proxy,
            orientations,
        })
    }

    /// Server-side pose of proxy node `i`.
    pub fn pose(&self, i: usize) -> Pose {
        let [w, x, y, z] = self.orientations[i];
        Pose::new(
            self.proxy.node(i).position,
            UnitQuaternion::new_unchecked(Quaternion::new(w, x, y, z)),
        )
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&self.epoch.to_le_bytes());
        encode_proxy_into(&self.proxy, &mut out);
        for q in &self.orientations {
            for v in q {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, DecodeError> {
        if bytes.get(..4) != Some(MAGIC.as_slice()) {
            return Err(DecodeError::Corrupt("payload magic"));
        }
        let mut r = Reader::new(&bytes[4..]);
        let epoch = r.u64()?;
        let proxy = decode_proxy_from(&mut r)?;
        let mut orientations = Vec::with_capacity(proxy.len());
        for _ in 0..proxy.len() {
            orientations.push([r.f64()?, r.f64()?, r.f64()?, r.f64()?]);
        }
        if r.position() + 4 != bytes.len() {
            return Err(DecodeError::Corrupt("trailing bytes"));
        }
        Ok(Self {
            epoch,
            proxy,
            orientations,
        })
    }

    pub fn encoded_len(&self) -> usize {
        self.encode().len()
    }
}

/// A payload plus the sizes needed for bandwidth accounting.
#[derive(Debug, Clone, PartialEq)]
pub struct Broadcast {
    pub payload: BroadcastPayload,
    /// Node count before reduction.
    pub full_nodes: usize,
    /// Encoded size of the payload that was sent.
    pub bytes: usize,
    /// Encoded size the payload would have had without reduction.
    pub full_bytes: usize,
    pub reduced: bool,
}

fn orientations(reps: &[PoseNode]) -> Vec<[f64; 4]> {
    reps.iter().map(|n| n.pose.quaternion_wxyz()).collect()
}

/// Builds (and, above the trigger size, Kron-reduces) the global proxy graph
/// from the server's latest optimized graph.
pub fn make_broadcast(server_graph: &PoseGraph, epoch: u64, config: &MonitorConfig) -> Result<Broadcast, MonitorError> {
    make_broadcast_with(server_graph, epoch, config, Exec::default())
}

pub fn make_broadcast_with(
    server_graph: &PoseGraph,
    epoch: u64,
    config: &MonitorConfig,
    exec: Exec,
) -> Result<Broadcast, MonitorError> {
    if server_graph.is_empty() {
        return Err(MonitorError::EmptyGraph);
    }
    let reps = select_representatives_with(server_graph, &config.representatives);
    let full = build_proxy_with(&reps, &config.proxy, exec)?;
    let full_payload = BroadcastPayload::new(epoch, full, orientations(&reps))?;
    let full_bytes = full_payload.encoded_len();
    let full_nodes = full_payload.proxy.len();
    if full_nodes <= config.kron_trigger {
        return Ok(Broadcast {
            payload: full_payload,
            full_nodes,
            bytes: full_bytes,
            full_bytes,
            reduced: false,
        });
    }
    let keep = reduction_keep_set(&full_payload.proxy)?;
    let mut reduced = kron_reduce(&full_payload.proxy, &keep)?;
    if config.fill_in == FillIn::WithinRadius {
        reduced = prune_to_radius(&reduced);
    }
    let kept_orientations = keep.iter().map(|&i| full_payload.orientations[i]).collect();
    let payload = BroadcastPayload::new(epoch, reduced, kept_orientations)?;
    let bytes = payload.encoded_len();
    Ok(Broadcast {
        payload,
        full_nodes,
        bytes,
        full_bytes,
        reduced: true,
    })
}

/// Connected components of the graph, each as a sorted index list, ordered
/// by smallest member.
pub fn connected_components(g: &ProxyGraph) -> Vec<Vec<usize>> {
    let n = g.len();
    let a = g.adjacency();
    let mut label = vec![usize::MAX; n];
    let mut out = Vec::new();
    for start in 0..n {
        if label[start] != usize::MAX {
            continue;
        }
        let id = out.len();
        let mut members = vec![start];
        label[start] = id;
        let mut queue = VecDeque::from([start]);
        while let Some(i) = queue.pop_front() {
            for j in 0..n {
                if label[j] == usize::MAX && a[(i, j)] != 0.0 {
                    label[j] = id;
                    members.push(j);
                    queue.push_back(j);
                }
            }
        }
        members.sort_unstable();
        out.push(members);
    }
    out
}

/// Nodes kept by the reduction: eigenvector polarity within each connected
/// component, plus the chronologically last node of every robot.
pub fn reduction_keep_set(g: &ProxyGraph) -> Result<Vec<usize>, MonitorError> {
    let mut keep = Vec::new();
    for comp in connected_components(g) {
        if comp.len() < 2 {
            keep.extend(comp);
            continue;
        }
        let sub = Mat::from_fn(comp.len(), comp.len(), |a, b| {
            if a == b {
                g.degree()[comp[a]] - g.weight(comp[a], comp[a])
            } else {
                -g.weight(comp[a], comp[b])
            }
        });
        let local = kron_select_or_alternate(&Laplacian::from_matrix(sub))?;
        keep.extend(local.into_iter().map(|i| comp[i]));
    }
    for robot in robots(g) {
        if let Some(last) = (0..g.len())
            .filter(|&i| g.node(i).robot_id == robot)
            .max_by_key(|&i| g.node(i).timestamp)
        {
            keep.push(last);
        }
    }
    keep.sort_unstable();
    keep.dedup();
    Ok(keep)
}

fn robots(g: &ProxyGraph) -> Vec<u32> {
    let mut r: Vec<u32> = g.nodes().iter().map(|n| n.robot_id).collect();
    r.sort_unstable();
    r.dedup();
    r
}

impl From<proxy::ProxyError> for MonitorError {
    fn from(e: proxy::ProxyError) -> Self {
        MonitorError::Proxy(e)
    }
}
