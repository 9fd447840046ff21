use super::{BroadcastPayload, MonitorError};
use crate::proxy::ProxyNode;

/// Default synchronization tolerance: half a second.
pub const DEFAULT_SYNC_TOLERANCE_NS: i64 = 500_000_000;

/// One-to-one pairing of server proxy nodes with robot nodes.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Correspondence {
    /// `(server proxy index, robot node index)`, sorted by server index.
    pub pairs: Vec<(usize, usize)>,
    /// Robot timestamp minus server timestamp per pair, nanoseconds.
    pub residual_dt: Vec<i64>,
}

impl Correspondence {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Greedy nearest-timestamp matching between the server nodes of `robot_id`
/// and the robot's own nodes.
///
/// Candidate pairs within `tolerance_ns` are taken in order of increasing
/// time offset (ties broken by server then robot index) as long as neither
/// side is already matched.
pub fn synchronize(
    server: &BroadcastPayload,
    robot: &[ProxyNode],
    robot_id: u32,
    tolerance_ns: i64,
) -> Result<Correspondence, MonitorError> {
    if server.proxy.is_empty() || robot.is_empty() {
        return Err(MonitorError::NoOverlap);
    }
    let mut robot_order: Vec<usize> = (0..robot.len()).collect();
    robot_order.sort_by_key(|&i| (robot[i].timestamp, i));
    let times: Vec<i64> = robot_order.iter().map(|&i| robot[i].timestamp).collect();

    let mut candidates: Vec<(i64, usize, usize)> = Vec::new();
    for (s, node) in server.proxy.nodes().iter().enumerate() {
        if node.robot_id != robot_id {
            continue;
        }
        let lo = times.partition_point(|&t| t < node.timestamp.saturating_sub(tolerance_ns));
        for (k, &t) in times.iter().enumerate().skip(lo) {
            let dt = t - node.timestamp;
            if dt > tolerance_ns {
                break;
            }
            candidates.push((dt.abs(), s, robot_order[k]));
        }
    }
    candidates.sort_unstable();

    let mut server_used = vec![false; server.proxy.len()];
    let mut robot_used = vec![false; robot.len()];
    let mut pairs = Vec::new();
    for (_, s, r) in candidates {
        if !server_used[s] && !robot_used[r] {
            server_used[s] = true;
            robot_used[r] = true;
            pairs.push((s, r));
        }
    }
    if pairs.is_empty() {
        return Err(MonitorError::NoOverlap);
    }
    pairs.sort_unstable();
    let residual_dt = pairs
        .iter()
        .map(|&(s, r)| robot[r].timestamp - server.proxy.node(s).timestamp)
        .collect();
    Ok(Correspondence { pairs, residual_dt })
}
