use crate::posegraph::{PoseGraph, PoseNode};

/// Spacing rule for representative nodes within a submap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RepresentativeRule {
    /// Minimum Euclidean distance between consecutive representatives, meters.
    pub min_distance: f64,
    /// Minimum time between consecutive representatives, nanoseconds.
    pub min_interval_ns: i64,
}

impl Default for RepresentativeRule {
    fn default() -> Self {
        Self {
            min_distance: 1.0,
            min_interval_ns: 2_000_000_000,
        }
    }
}

// absorbs rounding in positions generated as multiples of the step
const SPACING_SLACK: f64 = 1e-9;

/// Representative nodes of every submap, in graph order.
///
/// Per robot and submap this keeps the first and last node, plus every node
/// that is at least `min_distance` or `min_interval_ns` away from the
/// previously kept one.
pub fn select_representatives(g: &PoseGraph) -> Vec<PoseNode> {
    select_representatives_with(g, &RepresentativeRule::default())
}

pub fn select_representatives_with(g: &PoseGraph, rule: &RepresentativeRule) -> Vec<PoseNode> {
    let nodes = g.nodes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < nodes.len() {
        // a run of consecutive nodes of one robot and one submap
        let mut j = i + 1;
        while j < nodes.len()
            && nodes[j].robot_id == nodes[i].robot_id
            && nodes[j].submap_id == nodes[i].submap_id
        {
            j += 1;
        }
        select_run(&nodes[i..j], rule, &mut out);
        i = j;
    }
    out
}

fn select_run(run: &[PoseNode], rule: &RepresentativeRule, out: &mut Vec<PoseNode>) {
    let Some(first) = run.first() else { return };
    out.push(*first);
    let mut last = *first;
    for n in &run[1..] {
        let far = (n.pose.translation - last.pose.translation).norm() >= rule.min_distance - SPACING_SLACK;
        let late = n.timestamp - last.timestamp >= rule.min_interval_ns;
        if far || late {
            out.push(*n);
            last = *n;
        }
    }
    let tail = run[run.len() - 1];
    if tail.node_id != last.node_id {
        out.push(tail);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::posegraph::Pose;

    fn graph(points: impl IntoIterator<Item = (f64, i64, u32)>) -> PoseGraph {
        let mut g = PoseGraph::new("world");
        for (i, (x, t, submap)) in points.into_iter().enumerate() {
            g.add_node(PoseNode {
                node_id: i as u64,
                robot_id: 0,
                submap_id: submap,
                timestamp: t,
                pose: Pose::from_translation(x, 0.0, 0.0),
            })
            .unwrap();
        }
        g
    }

    #[test]
    fn single_node_submap() {
        let g = graph([(0.0, 0, 0)]);
        assert_eq!(select_representatives(&g).len(), 1);
    }

    #[test]
    fn straight_line_every_meter() {
        // 10 m at 0.1 m spacing and 10 Hz: the distance rule fires first
        let g = graph((0..=100).map(|i| (i as f64 * 0.1, i * 100_000_000, 0)));
        let reps = select_representatives(&g);
        assert_eq!(reps.len(), 11);
        for (k, r) in reps.iter().enumerate() {
            assert!((r.pose.translation.x - k as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn stationary_robot_every_two_seconds() {
        let g = graph((0..=100).map(|i| (0.0, i * 100_000_000, 0)));
        let reps = select_representatives(&g);
        let times: Vec<i64> = reps.iter().map(|r| r.timestamp / 1_000_000_000).collect();
        assert_eq!(times, vec![0, 2, 4, 6, 8, 10]);
    }

    #[test]
    fn each_submap_keeps_its_ends() {
        let g = graph([(0.0, 0, 0), (0.1, 1, 0), (0.2, 2, 0), (0.3, 3, 1), (0.4, 4, 1)]);
        let ids: Vec<u64> = select_representatives(&g).iter().map(|n| n.node_id).collect();
        assert_eq!(ids, vec![0, 2, 3, 4]);
    }
}
