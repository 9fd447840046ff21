#![allow(dead_code)]

use faer::Mat;
use graph_sync::posegraph::{ConstraintKind, Information, Pose, PoseGraph, PoseNode, RelativeConstraint};
use graph_sync::proxy::{ProxyGraph, ProxyNode};
use nalgebra::{UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn blank_nodes(n: usize) -> Vec<ProxyNode> {
    (0..n)
        .map(|i| ProxyNode {
            index: i,
            position: Vector3::new(i as f64, 0.0, 0.0),
            source_node_id: i as u64,
            timestamp: i as i64,
            submap_id: 0,
            robot_id: 0,
        })
        .collect()
}

/// Graph with the given symmetric weights; positions are placeholders.
pub fn graph_from_weights(n: usize, edges: &[(usize, usize, f64)]) -> ProxyGraph {
    let mut a = Mat::<f64>::zeros(n, n);
    for &(i, j, w) in edges {
        a[(i, j)] = w;
        a[(j, i)] = w;
    }
    ProxyGraph::from_parts(blank_nodes(n), a, 7.0, 7.0 / 3.0)
}

/// A random spanning tree plus extra edges; always connected.
pub fn random_connected(n: usize, extra: f64, seed: u64) -> ProxyGraph {
    let mut r = rng(seed);
    let mut edges = Vec::new();
    for i in 1..n {
        let j = r.random_range(0..i);
        edges.push((i, j, r.random_range(0.05..2.0)));
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if r.random::<f64>() < extra && !edges.iter().any(|&(a, b, _)| (a, b) == (j, i) || (a, b) == (i, j)) {
                edges.push((i, j, r.random_range(0.05..2.0)));
            }
        }
    }
    graph_from_weights(n, &edges)
}

pub fn path_graph(n: usize) -> ProxyGraph {
    let edges: Vec<_> = (1..n).map(|i| (i - 1, i, 1.0)).collect();
    graph_from_weights(n, &edges)
}

pub fn random_pose(r: &mut ChaCha8Rng, t_scale: f64) -> Pose {
    let t = Vector3::new(
        r.random_range(-t_scale..t_scale),
        r.random_range(-t_scale..t_scale),
        r.random_range(-t_scale..t_scale),
    );
    let axis = Vector3::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0), r.random_range(-1.0..1.0));
    let angle = r.random_range(-3.0..3.0);
    Pose::new(t, UnitQuaternion::from_scaled_axis(axis.normalize() * angle))
}

/// Straight single-robot trajectory along x with one node per `step` meters.
pub fn straight_line(robot: u32, n: usize, step: f64, dt_ns: i64) -> PoseGraph {
    let mut g = PoseGraph::new("world");
    for k in 0..n {
        g.add_node(PoseNode {
            node_id: robot as u64 * 1_000_000 + k as u64,
            robot_id: robot,
            submap_id: (k / 10) as u32,
            timestamp: k as i64 * dt_ns,
            pose: Pose::from_translation(k as f64 * step, 0.0, 0.0),
        })
        .unwrap();
    }
    chain_edges(&mut g, Information::isotropic(0.05, 0.01));
    g
}

/// Adds an odometry edge between consecutive nodes, measured from the
/// current poses.
pub fn chain_edges(g: &mut PoseGraph, info: Information) {
    let nodes = g.nodes().to_vec();
    for w in nodes.windows(2) {
        let z = w[0].pose.relative_to(&w[1].pose);
        g.add_edge(RelativeConstraint::new(w[0].node_id, w[1].node_id, z, info, ConstraintKind::Odometry).unwrap())
            .unwrap();
    }
}
