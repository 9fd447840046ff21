mod common;

use common::{random_pose, rng};
use graph_sync::optimizer::{
    chi2, edge_linearization, numeric_jacobians, optimize, optimize_with, LmSettings, OptimizationProblem,
};
use graph_sync::par::Exec;
use graph_sync::posegraph::{
    rmse_ate, ConstraintKind, Information, Pose, PoseGraph, PoseNode, RelativeConstraint,
};
use nalgebra::{Vector3, Vector6};
use proptest::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn node(id: u64, pose: Pose) -> PoseNode {
    PoseNode {
        node_id: id,
        robot_id: 0,
        submap_id: 0,
        timestamp: id as i64,
        pose,
    }
}

fn edge(g: &PoseGraph, a: u64, b: u64, z: Pose, info: Information, kind: ConstraintKind) -> RelativeConstraint {
    assert!(g.contains(a) && g.contains(b));
    RelativeConstraint::new(a, b, z, info, kind).unwrap()
}

/// Ground truth of a random 3D graph: a chain plus random extra edges, all
/// measured exactly.
fn exact_problem(n: usize, seed: u64) -> PoseGraph {
    let mut r = rng(seed);
    let mut g = PoseGraph::new("world");
    let mut pose = Pose::identity();
    for k in 0..n {
        g.add_node(node(k as u64, pose)).unwrap();
        let step = Pose::new(
            Vector3::new(1.0, r.random_range(-0.3..0.3), r.random_range(-0.1..0.1)),
            nalgebra::UnitQuaternion::from_euler_angles(
                r.random_range(-0.1..0.1),
                r.random_range(-0.1..0.1),
                r.random_range(-0.5..0.5),
            ),
        );
        pose = pose.compose(&step);
    }
    let info = Information::isotropic(0.1, 0.05);
    let nodes = g.nodes().to_vec();
    for k in 1..n {
        let z = nodes[k - 1].pose.relative_to(&nodes[k].pose);
        g.add_edge(edge(&g, k as u64 - 1, k as u64, z, info, ConstraintKind::Odometry)).unwrap();
    }
    for _ in 0..n / 3 {
        let a = r.random_range(0..n);
        let b = r.random_range(0..n);
        if a.abs_diff(b) > 1 {
            let z = nodes[a].pose.relative_to(&nodes[b].pose);
            g.add_edge(edge(&g, a as u64, b as u64, z, info, ConstraintKind::LoopClosure)).unwrap();
        }
    }
    g
}

fn perturb(g: &PoseGraph, r: &mut ChaCha8Rng, t: f64, rot: f64) -> PoseGraph {
    let poses: Vec<Pose> = g
        .nodes()
        .iter()
        .enumerate()
        .map(|(i, n)| {
            if i == 0 {
                return n.pose;
            }
            let d = Vector6::from_fn(|k, _| if k < 3 { r.random_range(-t..t) } else { r.random_range(-rot..rot) });
            n.pose.retract(&d)
        })
        .collect();
    g.with_poses(&poses)
}

fn rel_err(a: &nalgebra::Matrix6<f64>, b: &nalgebra::Matrix6<f64>) -> f64 {
    (a - b).norm() / b.norm().max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn analytic_jacobians_match_finite_differences(seed in any::<u64>()) {
        let mut r = rng(seed);
        let a = random_pose(&mut r, 10.0);
        let b = random_pose(&mut r, 10.0);
        // keep the error rotation away from pi, where the log is not smooth
        let z = a.relative_to(&b).retract(&Vector6::from_fn(|_, _| r.random_range(-0.4..0.4)));
        let (_, ja, jb) = edge_linearization(&a, &b, &z);
        let (na, nb) = numeric_jacobians(&a, &b, &z, 1e-6);
        prop_assert!(rel_err(&ja, &na) <= 1e-5, "from: {}", rel_err(&ja, &na));
        prop_assert!(rel_err(&jb, &nb) <= 1e-5, "to: {}", rel_err(&jb, &nb));
    }

    #[test]
    fn zero_noise_problems_converge(n in 3usize..40, seed in any::<u64>()) {
        let truth = exact_problem(n, seed);
        let start = perturb(&truth, &mut rng(seed ^ 3), 0.3, 0.1);
        let (out, report) = optimize(&OptimizationProblem::new(start)).unwrap();
        prop_assert!(report.final_cost < 1e-12, "cost {}", report.final_cost);
        prop_assert!(report.iterations <= 20, "iterations {}", report.iterations);
        prop_assert!(chi2(&out) < 1e-12);
    }

    #[test]
    fn optimization_is_gauge_equivariant(n in 3usize..25, seed in any::<u64>()) {
        let mut r = rng(seed);
        let truth = exact_problem(n, seed);
        let mut noisy = perturb(&truth, &mut r, 0.2, 0.05);
        // conflicting measurements so the optimum has residual cost
        let edges: Vec<RelativeConstraint> = noisy.edges().iter().map(|e| {
            let mut e = *e;
            e.measurement = e.measurement.retract(&Vector6::from_fn(|_, _| r.random_range(-0.05..0.05)));
            e
        }).collect();
        noisy.retain_edges(|_| false);
        noisy.extend_edges(edges).unwrap();

        let t = random_pose(&mut r, 50.0);
        let moved_poses: Vec<Pose> = noisy.nodes().iter().map(|n| t.compose(&n.pose)).collect();
        let moved = noisy.with_poses(&moved_poses);

        let (a, ra) = optimize(&OptimizationProblem::new(noisy)).unwrap();
        let (b, rb) = optimize(&OptimizationProblem::new(moved)).unwrap();
        prop_assert!((ra.final_cost - rb.final_cost).abs() <= 1e-8 * ra.final_cost.max(1.0));
        for (x, y) in a.nodes().iter().zip(b.nodes()) {
            let expect = t.compose(&x.pose);
            prop_assert!((expect.translation - y.pose.translation).norm() <= 1e-8 * 50.0f64.max(1.0));
            prop_assert!(expect.relative_to(&y.pose).rotation_angle() <= 1e-8);
        }
    }
}

#[test]
fn sequential_and_parallel_agree_bitwise() {
    let truth = exact_problem(300, 11);
    let start = perturb(&truth, &mut rng(12), 0.2, 0.05);
    let p = OptimizationProblem::new(start);
    let (a, _) = optimize_with(&p, Exec::Sequential).unwrap();
    let (b, _) = optimize_with(&p, Exec::Parallel).unwrap();
    assert_eq!(a, b);
}

fn planar(x: f64, y: f64, yaw: f64) -> Pose {
    Pose::from_xyz_yaw(x, y, 0.0, yaw)
}

fn triangle(p1: Pose, p2: Pose) -> PoseGraph {
    let mut g = PoseGraph::new("world");
    g.add_node(node(0, Pose::identity())).unwrap();
    g.add_node(node(1, p1)).unwrap();
    g.add_node(node(2, p2)).unwrap();
    let info = Information::isotropic(0.1, 0.05);
    let odo = ConstraintKind::Odometry;
    g.add_edge(edge(&g, 0, 1, planar(1.0, 0.0, 2.0944), info, odo)).unwrap();
    g.add_edge(edge(&g, 1, 2, planar(1.0, 0.0, 2.0944), info, odo)).unwrap();
    // closing edge off by 0.3 m and 0.1 rad
    g.add_edge(edge(&g, 2, 0, planar(1.3, 0.0, 2.0944 + 0.1), info, ConstraintKind::LoopClosure)).unwrap();
    g
}

#[test]
fn triangle_optimum_matches_grid_search() {
    let start = triangle(planar(1.0, 0.0, 2.0944), planar(0.5, 0.866, -2.0944));
    let (out, report) = optimize(&OptimizationProblem::new(start)).unwrap();

    // coarse-to-fine search over the planar poses of nodes 1 and 2
    let cost = |v: &[f64; 6]| chi2(&triangle(planar(v[0], v[1], v[2]), planar(v[3], v[4], v[5])));
    let mut best = [1.0, 0.0, 2.0944, 0.5, 0.866, -2.0944];
    let mut best_cost = cost(&best);
    let mut span = [0.5, 0.5, 0.3, 0.5, 0.5, 0.3];
    for _ in 0..60 {
        let center = best;
        for code in 0..3usize.pow(6) {
            let mut v = center;
            let mut c = code;
            for k in 0..6 {
                v[k] = center[k] + ((c % 3) as f64 - 1.0) * span[k];
                c /= 3;
            }
            let e = cost(&v);
            if e < best_cost {
                best_cost = e;
                best = v;
            }
        }
        if best == center {
            span.iter_mut().for_each(|s| *s *= 0.5);
        }
    }
    assert!(
        (report.final_cost - best_cost).abs() <= 1e-9 * best_cost.max(1e-12),
        "lm {} grid {}",
        report.final_cost,
        best_cost
    );
    let grid = [planar(best[0], best[1], best[2]), planar(best[3], best[4], best[5])];
    for (n, g) in out.nodes()[1..].iter().zip(grid) {
        assert!((n.pose.translation - g.translation).norm() < 1e-5);
        assert!(n.pose.relative_to(&g).rotation_angle() < 1e-5);
    }
}

#[test]
fn loop_closure_reduces_trajectory_error() {
    // a 10 m square driven with a small yaw bias
    let mut truth = PoseGraph::new("world");
    let mut pose = Pose::identity();
    let n = 40;
    for k in 0..n {
        truth.add_node(node(k, pose)).unwrap();
        let turn = if (k + 1) % 10 == 0 { std::f64::consts::FRAC_PI_2 } else { 0.0 };
        pose = pose.compose(&planar(1.0, 0.0, turn));
    }
    let info = Information::isotropic(0.05, 0.01);
    let mut drifted = PoseGraph::new("world");
    let mut est = Pose::identity();
    for k in 0..n as usize {
        if k > 0 {
            let z = truth.nodes()[k - 1].pose.relative_to(&truth.nodes()[k].pose);
            est = est.compose(&z.compose(&planar(0.0, 0.0, 0.02)));
        }
        drifted.add_node(node(k as u64, est)).unwrap();
    }
    for k in 1..n as usize {
        let z = drifted.nodes()[k - 1].pose.relative_to(&drifted.nodes()[k].pose);
        drifted.add_edge(edge(&drifted, k as u64 - 1, k as u64, z, info, ConstraintKind::Odometry)).unwrap();
    }
    let before = rmse_ate(&drifted, &truth).unwrap();

    let mut closed = drifted.clone();
    let z = truth.nodes()[0].pose.relative_to(&truth.nodes()[n as usize - 1].pose);
    closed.add_edge(edge(&closed, 0, n - 1, z, info, ConstraintKind::LoopClosure)).unwrap();
    let (out, _) = optimize(&OptimizationProblem {
        settings: LmSettings::default(),
        ..OptimizationProblem::new(closed)
    })
    .unwrap();
    let after = rmse_ate(&out, &truth).unwrap();
    assert!(after < before, "{after} vs {before}");
}
