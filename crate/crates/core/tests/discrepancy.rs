mod common;

use common::{chain_edges, path_graph, rng, straight_line};
use graph_sync::discrepancy::{
    analyze, comparison_signal, generate_constraints, robot_proxy_nodes, scale_distances, upsert_constraints, BandSet, DiscrepancyConfig, DiscrepancyVerdict, PerBand, Side, Thresholds,
};
use graph_sync::monitor::{synchronize, BroadcastPayload, Correspondence, DEFAULT_SYNC_TOLERANCE_NS};
use graph_sync::par::Exec;
use graph_sync::posegraph::{ConstraintKind, Information, Pose, PoseGraph, PoseNode, RelativeConstraint};
use graph_sync::proxy::{build_proxy, laplacian, ProxyParams};
use graph_sync::spectral::{eigendecompose, wavelet_features, FilterBank};
use nalgebra::{UnitQuaternion, Vector3, Vector6};
use proptest::prelude::*;
use rand::Rng;

fn payload_of(g: &PoseGraph) -> BroadcastPayload {
    let proxy = build_proxy(g.nodes(), &ProxyParams::default()).unwrap();
    let q = g.nodes().iter().map(|n| n.pose.quaternion_wxyz()).collect();
    BroadcastPayload::new(0, proxy, q).unwrap()
}

fn displaced(g: &PoseGraph, k: usize, d: Vector3<f64>) -> PoseGraph {
    let mut poses: Vec<Pose> = g.nodes().iter().map(|n| n.pose).collect();
    poses[k].translation += d;
    g.with_poses(&poses)
}

fn wandering(n: usize, seed: u64) -> PoseGraph {
    let mut r = rng(seed);
    let mut g = PoseGraph::new("world");
    let mut p = Pose::identity();
    for k in 0..n {
        g.add_node(PoseNode {
            node_id: k as u64,
            robot_id: 0,
            submap_id: (k / 8) as u32,
            timestamp: k as i64 * 1_000_000_000,
            pose: p,
        })
        .unwrap();
        p = p.compose(&Pose::from_xyz_yaw(r.random_range(0.5..2.0), 0.0, 0.0, r.random_range(-0.4..0.4)));
    }
    chain_edges(&mut g, Information::isotropic(0.05, 0.01));
    g
}

#[test]
fn signal_is_distance_to_first_matched_node() {
    let mut g = PoseGraph::new("world");
    for (k, p) in [[0.0, 0.0, 0.0], [3.0, 4.0, 0.0]].iter().enumerate() {
        g.add_node(PoseNode {
            node_id: k as u64,
            robot_id: 0,
            submap_id: 0,
            timestamp: k as i64,
            pose: Pose::from_translation(p[0], p[1], p[2]),
        })
        .unwrap();
    }
    let nodes = robot_proxy_nodes(&g, 0);
    let corr = Correspondence {
        pairs: vec![(0, 0), (1, 1)],
        residual_dt: vec![0, 0],
    };
    let f = comparison_signal(&nodes, &corr, Side::Robot);
    assert_eq!(f.values, vec![0.0, 5.0]);
}

#[test]
fn rotating_about_the_origin_leaves_the_signal_unchanged() {
    let g = wandering(30, 4);
    let rot = Pose::new(Vector3::zeros(), UnitQuaternion::from_euler_angles(0.3, -0.2, 1.1));
    let poses: Vec<Pose> = g.nodes().iter().map(|n| rot.compose(&n.pose)).collect();
    let h = g.with_poses(&poses);
    let corr = Correspondence {
        pairs: (0..30).map(|k| (k, k)).collect(),
        residual_dt: vec![0; 30],
    };
    let a = comparison_signal(&robot_proxy_nodes(&g, 0), &corr, Side::Robot);
    let b = comparison_signal(&robot_proxy_nodes(&h, 0), &corr, Side::Robot);
    for (x, y) in a.values.iter().zip(&b.values) {
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn identical_graphs_give_zero_distances_and_no_constraints() {
    let g = wandering(60, 9);
    let config = DiscrepancyConfig::default();
    let a = analyze(&payload_of(&g), &g, 0, &config, Exec::default()).unwrap();
    assert_eq!(a.correspondence.len(), 60);
    assert!(a.distances.iter().all(|d| d.distances.iter().all(|&v| v == 0.0)));
    assert!(a.verdicts.is_empty());
    let c = generate_constraints(&a.verdicts, &g, 0, &payload_of(&g), &a.correspondence, &config).unwrap();
    assert!(c.is_empty());
}

#[test]
fn displaced_node_is_localized_at_small_scales() {
    // 1.3 m spacing keeps every neighbor off the proxy radius, so the moves
    // below change edge weights without adding or dropping edges
    let robot = straight_line(0, 100, 1.3, 1_000_000_000);
    let moves = [Vector3::new(0.0, 0.2, 0.0), Vector3::new(0.0, 1.0, 0.0), Vector3::new(0.0, 0.0, 2.0), Vector3::new(0.2, 0.0, 0.0)];
    for d in moves {
        let server = displaced(&robot, 50, d);
        let a = analyze(&payload_of(&server), &robot, 0, &DiscrepancyConfig::default(), Exec::default()).unwrap();
        let small: Vec<f64> = a.distances.iter().map(|d| d.distances[5].max(d.distances[6])).collect();
        assert!(small.iter().any(|&v| v > 0.0));
        let argmax = (0..small.len()).max_by(|&i, &j| small[i].total_cmp(&small[j])).unwrap();
        assert!(argmax.abs_diff(50) <= 2, "move {d:?}: peak at {argmax}");
        let far = (0..small.len()).filter(|k| k.abs_diff(50) > 25).map(|k| small[k]).fold(0.0, f64::max);
        assert!(far < 0.25 * small[argmax], "move {d:?}: far {far} vs peak {}", small[argmax]);
    }
}

#[test]
fn distances_scale_with_the_signal_difference() {
    let p = path_graph(40);
    let b = eigendecompose(&laplacian(&p)).unwrap();
    let bank = FilterBank::meyer(b.lambda_max(), 7).unwrap();
    let mut r = rng(5);
    let f: Vec<f64> = (0..40).map(|_| r.random_range(0.0..30.0)).collect();
    let delta: Vec<f64> = (0..40).map(|_| r.random_range(-1.0..1.0)).collect();
    let h1: Vec<f64> = f.iter().zip(&delta).map(|(a, d)| a + d).collect();
    let h2: Vec<f64> = f.iter().zip(&delta).map(|(a, d)| a + 2.0 * d).collect();
    let corr = Correspondence {
        pairs: (0..40).map(|k| (k, k)).collect(),
        residual_dt: vec![0; 40],
    };
    let wf = wavelet_features(&b, &bank, &f).unwrap();
    let d1 = scale_distances(&wf, &wavelet_features(&b, &bank, &h1).unwrap(), &corr).unwrap();
    let d2 = scale_distances(&wf, &wavelet_features(&b, &bank, &h2).unwrap(), &corr).unwrap();
    for (x, y) in d1.iter().zip(&d2) {
        for (a, c) in x.distances.iter().zip(&y.distances) {
            assert!((2.0 * a - c).abs() < 1e-9 * c.max(1.0));
        }
    }
}

fn verdict(pair: usize, bands: BandSet) -> DiscrepancyVerdict {
    DiscrepancyVerdict {
        pair,
        server_index: pair,
        robot_index: pair,
        bands,
        stats: PerBand::splat(1.0),
    }
}

fn identity_corr(n: usize) -> Correspondence {
    Correspondence {
        pairs: (0..n).map(|k| (k, k)).collect(),
        residual_dt: vec![0; n],
    }
}

#[test]
fn small_trigger_adds_one_adjacent_constraint() {
    let g = straight_line(0, 30, 1.0, 1_000_000_000);
    let mut bands = BandSet::splat(false);
    bands.small = true;
    let c = generate_constraints(
        &[verdict(12, bands)],
        &g,
        0,
        &payload_of(&g),
        &identity_corr(30),
        &DiscrepancyConfig::default(),
    )
    .unwrap();
    assert_eq!(c.len(), 1);
    assert_eq!(c[0].kind, ConstraintKind::CorrectionAdjacent);
    assert_eq!((c[0].from_id, c[0].to_id), (11, 13));
    assert!(c[0].measurement.approx_eq(&Pose::from_translation(2.0, 0.0, 0.0), 1e-12));
}

#[test]
fn mid_trigger_spans_the_configured_hops() {
    let g = straight_line(0, 30, 1.0, 1_000_000_000);
    let mut bands = BandSet::splat(false);
    bands.mid = true;
    let corr = identity_corr(30);
    let c = generate_constraints(&[verdict(12, bands)], &g, 0, &payload_of(&g), &corr, &DiscrepancyConfig::default())
        .unwrap();
    assert_eq!(c.len(), 1);
    assert_eq!((c[0].from_id, c[0].to_id, c[0].kind), (7, 17, ConstraintKind::CorrectionMidscale));
    // clipped at the trajectory start
    let c = generate_constraints(&[verdict(2, bands)], &g, 0, &payload_of(&g), &corr, &DiscrepancyConfig::default())
        .unwrap();
    assert_eq!((c[0].from_id, c[0].to_id), (0, 7));
}

#[test]
fn large_trigger_links_four_nearest_submaps() {
    // 60 nodes, submaps of 10: six submaps along a line
    let g = straight_line(0, 60, 1.0, 1_000_000_000);
    let mut bands = BandSet::splat(false);
    bands.large = true;
    let c = generate_constraints(
        &[verdict(5, bands)],
        &g,
        0,
        &payload_of(&g),
        &identity_corr(60),
        &DiscrepancyConfig::default(),
    )
    .unwrap();
    assert_eq!(c.len(), 4);
    assert!(c.iter().all(|e| e.kind == ConstraintKind::CorrectionSubmap));
    let submaps: Vec<u32> = c.iter().map(|e| g.node(e.to_id).unwrap().submap_id).collect();
    assert_eq!(submaps, vec![1, 2, 3, 4]);
}

#[test]
fn submap_anchor_already_in_use_is_kept() {
    let mut g = straight_line(0, 60, 1.0, 1_000_000_000);
    let mut bands = BandSet::splat(false);
    bands.large = true;
    let run = |g: &PoseGraph| {
        generate_constraints(&[verdict(5, bands)], g, 0, &payload_of(g), &identity_corr(60), &DiscrepancyConfig::default())
            .unwrap()
    };
    // without history submap 1 is represented by the node nearest its centroid
    assert!(run(&g).iter().any(|e| e.to_id == 14));
    // an earlier correction anchored at node 17 moves the choice there
    let earlier = RelativeConstraint::new(17, 33, Pose::identity(), Information::isotropic(0.1, 0.005), ConstraintKind::CorrectionSubmap).unwrap();
    g.extend_edges([earlier]).unwrap();
    let c = run(&g);
    assert!(c.iter().any(|e| e.to_id == 17));
    assert!(c.iter().all(|e| e.to_id != 14));
}

#[test]
fn empty_verdicts_give_no_constraints() {
    let g = straight_line(0, 10, 1.0, 1_000_000_000);
    let c = generate_constraints(&[], &g, 0, &payload_of(&g), &identity_corr(10), &DiscrepancyConfig::default())
        .unwrap();
    assert!(c.is_empty());
}

#[test]
fn missing_orientations_are_rejected() {
    let g = straight_line(0, 10, 1.0, 1_000_000_000);
    let mut p = payload_of(&g);
    p.orientations[3] = [0.0; 4];
    let mut bands = BandSet::splat(false);
    bands.small = true;
    let err = generate_constraints(&[verdict(3, bands)], &g, 0, &p, &identity_corr(10), &DiscrepancyConfig::default());
    assert!(err.is_err());
}

fn constraint(a: u64, b: u64, x: f64) -> RelativeConstraint {
    RelativeConstraint::new(
        a,
        b,
        Pose::from_translation(x, 0.0, 0.0),
        Information::correction_default(),
        ConstraintKind::CorrectionAdjacent,
    )
    .unwrap()
}

#[test]
fn upsert_replaces_only_on_real_change() {
    let existing = vec![constraint(1, 3, 2.0)];
    let (m, r) = upsert_constraints(&existing, &[constraint(1, 3, 2.10)], 0.05, 0.02);
    assert_eq!((r.added, r.updated, r.skipped), (0, 1, 0));
    assert_eq!(m[0].measurement.translation.x, 2.10);
    let (m, r) = upsert_constraints(&existing, &[constraint(1, 3, 2.01)], 0.05, 0.02);
    assert_eq!((r.added, r.updated, r.skipped), (0, 0, 1));
    assert_eq!(m, existing);
    let (m, r) = upsert_constraints(&existing, &[constraint(4, 6, 2.0)], 0.05, 0.02);
    assert_eq!((r.added, r.updated, r.skipped), (1, 0, 0));
    assert_eq!(m, vec![constraint(1, 3, 2.0), constraint(4, 6, 2.0)]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn analysis_is_deterministic_and_zero_for_identical_graphs(n in 5usize..50, seed in any::<u64>()) {
        let g = wandering(n, seed);
        let config = DiscrepancyConfig { thresholds: Thresholds::splat(1e-12), ..DiscrepancyConfig::default() };
        let p = payload_of(&g);
        let a = analyze(&p, &g, 0, &config, Exec::Parallel).unwrap();
        let b = analyze(&p, &g, 0, &config, Exec::Sequential).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert!(a.verdicts.is_empty());
    }

    #[test]
    fn drifted_robot_is_detected_deterministically(n in 20usize..50, seed in any::<u64>()) {
        let server = wandering(n, seed);
        let mut r = rng(seed ^ 11);
        let poses: Vec<Pose> = server.nodes().iter().enumerate().map(|(k, node)| {
            let bend = Pose::from_xyz_yaw(0.0, 0.0, 0.0, 0.01 * k as f64);
            bend.compose(&node.pose).retract(&Vector6::from_fn(|_, _| r.random_range(-0.01..0.01)))
        }).collect();
        let robot = server.with_poses(&poses);
        let p = payload_of(&server);
        let config = DiscrepancyConfig::default();
        let a = analyze(&p, &robot, 0, &config, Exec::Parallel).unwrap();
        let b = analyze(&p, &robot, 0, &config, Exec::Parallel).unwrap();
        prop_assert_eq!(&a, &b);
        let ca = generate_constraints(&a.verdicts, &robot, 0, &p, &a.correspondence, &config).unwrap();
        let cb = generate_constraints(&b.verdicts, &robot, 0, &p, &b.correspondence, &config).unwrap();
        prop_assert_eq!(&ca, &cb);
    }

    #[test]
    fn upsert_is_idempotent(xs in proptest::collection::vec((0u64..20, 1u64..5, -5.0f64..5.0), 0..30)) {
        // one entry per key, the last one wins
        let keyed: std::collections::BTreeMap<(u64, u64), f64> = xs.iter().map(|&(a, d, x)| ((a, a + d), x)).collect();
        let new: Vec<RelativeConstraint> = keyed.iter().map(|(&(a, b), &x)| constraint(a, b, x)).collect();
        let (once, _) = upsert_constraints(&[], &new, 0.05, 0.02);
        let (twice, r) = upsert_constraints(&once, &new, 0.05, 0.02);
        prop_assert_eq!(r.added, 0);
        let (thrice, r2) = upsert_constraints(&twice, &new, 0.05, 0.02);
        prop_assert_eq!(&twice, &thrice);
        prop_assert_eq!((r2.added, r2.updated), (0, 0));
        // keys stay unique
        let mut keys: Vec<_> = once.iter().map(|c| (c.from_id, c.to_id)).collect();
        keys.sort_unstable();
        keys.dedup();
        prop_assert_eq!(keys.len(), once.len());
    }
}

#[test]
fn synchronization_matches_by_time() {
    let g = straight_line(0, 20, 1.0, 1_000_000_000);
    let corr = synchronize(&payload_of(&g), &robot_proxy_nodes(&g, 0), 0, DEFAULT_SYNC_TOLERANCE_NS).unwrap();
    assert_eq!(corr.pairs, (0..20).map(|k| (k, k)).collect::<Vec<_>>());
}
