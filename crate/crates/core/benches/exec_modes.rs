//! Sequential against parallel execution for the hot paths.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use graph_sync::discrepancy::{analyze, DiscrepancyConfig};
use graph_sync::monitor::{make_broadcast_with, MonitorConfig};
use graph_sync::optimizer::{optimize_with, OptimizationProblem};
use graph_sync::par::Exec;
use graph_sync::posegraph::PoseGraph;
use graph_sync::proxy::{build_proxy_with, laplacian, ProxyParams};
use graph_sync::sim::{generate_scenario, run_epochs, RunConfig, Scenario, ScenarioData};
use graph_sync::spectral::{eigendecompose, wavelet_features_with, FilterBank, DEFAULT_SCALE_COUNT};

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn tunnel() -> ScenarioData {
    generate_scenario(&Scenario::preset("tunnel", 1).unwrap()).unwrap()
}

/// The first `n` nodes of a graph with the edges between them.
fn prefix(g: &PoseGraph, n: usize) -> PoseGraph {
    let mut out = PoseGraph::new("world");
    for node in &g.nodes()[..n] {
        out.add_node(*node).unwrap();
    }
    let last = g.nodes()[n - 1].node_id;
    out.extend_edges(g.edges().iter().copied().filter(|e| e.from_id <= last && e.to_id <= last))
        .unwrap();
    out
}

fn proxy(c: &mut Criterion) {
    let data = tunnel();
    let nodes = data.robots[0].ground_truth.nodes();
    let params = ProxyParams::default();
    let mut group = c.benchmark_group("build_proxy_2000");
    for (name, exec) in MODES {
        group.bench_function(name, |b| b.iter(|| build_proxy_with(nodes, &params, exec).unwrap()));
    }
    group.finish();
}

fn wavelets(c: &mut Criterion) {
    let data = tunnel();
    let mut group = c.benchmark_group("wavelet_features");
    for n in [200, 600] {
        let nodes = &data.robots[0].ground_truth.nodes()[..n];
        let p = graph_sync::proxy::build_proxy(nodes, &ProxyParams::default()).unwrap();
        let basis = eigendecompose(&laplacian(&p)).unwrap();
        let bank = FilterBank::meyer(basis.lambda_max(), DEFAULT_SCALE_COUNT).unwrap();
        let origin = p.node(0).position;
        let f: Vec<f64> = p.nodes().iter().map(|v| (v.position - origin).norm()).collect();
        for (name, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(name, n), &f, |b, f| {
                b.iter(|| wavelet_features_with(&basis, &bank, f, exec).unwrap())
            });
        }
    }
    group.finish();
}

fn broadcast_and_analysis(c: &mut Criterion) {
    let data = tunnel();
    let truth = prefix(&data.robots[0].ground_truth, 500);
    let odometry = prefix(&data.robots[0].odometry, 500);
    let monitor = MonitorConfig::default();
    let config = DiscrepancyConfig::default();

    let mut group = c.benchmark_group("monitor_500");
    group.sample_size(20);
    for (name, exec) in MODES {
        group.bench_function(name, |b| b.iter(|| make_broadcast_with(&truth, 0, &monitor, exec).unwrap()));
    }
    group.finish();

    let payload = make_broadcast_with(&truth, 0, &monitor, Exec::Sequential).unwrap().payload;
    let mut group = c.benchmark_group("analyze_500");
    group.sample_size(20);
    for (name, exec) in MODES {
        group.bench_function(name, |b| b.iter(|| analyze(&payload, &odometry, 0, &config, exec).unwrap()));
    }
    group.finish();
}

fn optimizer(c: &mut Criterion) {
    // a corrected onboard graph: odometry plus the constraints a short run added
    let scenario = Scenario::preset("euroc-like", 2).unwrap();
    let data = generate_scenario(&scenario).unwrap();
    let run = run_epochs(&data, &RunConfig { epochs: Some(3), ..RunConfig::default() }).unwrap();
    let problem = OptimizationProblem::new(run.onboard[0].clone());
    let mut group = c.benchmark_group("optimize");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(name, |b| b.iter(|| optimize_with(&problem, exec).unwrap()));
    }
    group.finish();
}

fn closed_loop(c: &mut Criterion) {
    let data = generate_scenario(&Scenario::preset("euroc-like", 2).unwrap()).unwrap();
    let mut group = c.benchmark_group("run_epochs_3");
    group.sample_size(10);
    for (name, exec) in MODES {
        let config = RunConfig {
            epochs: Some(3),
            exec,
            ..RunConfig::default()
        };
        group.bench_function(name, |b| b.iter(|| run_epochs(&data, &config).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, proxy, wavelets, broadcast_and_analysis, optimizer, closed_loop);
criterion_main!(benches);
