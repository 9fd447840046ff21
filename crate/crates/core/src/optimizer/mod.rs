//! Levenberg-Marquardt pose-graph optimization over SE(3).

mod residual;

pub use residual::{edge_linearization, edge_residual, numeric_jacobians};

use std::collections::{BTreeMap, VecDeque};
use std::time::Instant;

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};
use nalgebra::{DMatrix, DVector, Matrix6, Vector6};
use thiserror::Error;

use crate::par::{self, Exec};
use crate::posegraph::{ConstraintKind, NodeId, Pose, PoseGraph};

/// Costs below this are indistinguishable from rounding noise.
const COST_FLOOR: f64 = 1e-24;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimizerError {
    #[error("gauge node {0} is not in the graph")]
    UnknownGauge(NodeId),
    #[error("node {0} is not connected to the gauge")]
    Disconnected(NodeId),
    #[error("cost did not decrease at maximum damping")]
    NumericalFailure,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmSettings {
    pub max_iterations: usize,
    /// Stop when an accepted step lowers the cost by less than this fraction.
    pub tolerance: f64,
    pub lambda_init: f64,
    pub lambda_factor: f64,
    pub lambda_max: f64,
    /// Huber threshold applied to loop-closure edges, if any.
    pub loop_closure_huber: Option<f64>,
    /// Problems with fewer free nodes than this use a dense solve.
    pub dense_threshold: usize,
}

impl Default for LmSettings {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            tolerance: 1e-10,
            lambda_init: 1e-4,
            lambda_factor: 10.0,
            lambda_max: 1e12,
            loop_closure_huber: None,
            dense_threshold: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationProblem {
    pub graph: PoseGraph,
    pub gauge: NodeId,
    pub settings: LmSettings,
}

impl OptimizationProblem {
    /// Problem anchored at the first node of the graph with default settings.
    pub fn new(graph: PoseGraph) -> Self {
        let gauge = graph.nodes().first().map_or(0, |n| n.node_id);
        Self {
            graph,
            gauge,
            settings: LmSettings::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizationReport {
    pub initial_cost: f64,
    pub final_cost: f64,
    pub iterations: usize,
    pub converged: bool,
    pub wall_time_ms: f64,
}

/// Sum of `rᵀ·Ω·r` over all edges.
pub fn chi2(g: &PoseGraph) -> f64 {
    g.edges()
        .iter()
        .map(|e| {
            let a = &g.node(e.from_id).expect("edge endpoint").pose;
            let b = &g.node(e.to_id).expect("edge endpoint").pose;
            let r = edge_residual(a, b, &e.measurement);
            (r.transpose() * e.information.matrix() * r)[0]
        })
        .sum()
}

pub fn optimize(p: &OptimizationProblem) -> Result<(PoseGraph, OptimizationReport), OptimizerError> {
    optimize_with(p, Exec::default())
}

/// Like [`optimize`]; `exec` controls how edge linearization is scheduled.
/// The result does not depend on it.
pub fn optimize_with(p: &OptimizationProblem, exec: Exec) -> Result<(PoseGraph, OptimizationReport), OptimizerError> {
    let start = Instant::now();
    let g = &p.graph;
    let gauge = g.index_of(p.gauge).ok_or(OptimizerError::UnknownGauge(p.gauge))?;
    check_connected(g, gauge)?;

    let n = g.len();
    // column block of every free node; the gauge has none
    let block: Vec<Option<usize>> = (0..n)
        .map(|i| match i.cmp(&gauge) {
            std::cmp::Ordering::Less => Some(i),
            std::cmp::Ordering::Equal => None,
            std::cmp::Ordering::Greater => Some(i - 1),
        })
        .collect();
    let edges: Vec<Edge> = g
        .edges()
        .iter()
        .map(|e| Edge {
            from: g.index_of(e.from_id).expect("edge endpoint"),
            to: g.index_of(e.to_id).expect("edge endpoint"),
            measurement: e.measurement,
            information: *e.information.matrix(),
            huber: match (e.kind, p.settings.loop_closure_huber) {
                (ConstraintKind::LoopClosure, Some(d)) => Some(d),
                _ => None,
            },
        })
        .collect();

    let s = &p.settings;
    let mut poses: Vec<Pose> = g.nodes().iter().map(|n| n.pose).collect();
    let mut cost = total_cost(&edges, &poses);
    let initial_cost = cost;
    let mut lambda = s.lambda_init;
    let mut iterations = 0;
    let mut converged = n < 2 || edges.is_empty() || cost <= COST_FLOOR;

    while !converged && iterations < s.max_iterations {
        iterations += 1;
        let system = build_system(&edges, &poses, &block, n - 1, exec);
        if system.gradient_norm() <= 1e-14 * (1.0 + cost) {
            converged = true;
            break;
        }
        loop {
            let trial = solve(&system, lambda, s.dense_threshold).map(|dx| {
                let mut t = poses.clone();
                for (i, b) in block.iter().enumerate() {
                    if let Some(b) = b {
                        t[i] = t[i].retract(&Vector6::from_column_slice(&dx[6 * b..6 * b + 6]));
                    }
                }
                t
            });
            if let Some(trial) = trial {
                let trial_cost = total_cost(&edges, &trial);
                if trial_cost < cost {
                    let decrease = cost - trial_cost;
                    poses = trial;
                    cost = trial_cost;
                    lambda = (lambda / s.lambda_factor).max(1e-15);
                    if decrease <= s.tolerance * (cost + decrease) || cost <= COST_FLOOR {
                        converged = true;
                    }
                    break;
                }
                if (trial_cost - cost).abs() <= s.tolerance * cost + COST_FLOOR {
                    // already at the floor set by rounding
                    converged = true;
                    break;
                }
            }
            lambda *= s.lambda_factor;
            if lambda > s.lambda_max {
                return Err(OptimizerError::NumericalFailure);
            }
        }
    }

    let report = OptimizationReport {
        initial_cost,
        final_cost: cost,
        iterations,
        converged,
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
    };
    Ok((g.with_poses(&poses), report))
}

struct Edge {
    from: usize,
    to: usize,
    measurement: Pose,
    information: Matrix6<f64>,
    huber: Option<f64>,
}

impl Edge {
    /// Robust cost and the IRLS weight for a whitened squared error.
    fn robust(&self, sq: f64) -> (f64, f64) {
        match self.huber {
            Some(d) if sq > d * d => {
                let e = sq.sqrt();
                (2.0 * d * e - d * d, d / e)
            }
            _ => (sq, 1.0),
        }
    }
}

fn total_cost(edges: &[Edge], poses: &[Pose]) -> f64 {
    edges
        .iter()
        .map(|e| {
            let r = edge_residual(&poses[e.from], &poses[e.to], &e.measurement);
            e.robust((r.transpose() * e.information * r)[0]).0
        })
        .sum()
}

fn check_connected(g: &PoseGraph, gauge: usize) -> Result<(), OptimizerError> {
    let n = g.len();
    let mut adj = vec![Vec::new(); n];
    for e in g.edges() {
        let a = g.index_of(e.from_id).expect("edge endpoint");
        let b = g.index_of(e.to_id).expect("edge endpoint");
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut seen = vec![false; n];
    seen[gauge] = true;
    let mut queue = VecDeque::from([gauge]);
    while let Some(i) = queue.pop_front() {
        for &j in &adj[i] {
            if !seen[j] {
                seen[j] = true;
                queue.push_back(j);
            }
        }
    }
    match seen.iter().position(|&s| !s) {
        Some(i) => Err(OptimizerError::Disconnected(g.nodes()[i].node_id)),
        None => Ok(()),
    }
}

/// Gauss-Newton normal equations in 6×6 blocks (lower triangle only).
struct System {
    blocks: usize,
    hessian: BTreeMap<(usize, usize), Matrix6<f64>>,
    gradient: DVector<f64>,
}

impl System {
    fn gradient_norm(&self) -> f64 {
        self.gradient.amax()
    }

    fn damped_diagonal(&self, b: usize, k: usize, lambda: f64) -> f64 {
        let d = self.hessian.get(&(b, b)).map_or(0.0, |m| m[(k, k)]);
        lambda * d.max(1e-12)
    }
}

fn build_system(edges: &[Edge], poses: &[Pose], block: &[Option<usize>], blocks: usize, exec: Exec) -> System {
    let lin = par::map(exec, edges, |e| {
        let (r, ja, jb) = edge_linearization(&poses[e.from], &poses[e.to], &e.measurement);
        let w = e.robust((r.transpose() * e.information * r)[0]).1;
        (r, ja, jb, e.information * w)
    });
    let mut hessian: BTreeMap<(usize, usize), Matrix6<f64>> = BTreeMap::new();
    let mut gradient = DVector::zeros(6 * blocks);
    for (e, (r, ja, jb, omega)) in edges.iter().zip(&lin) {
        let terms = [(block[e.from], ja), (block[e.to], jb)];
        for &(bi, ji) in &terms {
            let Some(bi) = bi else { continue };
            let g = ji.transpose() * omega * r;
            let mut seg = gradient.rows_mut(6 * bi, 6);
            seg += g;
            for &(bj, jj) in &terms {
                let Some(bj) = bj else { continue };
                if bj <= bi {
                    *hessian.entry((bi, bj)).or_insert_with(Matrix6::zeros) += ji.transpose() * omega * jj;
                }
            }
        }
    }
    System {
        blocks,
        hessian,
        gradient,
    }
}

/// Solves `(H + λ·diag(H))·dx = −g`; `None` if the factorization fails.
fn solve(s: &System, lambda: f64, dense_threshold: usize) -> Option<Vec<f64>> {
    let dim = 6 * s.blocks;
    if s.blocks < dense_threshold {
        let mut h = DMatrix::zeros(dim, dim);
        for (&(bi, bj), m) in &s.hessian {
            h.view_mut((6 * bi, 6 * bj), (6, 6)).copy_from(m);
            if bi != bj {
                h.view_mut((6 * bj, 6 * bi), (6, 6)).copy_from(&m.transpose());
            }
        }
        for b in 0..s.blocks {
            for k in 0..6 {
                h[(6 * b + k, 6 * b + k)] += s.damped_diagonal(b, k, lambda);
            }
        }
        let dx = h.cholesky()?.solve(&(-&s.gradient));
        return Some(dx.iter().copied().collect());
    }

    let mut triplets = Vec::with_capacity(s.hessian.len() * 36);
    for (&(bi, bj), m) in &s.hessian {
        for r in 0..6 {
            for c in 0..6 {
                let (row, col) = (6 * bi + r, 6 * bj + c);
                if row >= col {
                    let mut v = m[(r, c)];
                    if row == col {
                        v += s.damped_diagonal(bi, r, lambda);
                    }
                    triplets.push(Triplet::new(row, col, v));
                }
            }
        }
    }
    let h = SparseColMat::<usize, f64>::try_new_from_triplets(dim, dim, &triplets).ok()?;
    let llt = h.sp_cholesky(Side::Lower).ok()?;
    let rhs = Mat::from_fn(dim, 1, |i, _| -s.gradient[i]);
    let dx = llt.solve(&rhs);
    let out: Vec<f64> = (0..dim).map(|i| dx[(i, 0)]).collect();
    out.iter().all(|v| v.is_finite()).then_some(out)
}
