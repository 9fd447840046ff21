use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

use super::graph::PoseGraph;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("estimate and ground truth share no node ids")]
pub struct NoCommonNodes;

/// Rotation and translation mapping estimate positions onto ground truth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidAlignment {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl RigidAlignment {
    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }
}

/// Least-squares rigid alignment (no scale) of `source` onto `target`.
pub fn align_rigid(source: &[Vector3<f64>], target: &[Vector3<f64>]) -> RigidAlignment {
    assert_eq!(source.len(), target.len());
    let n = source.len() as f64;
    let cs = source.iter().sum::<Vector3<f64>>() / n;
    let ct = target.iter().sum::<Vector3<f64>>() / n;
    let mut h = Matrix3::zeros();
    for (s, t) in source.iter().zip(target) {
        h += (s - cs) * (t - ct).transpose();
    }
    let svd = h.svd(true, true);
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let v = v_t.transpose();
    let mut d = Matrix3::identity();
    if (v * u.transpose()).determinant() < 0.0 {
        d[(2, 2)] = -1.0;
    }
    let rotation = v * d * u.transpose();
    RigidAlignment {
        rotation,
        translation: ct - rotation * cs,
    }
}

/// Root mean square of residual magnitudes.
pub fn rms(residuals: &[f64]) -> f64 {
    if residuals.is_empty() {
        return 0.0;
    }
    (residuals.iter().map(|r| r * r).sum::<f64>() / residuals.len() as f64).sqrt()
}

/// RMSE of the absolute trajectory error over nodes present in both graphs,
/// after rigidly aligning the estimate to the ground truth.
pub fn rmse_ate(estimate: &PoseGraph, ground_truth: &PoseGraph) -> Result<f64, NoCommonNodes> {
    rmse_matched(estimate, ground_truth, |_| true)
}

/// As [`rmse_ate`], restricted to (and aligned over) one robot's nodes.
pub fn rmse_ate_robot(
    estimate: &PoseGraph,
    ground_truth: &PoseGraph,
    robot_id: u32,
) -> Result<f64, NoCommonNodes> {
    rmse_matched(estimate, ground_truth, |r| r == robot_id)
}

fn rmse_matched(
    estimate: &PoseGraph,
    ground_truth: &PoseGraph,
    robot: impl Fn(u32) -> bool,
) -> Result<f64, NoCommonNodes> {
    let mut src = Vec::new();
    let mut dst = Vec::new();
    for n in estimate.nodes().iter().filter(|n| robot(n.robot_id)) {
        if let Some(g) = ground_truth.node(n.node_id) {
            src.push(n.pose.translation);
            dst.push(g.pose.translation);
        }
    }
    if src.is_empty() {
        return Err(NoCommonNodes);
    }
    if src == dst {
        return Ok(0.0);
    }
    let align = align_rigid(&src, &dst);
    let residuals: Vec<f64> = src
        .iter()
        .zip(&dst)
        .map(|(s, t)| (align.apply(s) - t).norm())
        .collect();
    Ok(rms(&residuals))
}
