//! Relative-pose residual and its analytic Jacobians.
//!
//! For an edge with measurement `Z` between poses `Ti` and `Tj`, the error
//! transform is `E = Z⁻¹·Ti⁻¹·Tj` and the residual is `[t_E; Log(R_E)]`.
//! Jacobians are taken with respect to right perturbations
//! `R ← R·Exp(φ)`, `t ← t + R·ρ`, ordered `[ρ; φ]`.

use nalgebra::{Matrix6, Vector6};

use crate::posegraph::{skew, so3_right_jacobian_inv, Pose};

pub fn edge_residual(from: &Pose, to: &Pose, measurement: &Pose) -> Vector6<f64> {
    measurement.relative_to(&from.relative_to(to)).log()
}

/// Residual plus Jacobians with respect to the `from` and `to` poses.
pub fn edge_linearization(
    from: &Pose,
    to: &Pose,
    measurement: &Pose,
) -> (Vector6<f64>, Matrix6<f64>, Matrix6<f64>) {
    let r_i = from.rotation_matrix();
    let r_j = to.rotation_matrix();
    let r_z = measurement.rotation_matrix();
    let r_zt = r_z.transpose();
    let a = r_i.transpose() * (to.translation - from.translation);
    let r_e = r_zt * r_i.transpose() * r_j;

    let residual = edge_residual(from, to, measurement);
    let e_r = residual.fixed_rows::<3>(3).into_owned();
    let jr_inv = so3_right_jacobian_inv(&e_r);

    let mut j_from = Matrix6::zeros();
    j_from.fixed_view_mut::<3, 3>(0, 0).copy_from(&(-r_zt));
    j_from.fixed_view_mut::<3, 3>(0, 3).copy_from(&(r_zt * skew(&a)));
    j_from
        .fixed_view_mut::<3, 3>(3, 3)
        .copy_from(&(-jr_inv * r_e.transpose() * r_zt));

    let mut j_to = Matrix6::zeros();
    j_to.fixed_view_mut::<3, 3>(0, 0).copy_from(&r_e);
    j_to.fixed_view_mut::<3, 3>(3, 3).copy_from(&jr_inv);
    (residual, j_from, j_to)
}

/// Central finite-difference Jacobians of [`edge_residual`], for checking.
pub fn numeric_jacobians(from: &Pose, to: &Pose, measurement: &Pose, h: f64) -> (Matrix6<f64>, Matrix6<f64>) {
    let mut j_from = Matrix6::zeros();
    let mut j_to = Matrix6::zeros();
    for k in 0..6 {
        let mut d = Vector6::zeros();
        d[k] = h;
        let col = (edge_residual(&from.retract(&d), to, measurement)
            - edge_residual(&from.retract(&-d), to, measurement))
            / (2.0 * h);
        j_from.set_column(k, &col);
        let col = (edge_residual(from, &to.retract(&d), measurement)
            - edge_residual(from, &to.retract(&-d), measurement))
            / (2.0 * h);
        j_to.set_column(k, &col);
    }
    (j_from, j_to)
}
