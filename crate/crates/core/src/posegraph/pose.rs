//! Rigid-body poses in SE(3) and the tangent-space maps used by the optimizer.

use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector3, Vector6};

/// A rigid transform: translation in meters and a Hamilton unit quaternion.
///
/// The quaternion is stored and exposed in `(w, x, y, z)` order. The
/// transform maps points from the body frame into the parent frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub translation: Vector3<f64>,
    pub rotation: UnitQuaternion<f64>,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            translation: Vector3::zeros(),
            rotation: UnitQuaternion::identity(),
        }
    }

    pub fn new(translation: Vector3<f64>, rotation: UnitQuaternion<f64>) -> Self {
        Self {
            translation,
            rotation,
        }
    }

    /// Builds a pose from raw quaternion components in `(w, x, y, z)` order.
    /// The quaternion is normalized.
    pub fn from_parts(translation: [f64; 3], wxyz: [f64; 4]) -> Self {
        let [w, x, y, z] = wxyz;
        Self {
            translation: Vector3::from(translation),
            rotation: UnitQuaternion::from_quaternion(Quaternion::new(w, x, y, z)),
        }
    }

    pub fn from_translation(x: f64, y: f64, z: f64) -> Self {
        Self {
            translation: Vector3::new(x, y, z),
            rotation: UnitQuaternion::identity(),
        }
    }

    /// Pose at `(x, y, z)` rotated by `yaw` radians about +z.
    pub fn from_xyz_yaw(x: f64, y: f64, z: f64, yaw: f64) -> Self {
        Self {
            translation: Vector3::new(x, y, z),
            rotation: UnitQuaternion::from_axis_angle(&Vector3::z_axis(), yaw),
        }
    }

    /// Quaternion components in `(w, x, y, z)` order.
    pub fn quaternion_wxyz(&self) -> [f64; 4] {
        let q = self.rotation.quaternion();
        [q.w, q.i, q.j, q.k]
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        self.rotation.to_rotation_matrix().into_inner()
    }

    /// `self · other`, renormalizing the quaternion.
    pub fn compose(&self, other: &Pose) -> Pose {
        let rotation = self.rotation * other.rotation;
        Pose {
            translation: self.translation + self.rotation * other.translation,
            rotation: UnitQuaternion::new_normalize(rotation.into_inner()),
        }
    }

    pub fn inverse(&self) -> Pose {
        let inv = self.rotation.inverse();
        Pose {
            translation: -(inv * self.translation),
            rotation: inv,
        }
    }

    /// `self⁻¹ · other`: the pose of `other` expressed in the frame of `self`.
    pub fn relative_to(&self, other: &Pose) -> Pose {
        let inv = self.rotation.inverse();
        Pose {
            translation: inv * (other.translation - self.translation),
            rotation: UnitQuaternion::new_normalize((inv * other.rotation).into_inner()),
        }
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.translation + self.rotation * p
    }

    /// Rotation angle of this pose in radians, in `[0, π]`.
    pub fn rotation_angle(&self) -> f64 {
        self.rotation.angle()
    }

    /// Applies a right perturbation `δ = [ρ; φ]`: `R ← R·Exp(φ)`, `t ← t + R·ρ`.
    pub fn retract(&self, delta: &Vector6<f64>) -> Pose {
        let rho = delta.fixed_rows::<3>(0).into_owned();
        let phi = delta.fixed_rows::<3>(3).into_owned();
        let dr = UnitQuaternion::from_scaled_axis(phi);
        Pose {
            translation: self.translation + self.rotation * rho,
            rotation: UnitQuaternion::new_normalize((self.rotation * dr).into_inner()),
        }
    }

    /// Tangent vector `[t; Log(R)]` of this pose. Translation first, matching
    /// the ordering of information matrices.
    pub fn log(&self) -> Vector6<f64> {
        let w = so3_log(&self.rotation);
        Vector6::new(
            self.translation.x,
            self.translation.y,
            self.translation.z,
            w.x,
            w.y,
            w.z,
        )
    }

    /// Largest componentwise deviation from `other` over translation and the
    /// rotation vector of `self⁻¹·other`.
    pub fn approx_eq(&self, other: &Pose, tol: f64) -> bool {
        let d = self.relative_to(other);
        (self.translation - other.translation).amax() <= tol && d.rotation_angle() <= tol
    }
}

/// Relative transform from `a` to `b`, i.e. `a⁻¹·b`.
pub fn relative_pose(a: &Pose, b: &Pose) -> Pose {
    a.relative_to(b)
}

pub fn compose(a: &Pose, b: &Pose) -> Pose {
    a.compose(b)
}

/// Rotation vector of a unit quaternion, with the angle in `[0, π]`.
pub fn so3_log(q: &UnitQuaternion<f64>) -> Vector3<f64> {
    // pick the short-way representative before extracting the axis
    let q = q.quaternion();
    let (w, v) = if q.w < 0.0 {
        (-q.w, -q.imag())
    } else {
        (q.w, q.imag())
    };
    let sin_half = v.norm();
    if sin_half < 1e-12 {
        // first-order series: θ/sin(θ/2) → 2
        return v * 2.0;
    }
    let angle = 2.0 * sin_half.atan2(w);
    v * (angle / sin_half)
}

pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Inverse of the right Jacobian of SO(3) at rotation vector `w`.
pub fn so3_right_jacobian_inv(w: &Vector3<f64>) -> Matrix3<f64> {
    let theta = w.norm();
    let k = skew(w);
    if theta < 1e-8 {
        return Matrix3::identity() + 0.5 * k + (1.0 / 12.0) * k * k;
    }
    let coef = 1.0 / (theta * theta) - (1.0 + theta.cos()) / (2.0 * theta * theta.sin());
    Matrix3::identity() + 0.5 * k + coef * k * k
}
