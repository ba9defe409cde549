//! SE(3)/SO(3) algebra, the camera projection model, and error metrics.
//!
//! Everything here is a pure function over immutable value types, safe to
//! share across threads. Angles are radians internally; degrees appear
//! only in the reporting metrics.

pub mod camera;
pub mod so3;

use nalgebra::{Matrix3, Vector3, Vector6};
use thiserror::Error;

pub use camera::CameraIntrinsics;

/// Tangent-space increment on SE(3): components `[0..3]` are rotational
/// (radians, so(3)) and `[3..6]` translational (meters).
pub type TangentVector = Vector6<f64>;

/// Rotational block of a tangent vector.
pub fn tangent_rot(delta: &TangentVector) -> Vector3<f64> {
    Vector3::new(delta[0], delta[1], delta[2])
}

/// Translational block of a tangent vector.
pub fn tangent_trans(delta: &TangentVector) -> Vector3<f64> {
    Vector3::new(delta[3], delta[4], delta[5])
}

/// Builds a tangent vector from rotational and translational blocks.
pub fn tangent_from_parts(rot: &Vector3<f64>, trans: &Vector3<f64>) -> TangentVector {
    Vector6::new(rot.x, rot.y, rot.z, trans.x, trans.y, trans.z)
}

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("matrix is not a rotation: {0}")]
    NotARotation(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}

/// A validated member of SO(3).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationMatrix(Matrix3<f64>);

impl RotationMatrix {
    pub fn identity() -> Self {
        RotationMatrix(Matrix3::identity())
    }

    /// Wraps a raw matrix after checking orthonormality and determinant +1
    /// (both within 1e-9).
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self, GeometryError> {
        let ortho = (m.transpose() * m - Matrix3::identity()).norm();
        if !ortho.is_finite() || ortho > 1e-9 {
            return Err(GeometryError::NotARotation(format!(
                "|R^T R - I| = {ortho:.3e}"
            )));
        }
        let det = m.determinant();
        if (det - 1.0).abs() > 1e-9 {
            return Err(GeometryError::NotARotation(format!("det = {det:.12}")));
        }
        Ok(RotationMatrix(m))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    /// Axis-angle vector with `exp_so3(self.log()) == self`.
    pub fn log(&self) -> Vector3<f64> {
        so3::log(&self.0)
    }

    pub fn inverse(&self) -> Self {
        RotationMatrix(self.0.transpose())
    }

    pub fn compose(&self, other: &RotationMatrix) -> Self {
        RotationMatrix(self.0 * other.0)
    }

    pub fn rotate(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.0 * p
    }
}

/// Rodrigues rotation for a finite axis-angle vector.
pub fn exp_so3(omega: &Vector3<f64>) -> RotationMatrix {
    RotationMatrix(so3::exp(omega))
}

/// Rigid body transform: `p_out = R * p_in + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: RotationMatrix,
    pub translation: Vector3<f64>,
}

impl RigidTransform {
    pub fn identity() -> Self {
        RigidTransform {
            rotation: RotationMatrix::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: RotationMatrix, translation: Vector3<f64>) -> Self {
        RigidTransform {
            rotation,
            translation,
        }
    }

    /// Applies the transform to a point.
    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.rotate(p) + self.translation
    }

    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation.compose(&other.rotation),
            translation: self.rotation.rotate(&other.translation) + self.translation,
        }
    }

    pub fn inverse(&self) -> RigidTransform {
        let rinv = self.rotation.inverse();
        RigidTransform {
            translation: -rinv.rotate(&self.translation),
            rotation: rinv,
        }
    }

    /// Left-multiplicative retraction `Exp(delta) * self`.
    ///
    /// Uses the full SE(3) exponential, so the translational block is
    /// coupled through the SO(3) left Jacobian. `boxplus(T, 0) == T`.
    pub fn boxplus(&self, delta: &TangentVector) -> RigidTransform {
        se3_exp(delta).compose(self)
    }
}

/// SE(3) exponential of a tangent vector, as a rigid transform.
pub fn se3_exp(delta: &TangentVector) -> RigidTransform {
    let omega = tangent_rot(delta);
    let rho = tangent_trans(delta);
    RigidTransform {
        rotation: RotationMatrix(so3::exp(&omega)),
        translation: so3::left_jacobian(&omega) * rho,
    }
}

/// SE(3) logarithm: the tangent vector with `se3_exp(se3_log(T)) == T`.
pub fn se3_log(t: &RigidTransform) -> TangentVector {
    let omega = t.rotation.log();
    let rho = so3::left_jacobian_inv(&omega) * t.translation;
    tangent_from_parts(&omega, &rho)
}

/// Rotation error in degrees: `acos((tr(R Rgt^T) - 1) / 2)`.
///
/// The acos argument is clamped to `[-1, 1]` to absorb round-off, so the
/// result always lands in `[0, 180]`.
pub fn rotation_error_deg(r: &RotationMatrix, r_gt: &RotationMatrix) -> f64 {
    let rel = r.matrix() * r_gt.matrix().transpose();
    let c = ((rel.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    c.acos().to_degrees()
}

/// Translation error in centimeters: Euclidean distance of two
/// translations given in meters.
pub fn translation_error_cm(t: &Vector3<f64>, t_gt: &Vector3<f64>) -> f64 {
    (t - t_gt).norm() * 100.0
}
