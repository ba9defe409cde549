//! Sensor noise model and first-order covariance of a LiDAR return.
//!
//! A return decomposes into range noise along the bearing and bearing
//! noise in the tangent plane, which grows linearly with distance when
//! mapped to Cartesian coordinates.

use nalgebra::{Matrix3, Vector3};

use crate::io::CalibConfig;

use super::RegistrationError;

/// Standard deviations of the three measurement channels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    /// LiDAR range sigma (m).
    pub range_sigma: f64,
    /// LiDAR bearing sigma, isotropic in the tangent plane (rad).
    pub bearing_sigma: f64,
    /// Image edge localization sigma, isotropic (px).
    pub camera_sigma: f64,
}

impl NoiseModel {
    pub fn from_config(cfg: &CalibConfig) -> NoiseModel {
        NoiseModel {
            range_sigma: cfg.range_sigma,
            bearing_sigma: cfg.bearing_sigma,
            camera_sigma: cfg.camera_sigma,
        }
    }
}

/// Deterministic orthonormal basis (b1, b2) of the plane perpendicular
/// to the unit vector `w`: Gram-Schmidt against the coordinate axis of
/// smallest |w| component (lowest index on ties).
pub fn tangent_basis(w: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let a = [w.x.abs(), w.y.abs(), w.z.abs()];
    let mut axis = 0;
    for i in 1..3 {
        if a[i] < a[axis] {
            axis = i;
        }
    }
    let mut e = Vector3::zeros();
    e[axis] = 1.0;
    let b1 = (e - w * w.dot(&e)).normalize();
    let b2 = w.cross(&b1);
    (b1, b2)
}

/// Covariance of a Cartesian return at `point`: with bearing w =
/// point/d and tangent basis (b1, b2), A = [w | d·b1 | d·b2] and
/// Σ = A·diag(Σ_d², Σ_ω², Σ_ω²)·Aᵀ. Symmetric PSD by construction.
pub fn point_covariance(
    point: &Vector3<f64>,
    model: &NoiseModel,
) -> Result<Matrix3<f64>, RegistrationError> {
    let d = point.norm();
    if !(d > 0.0) {
        return Err(RegistrationError::ZeroRangePoint);
    }
    let w = point / d;
    let (b1, b2) = tangent_basis(&w);
    let a = Matrix3::from_columns(&[w, d * b1, d * b2]);
    let s2 = model.range_sigma * model.range_sigma;
    let w2 = model.bearing_sigma * model.bearing_sigma;
    let diag = Matrix3::from_diagonal(&Vector3::new(s2, w2, w2));
    Ok(a * diag * a.transpose())
}
