//! so(3) exponential/logarithm maps and the SO(3) left Jacobian.
//!
//! All functions switch to Taylor expansions below `SMALL_ANGLE` so they
//! stay accurate through the zero-rotation limit.

use nalgebra::{Matrix3, Vector3};

const SMALL_ANGLE: f64 = 1e-6;

/// Skew-symmetric matrix of `w`, i.e. `hat(w) * v == w x v`.
pub fn hat(w: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}

/// Rodrigues formula: rotation matrix for the axis-angle vector `omega`.
pub fn exp(omega: &Vector3<f64>) -> Matrix3<f64> {
    let theta2 = omega.norm_squared();
    let k = hat(omega);
    let k2 = k * k;
    let (a, b) = if theta2 < SMALL_ANGLE * SMALL_ANGLE {
        // sin(t)/t and (1-cos(t))/t^2
        (1.0 - theta2 / 6.0, 0.5 - theta2 / 24.0)
    } else {
        let theta = theta2.sqrt();
        (theta.sin() / theta, (1.0 - theta.cos()) / theta2)
    };
    Matrix3::identity() + a * k + b * k2
}

/// Inverse of [`exp`]; returns the axis-angle vector of a rotation matrix.
///
/// The angle lands in `[0, pi]`. At exactly `pi` the axis sign is
/// arbitrary; a deterministic sign is chosen from the largest axis
/// component so repeated calls agree.
pub fn log(r: &Matrix3<f64>) -> Vector3<f64> {
    let cos_theta = ((r.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    let theta = cos_theta.acos();
    let vee = Vector3::new(
        r[(2, 1)] - r[(1, 2)],
        r[(0, 2)] - r[(2, 0)],
        r[(1, 0)] - r[(0, 1)],
    );
    if theta < SMALL_ANGLE {
        // log(R) ~ vee/2 * (1 + theta^2/6)
        return vee * 0.5 * (1.0 + theta * theta / 6.0);
    }
    if (std::f64::consts::PI - theta) < 1e-5 {
        // Near pi the vee route loses precision; recover the axis from
        // the diagonal of R + I = 2(I*cos + (1-cos) aa^T) at cos ~ -1.
        let b = r + Matrix3::identity();
        let (k, _) = (0..3)
            .map(|i| (i, b[(i, i)]))
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .unwrap();
        let axis = b.column(k).into_owned().normalize();
        // Orient so the small remaining vee part (if any) agrees.
        let axis = if vee.dot(&axis) < 0.0 { -axis } else { axis };
        return axis * theta;
    }
    vee * (theta / (2.0 * theta.sin()))
}

/// Left Jacobian of SO(3): couples the translational tangent component
/// into the SE(3) exponential.
pub fn left_jacobian(omega: &Vector3<f64>) -> Matrix3<f64> {
    let theta2 = omega.norm_squared();
    let k = hat(omega);
    let k2 = k * k;
    let (b, c) = if theta2 < SMALL_ANGLE * SMALL_ANGLE {
        // (1-cos t)/t^2 and (t - sin t)/t^3
        (0.5 - theta2 / 24.0, 1.0 / 6.0 - theta2 / 120.0)
    } else {
        let theta = theta2.sqrt();
        (
            (1.0 - theta.cos()) / theta2,
            (theta - theta.sin()) / (theta2 * theta),
        )
    };
    Matrix3::identity() + b * k + c * k2
}

/// Inverse of [`left_jacobian`].
pub fn left_jacobian_inv(omega: &Vector3<f64>) -> Matrix3<f64> {
    let theta2 = omega.norm_squared();
    let k = hat(omega);
    let k2 = k * k;
    let c = if theta2 < SMALL_ANGLE * SMALL_ANGLE {
        1.0 / 12.0 + theta2 / 720.0
    } else {
        let theta = theta2.sqrt();
        1.0 / theta2 - (1.0 + theta.cos()) / (2.0 * theta * theta.sin())
    };
    Matrix3::identity() - 0.5 * k + c * k2
}
