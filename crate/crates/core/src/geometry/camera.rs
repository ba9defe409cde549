//! Pinhole camera with Brown-Conrady distortion.
//!
//! Projection maps a point in the camera frame (x right, y down, z
//! forward) to pixel coordinates. The distortion polynomial uses the
//! common five-coefficient layout `[k1, k2, p1, p2, k3]`.

use nalgebra::{Matrix2x3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

/// Intrinsic parameters plus image size in pixels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    /// `[k1, k2, p1, p2, k3]`; all zero means an ideal pinhole.
    pub dist: [f64; 5],
    pub width: u32,
    pub height: u32,
}

impl CameraIntrinsics {
    /// True when the pixel lies inside the image rectangle.
    pub fn contains(&self, uv: &Vector2<f64>) -> bool {
        uv.x >= 0.0 && uv.y >= 0.0 && uv.x < self.width as f64 && uv.y < self.height as f64
    }

    fn distort_normalized(&self, x: f64, y: f64) -> (f64, f64) {
        let [k1, k2, p1, p2, k3] = self.dist;
        let r2 = x * x + y * y;
        let radial = 1.0 + k1 * r2 + k2 * r2 * r2 + k3 * r2 * r2 * r2;
        let xd = x * radial + 2.0 * p1 * x * y + p2 * (r2 + 2.0 * x * x);
        let yd = y * radial + p1 * (r2 + 2.0 * y * y) + 2.0 * p2 * x * y;
        (xd, yd)
    }

    /// Projects a camera-frame point to pixels. Returns `None` when the
    /// point is not strictly in front of the camera (`z <= 0`) or when the
    /// result lands outside the image.
    pub fn project(&self, p: &Vector3<f64>) -> Option<Vector2<f64>> {
        if !(p.z > 1e-9) {
            return None;
        }
        let (xd, yd) = self.distort_normalized(p.x / p.z, p.y / p.z);
        let uv = Vector2::new(self.fx * xd + self.cx, self.fy * yd + self.cy);
        self.contains(&uv).then_some(uv)
    }

    /// Jacobian of the projection with respect to the camera-frame point,
    /// evaluated at `p`. Valid only where `project` succeeds.
    pub fn project_jacobian(&self, p: &Vector3<f64>) -> Matrix2x3<f64> {
        let (x, y, z) = (p.x, p.y, p.z);
        let inv_z = 1.0 / z;
        let xn = x * inv_z;
        let yn = y * inv_z;

        // d(distorted)/d(normalized), 2x2
        let [k1, k2, p1, p2, k3] = self.dist;
        let r2 = xn * xn + yn * yn;
        let radial = 1.0 + k1 * r2 + k2 * r2 * r2 + k3 * r2 * r2 * r2;
        let dradial_dr2 = k1 + 2.0 * k2 * r2 + 3.0 * k3 * r2 * r2;
        let dxd_dxn = radial + xn * dradial_dr2 * 2.0 * xn + 2.0 * p1 * yn + 6.0 * p2 * xn;
        let dxd_dyn = xn * dradial_dr2 * 2.0 * yn + 2.0 * p1 * xn + 2.0 * p2 * yn;
        let dyd_dxn = yn * dradial_dr2 * 2.0 * xn + 2.0 * p1 * xn + 2.0 * p2 * yn;
        let dyd_dyn = radial + yn * dradial_dr2 * 2.0 * yn + 6.0 * p1 * yn + 2.0 * p2 * xn;

        // d(normalized)/d(point), 2x3
        let dn = Matrix2x3::new(
            inv_z, 0.0, -x * inv_z * inv_z, //
            0.0, inv_z, -y * inv_z * inv_z,
        );

        let dd = nalgebra::Matrix2::new(dxd_dxn, dxd_dyn, dyd_dxn, dyd_dyn);
        let df = nalgebra::Matrix2::new(self.fx, 0.0, 0.0, self.fy);
        df * dd * dn
    }

    /// Inverts the distortion by fixed-point iteration and returns the unit
    /// ray through the pixel. Converges for the mild distortions this tool
    /// expects; iteration is capped at 20 rounds.
    pub fn unproject(&self, uv: &Vector2<f64>) -> Vector3<f64> {
        let xd = (uv.x - self.cx) / self.fx;
        let yd = (uv.y - self.cy) / self.fy;
        let (mut x, mut y) = (xd, yd);
        for _ in 0..20 {
            let (ex, ey) = self.distort_normalized(x, y);
            let (nx, ny) = (x + (xd - ex), y + (yd - ey));
            if (nx - x).abs() < 1e-12 && (ny - y).abs() < 1e-12 {
                x = nx;
                y = ny;
                break;
            }
            x = nx;
            y = ny;
        }
        Vector3::new(x, y, 1.0).normalize()
    }
}
