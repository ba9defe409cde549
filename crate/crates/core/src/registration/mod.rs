//! Extrinsic estimation from 3D edge points and 2D edge pixels.
//!
//! Each LiDAR edge point projects through the candidate extrinsics into
//! the image; its residual is the point-to-line distance to the nearest
//! image edge, weighted by the propagated sensor covariance. The solver
//! is Gauss-Newton on SE(3) with an outer re-matching loop.

pub mod noise;
pub mod solver;

pub use noise::{point_covariance, tangent_basis, NoiseModel};
pub use solver::{
    build_correspondences, gauss_newton_solve, residual, residual_jacobian, residual_variance,
    CalibrationReport, Correspondence, EdgeClassCounts,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum RegistrationError {
    /// A LiDAR point at the sensor origin has no bearing direction.
    #[error("point at zero range has undefined bearing")]
    ZeroRangePoint,
    /// Fewer correspondences than the minimum needed for a 6-DoF solve.
    #[error("only {0} correspondences, need at least {1}")]
    InsufficientCorrespondences(usize, usize),
    /// The normal equations are numerically singular.
    #[error("degenerate geometry: normal equations condition number {0:.3e}")]
    DegenerateGeometry(f64),
    /// A point projected behind the camera during linearization.
    #[error("point behind camera during linearization")]
    BehindCamera,
}
