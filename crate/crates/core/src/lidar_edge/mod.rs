//! LiDAR-side edge extraction: the planar path intersects fitted voxel
//! planes into depth-continuous edges; the intensity path projects the
//! cloud into a spherical intensity image and pulls depth-discontinuous
//! and intensity-discontinuous edges out of it.

pub mod intensity;
pub mod planar;

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

pub use intensity::{
    beam_bias, extract_and_classify, extract_intensity_path, remap_to_3d, spherical_project,
    IntensityDiagnostics, IntensityPathResult, SphericalImage,
};
pub use planar::{
    extract_depth_continuous, fit_planes, intersect_planes, voxelize, DepthContinuousResult,
    EdgeSegment3D, PairRejection, PlanarDiagnostics, PlanePatch, VoxelGrid,
};

#[derive(Debug, Error)]
pub enum LidarEdgeError {
    #[error("degenerate ranges: no point with positive range")]
    DegenerateRanges,
    #[error("beam bias direction degenerate: plane normal parallel to edge")]
    DegenerateBiasDirection,
    #[error("empty cloud")]
    EmptyCloud,
}

/// Which physical discontinuity produced an edge point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EdgeClass {
    /// Two surfaces meeting; depth varies smoothly across the edge.
    DepthContinuous,
    /// Foreground silhouette against a more distant background.
    DepthDiscontinuous,
    /// Reflectance change on a single surface.
    IntensityDiscontinuous,
}

/// A 3D edge feature in the LiDAR frame, ready for registration.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgePoint3D {
    pub position: Vector3<f64>,
    pub edge_class: EdgeClass,
    /// Beam-footprint inflation offset; zero unless depth-discontinuous.
    pub bias: Vector3<f64>,
    /// Measurement covariance of the position (m²).
    pub covariance: Matrix3<f64>,
    /// Normal of the surface the edge lies on, when derivable.
    pub plane_normal: Option<Vector3<f64>>,
}

impl EdgePoint3D {
    /// Position after subtracting the inflation bias.
    pub fn corrected_position(&self) -> Vector3<f64> {
        self.position - self.bias
    }
}

/// splitmix64 step, used to derive independent per-cell RNG streams from
/// one user seed without any dependence on iteration order.
pub(crate) fn mix_seed(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}
