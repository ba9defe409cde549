//! Composes a full calibration run: multi-feature LiDAR edge
//! extraction, image edge detection, and the joint pose solve.

use thiserror::Error;

use nalgebra::Vector3;

use crate::geometry::{CameraIntrinsics, RigidTransform};
use crate::image_edge::{canny, EdgePixelSet};
use crate::io::{CalibConfig, GrayImage, IntensityPointCloud};
use crate::lidar_edge::{
    extract_depth_continuous, extract_intensity_path, EdgeClass, EdgePoint3D, EdgeSegment3D,
    IntensityDiagnostics, LidarEdgeError, PlanarDiagnostics,
};
use crate::registration::{gauss_newton_solve, CalibrationReport, RegistrationError};

#[derive(Debug, Error)]
pub enum CalibrationError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    LidarEdge(#[from] LidarEdgeError),
    #[error(transparent)]
    Registration(#[from] RegistrationError),
}

/// LiDAR edges from every enabled extraction path.
#[derive(Debug, Clone)]
pub struct MultiFeatureEdges {
    pub points: Vec<EdgePoint3D>,
    /// Fold lines behind the depth-continuous points; empty when that
    /// path is disabled.
    pub segments: Vec<EdgeSegment3D>,
    pub planar: Option<PlanarDiagnostics>,
    pub intensity: Option<IntensityDiagnostics>,
}

/// Runs the planar and spherical-image extraction paths selected by the
/// config switches and merges their points. Disabling bias correction
/// zeroes the inflation offsets so the solver sees raw positions.
pub fn extract_multi_feature_edges(
    cloud: &IntensityPointCloud,
    cfg: &CalibConfig,
) -> Result<MultiFeatureEdges, LidarEdgeError> {
    let mut result = MultiFeatureEdges {
        points: Vec::new(),
        segments: Vec::new(),
        planar: None,
        intensity: None,
    };
    if cfg.use_depth_continuous {
        let planar = extract_depth_continuous(cloud, cfg)?;
        result.points.extend(planar.points);
        result.segments = planar.segments;
        result.planar = Some(planar.diagnostics);
    }
    if cfg.use_depth_discontinuous || cfg.use_intensity {
        let path = extract_intensity_path(cloud, cfg)?;
        result.points.extend(path.points.into_iter().filter(|p| {
            match p.edge_class {
                EdgeClass::DepthDiscontinuous => cfg.use_depth_discontinuous,
                EdgeClass::IntensityDiscontinuous => cfg.use_intensity,
                EdgeClass::DepthContinuous => true,
            }
        }));
        result.intensity = Some(path.diagnostics);
    }
    if !cfg.use_bias_correction {
        for p in &mut result.points {
            p.bias = Vector3::zeros();
        }
    }
    Ok(result)
}

/// Everything a calibration run produced. `report` is exactly what the
/// solver returned for the extracted features; the rest supports debug
/// dumps and overlays.
#[derive(Debug, Clone)]
pub struct CalibrationRun {
    pub report: CalibrationReport,
    pub edges: MultiFeatureEdges,
    pub image_edges: EdgePixelSet,
}

/// End-to-end calibration from one cloud and one image: extract LiDAR
/// edges per the config switches, detect image edges, and refine
/// `t_init` against them.
pub fn calibrate(
    cloud: &IntensityPointCloud,
    image: &GrayImage,
    k: &CameraIntrinsics,
    t_init: &RigidTransform,
    cfg: &CalibConfig,
) -> Result<CalibrationRun, CalibrationError> {
    cfg.validate().map_err(CalibrationError::Config)?;
    let edges = extract_multi_feature_edges(cloud, cfg)?;
    let image_edges = canny(image, cfg.gaussian_sigma, cfg.canny_low, cfg.canny_high);
    let report = gauss_newton_solve(&edges.points, &image_edges, k, t_init, cfg)?;
    Ok(CalibrationRun {
        report,
        edges,
        image_edges,
    })
}
