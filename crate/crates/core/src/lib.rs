//! Targetless LiDAR-camera extrinsic calibration from a single dense
//! intensity scan and one image.
//!
//! The pipeline extracts three families of edge features from the point
//! cloud (depth-continuous plane intersections, depth-discontinuous
//! silhouettes, intensity transitions on planar surfaces), corrects the
//! systematic beam-footprint inflation on silhouette points, and aligns
//! them to image edges with a covariance-weighted Gauss-Newton solve on
//! SE(3).

pub mod geometry;
pub mod image_edge;
pub mod io;
pub mod lidar_edge;
pub mod pipeline;
pub mod registration;

pub use geometry::{CameraIntrinsics, RigidTransform, RotationMatrix, TangentVector};
pub use io::{CalibConfig, GrayImage, IntensityPointCloud};
pub use lidar_edge::{EdgeClass, EdgePoint3D};
pub use pipeline::{calibrate, extract_multi_feature_edges, CalibrationError, CalibrationRun};
