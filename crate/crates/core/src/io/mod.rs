//! File formats: point clouds (PCD/PLY), gray images (PNG/PGM), the
//! line-oriented config grammar, and the JSON extrinsics/intrinsics
//! contracts.
//!
//! Parsers are independent per file and everything they return is
//! immutable after load. Loaders never fabricate data: parsed counts are
//! at most the declared counts, and silently skipped records are counted
//! and reported back to the caller.

pub mod colorize;
pub mod config;
pub mod image;
pub mod json;
pub mod pcd;
pub mod ply;

use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use thiserror::Error;

pub use colorize::write_colored_cloud;
pub use config::CalibConfig;
pub use image::{read_image, write_pgm, write_png, GrayImage};
pub use json::{read_extrinsics, read_intrinsics, write_extrinsics, write_intrinsics};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {detail}", path.display())]
    Malformed { path: PathBuf, detail: String },
    #[error("{}: intensity channel required", .0.display())]
    IntensityRequired(PathBuf),
    #[error("{}: {detail}", path.display())]
    Config { path: PathBuf, detail: String },
}

impl IoError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        IoError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

impl IoError {
    fn malformed(path: &Path, detail: impl Into<String>) -> Self {
        IoError::Malformed {
            path: path.to_path_buf(),
            detail: detail.into(),
        }
    }
}

/// One LiDAR return. Coordinates are stored in the 32-bit precision of
/// the on-disk formats; math elsewhere promotes to f64.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CloudPoint {
    pub x: f32,
    pub y: f32,
    pub z: f32,
    pub intensity: f32,
}

impl CloudPoint {
    pub fn position(&self) -> Vector3<f64> {
        Vector3::new(self.x as f64, self.y as f64, self.z as f64)
    }

    /// Finite coordinates and a finite, non-negative intensity.
    pub fn is_valid(&self) -> bool {
        self.x.is_finite()
            && self.y.is_finite()
            && self.z.is_finite()
            && self.intensity.is_finite()
            && self.intensity >= 0.0
    }
}

/// Point cloud with a reflectance channel, in the LiDAR frame.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IntensityPointCloud {
    pub points: Vec<CloudPoint>,
}

impl IntensityPointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Reads a cloud from PCD (ASCII or little-endian binary) or ASCII PLY,
/// sniffing the format from the file's leading bytes. Returns the cloud
/// and the number of records dropped for violating point invariants
/// (non-finite coordinates, negative intensity).
pub fn read_point_cloud(path: &Path) -> Result<(IntensityPointCloud, usize), IoError> {
    let bytes = std::fs::read(path).map_err(|e| IoError::io(path, e))?;
    if bytes.starts_with(b"ply") {
        ply::parse_cloud(path, &bytes)
    } else {
        pcd::parse(path, &bytes)
    }
}
