//! JSON contracts: extrinsics as `{"rotation": [9 row-major],
//! "translation": [3]}` and intrinsics as `{fx, fy, cx, cy, dist: [5],
//! width, height}`.

use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::geometry::{CameraIntrinsics, RigidTransform, RotationMatrix};

use super::IoError;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExtrinsicsJson {
    /// Row-major 3×3 rotation.
    pub rotation: [f64; 9],
    /// Meters.
    pub translation: [f64; 3],
}

impl From<&RigidTransform> for ExtrinsicsJson {
    fn from(t: &RigidTransform) -> Self {
        let m = t.rotation.matrix();
        let mut rotation = [0.0; 9];
        for r in 0..3 {
            for c in 0..3 {
                rotation[r * 3 + c] = m[(r, c)];
            }
        }
        ExtrinsicsJson {
            rotation,
            translation: [t.translation.x, t.translation.y, t.translation.z],
        }
    }
}

impl ExtrinsicsJson {
    pub fn to_transform(&self) -> Result<RigidTransform, String> {
        let m = Matrix3::from_row_slice(&self.rotation);
        let rotation = RotationMatrix::from_matrix(m).map_err(|e| e.to_string())?;
        Ok(RigidTransform::new(rotation, Vector3::from(self.translation)))
    }
}

/// Reads an extrinsics file. Accepts either the bare layout or a
/// calibration report wrapping it under an "extrinsics" key, so report
/// outputs feed straight back into metric and overlay commands.
pub fn read_extrinsics(path: &Path) -> Result<RigidTransform, IoError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| IoError::io(path, e))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| IoError::malformed(path, format!("JSON: {e}")))?;
    let node = value.get("extrinsics").unwrap_or(&value);
    let parsed: ExtrinsicsJson = serde_json::from_value(node.clone())
        .map_err(|e| IoError::malformed(path, format!("extrinsics layout: {e}")))?;
    parsed
        .to_transform()
        .map_err(|msg| IoError::malformed(path, msg))
}

pub fn write_extrinsics(t: &RigidTransform, path: &Path) -> Result<(), IoError> {
    let json = serde_json::to_string_pretty(&ExtrinsicsJson::from(t)).expect("serialization");
    std::fs::write(path, json + "\n").map_err(|e| IoError::io(path, e))
}

pub fn read_intrinsics(path: &Path) -> Result<CameraIntrinsics, IoError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| IoError::io(path, e))?;
    let k: CameraIntrinsics = serde_json::from_str(&text)
        .map_err(|e| IoError::malformed(path, format!("intrinsics layout: {e}")))?;
    if !(k.fx > 0.0) || !(k.fy > 0.0) || k.width == 0 || k.height == 0 {
        return Err(IoError::malformed(path, "intrinsics out of range"));
    }
    Ok(k)
}

pub fn write_intrinsics(k: &CameraIntrinsics, path: &Path) -> Result<(), IoError> {
    let json = serde_json::to_string_pretty(k).expect("serialization");
    std::fs::write(path, json + "\n").map_err(|e| IoError::io(path, e))
}
