//! Paints cloud points with the image color seen through the calibrated
//! extrinsics and writes them as a colored PLY.

use std::path::Path;

use crate::geometry::{CameraIntrinsics, RigidTransform};

use super::{ply, GrayImage, IntensityPointCloud, IoError};

/// Projects every point through `T` and keeps those landing inside the
/// image, colored by the luminance under their pixel (gray triplet).
/// Returns how many points were colored; behind-camera and out-of-view
/// points are omitted from the file.
pub fn write_colored_cloud(
    cloud: &IntensityPointCloud,
    image: &GrayImage,
    k: &CameraIntrinsics,
    t: &RigidTransform,
    path: &Path,
) -> Result<usize, IoError> {
    let colored: Vec<_> = cloud
        .points
        .iter()
        .filter_map(|p| {
            let pos = p.position();
            let uv = k.project(&t.transform_point(&pos))?;
            let x = (uv.x.round() as i64).clamp(0, image.width as i64 - 1) as u32;
            let y = (uv.y.round() as i64).clamp(0, image.height as i64 - 1) as u32;
            let g = image.get(x, y);
            Some((pos, [g, g, g]))
        })
        .collect();
    ply::write_colored(&colored, path)?;
    Ok(colored.len())
}
