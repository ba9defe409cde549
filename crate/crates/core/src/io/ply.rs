//! ASCII PLY: reader for intensity clouds (x y z intensity, float) and
//! writer for colored clouds (x y z float, red green blue uchar).

use std::path::Path;

use nalgebra::Vector3;

use super::{CloudPoint, IntensityPointCloud, IoError};

/// Parses an ASCII PLY vertex cloud with float properties x, y, z,
/// intensity. Returns the cloud and the dropped-record count.
pub fn parse_cloud(path: &Path, bytes: &[u8]) -> Result<(IntensityPointCloud, usize), IoError> {
    let text = std::str::from_utf8(bytes)
        .map_err(|_| IoError::malformed(path, "binary PLY not supported"))?;
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("ply") {
        return Err(IoError::malformed(path, "missing ply magic"));
    }
    let mut vertex_count = None;
    let mut properties: Vec<String> = Vec::new();
    for line in lines.by_ref() {
        let line = line.trim();
        if line.is_empty() || line.starts_with("comment") {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens.as_slice() {
            ["format", "ascii", "1.0"] => {}
            ["format", ..] => return Err(IoError::malformed(path, "only ascii 1.0 supported")),
            ["element", "vertex", n] => {
                vertex_count = Some(n.parse::<usize>().map_err(|_| {
                    IoError::malformed(path, format!("bad vertex count {n:?}"))
                })?)
            }
            ["element", kind, n] if *n != "0" => {
                return Err(IoError::malformed(
                    path,
                    format!("unsupported element {kind:?}"),
                ))
            }
            ["element", _, _] => {}
            ["property", ty, name] if vertex_count.is_some() => {
                if !matches!(*ty, "float" | "float32") {
                    return Err(IoError::malformed(
                        path,
                        format!("unsupported property type {ty:?}"),
                    ));
                }
                properties.push(name.to_string());
            }
            ["end_header"] => break,
            _ => return Err(IoError::malformed(path, format!("bad header line {line:?}"))),
        }
    }
    let count = vertex_count.ok_or_else(|| IoError::malformed(path, "missing vertex element"))?;
    if properties == ["x", "y", "z"] {
        return Err(IoError::IntensityRequired(path.to_path_buf()));
    }
    if properties != ["x", "y", "z", "intensity"] {
        return Err(IoError::malformed(
            path,
            format!("unsupported property layout {properties:?}"),
        ));
    }
    let mut points = Vec::with_capacity(count);
    let mut dropped = 0usize;
    for line in lines.take(count) {
        let mut vals = [0f32; 4];
        let mut n = 0;
        for tok in line.split_whitespace() {
            if n == 4 {
                break;
            }
            vals[n] = tok
                .parse::<f32>()
                .map_err(|_| IoError::malformed(path, format!("bad float {tok:?}")))?;
            n += 1;
        }
        if n != 4 {
            return Err(IoError::malformed(path, format!("expected 4 columns: {line:?}")));
        }
        let p = CloudPoint {
            x: vals[0],
            y: vals[1],
            z: vals[2],
            intensity: vals[3],
        };
        if p.is_valid() {
            points.push(p);
        } else {
            dropped += 1;
        }
    }
    Ok((IntensityPointCloud { points }, dropped))
}

/// Writes an ASCII PLY of colored vertices.
pub fn write_colored(points: &[(Vector3<f64>, [u8; 3])], path: &Path) -> Result<(), IoError> {
    let mut out = String::with_capacity(points.len() * 32 + 256);
    out.push_str(&format!(
        "ply\nformat ascii 1.0\nelement vertex {}\n\
         property float x\nproperty float y\nproperty float z\n\
         property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n",
        points.len()
    ));
    for (p, [r, g, b]) in points {
        out.push_str(&format!(
            "{} {} {} {r} {g} {b}\n",
            p.x as f32, p.y as f32, p.z as f32
        ));
    }
    std::fs::write(path, out).map_err(|e| IoError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::read_point_cloud;

    #[test]
    fn reads_ascii_intensity_ply() {
        let text = "ply\nformat ascii 1.0\ncomment test\nelement vertex 2\n\
                    property float x\nproperty float y\nproperty float z\n\
                    property float intensity\nend_header\n1 2 3 40\n-1 0 2.5 0\n";
        let f = tempfile::NamedTempFile::new().unwrap();
        std::fs::write(f.path(), text).unwrap();
        let (cloud, dropped) = read_point_cloud(f.path()).unwrap();
        assert_eq!(dropped, 0);
        assert_eq!(cloud.len(), 2);
        assert_eq!(cloud.points[0].intensity, 40.0);
        assert_eq!(cloud.points[1].z, 2.5);
    }

    #[test]
    fn missing_intensity_property_rejected() {
        let text = "ply\nformat ascii 1.0\nelement vertex 1\n\
                    property float x\nproperty float y\nproperty float z\nend_header\n1 2 3\n";
        let f = tempfile::NamedTempFile::new().unwrap();
        std::fs::write(f.path(), text).unwrap();
        assert!(matches!(
            read_point_cloud(f.path()),
            Err(IoError::IntensityRequired(_))
        ));
    }

    #[test]
    fn colored_writer_emits_parseable_header() {
        let f = tempfile::NamedTempFile::new().unwrap();
        let pts = vec![
            (Vector3::new(1.0, 2.0, 3.0), [255u8, 0, 0]),
            (Vector3::new(-1.0, 0.5, 2.0), [0u8, 128, 255]),
        ];
        write_colored(&pts, f.path()).unwrap();
        let text = std::fs::read_to_string(f.path()).unwrap();
        assert!(text.starts_with("ply\nformat ascii 1.0\nelement vertex 2\n"));
        assert!(text.contains("property uchar red"));
        assert!(text.trim_end().ends_with("-1 0.5 2 0 128 255"));
    }
}
