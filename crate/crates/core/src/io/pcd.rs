//! PCD v0.7 reader/writer restricted to `FIELDS x y z intensity` as
//! four little-endian FLOAT32 columns, `DATA ascii` or `DATA binary`.
//! Anything else is rejected rather than guessed at.

use std::io::Write;
use std::path::Path;

use super::{CloudPoint, IntensityPointCloud, IoError};

struct Header {
    fields: Vec<String>,
    points: usize,
    binary: bool,
    /// Byte offset of the payload, one past the DATA line's newline.
    payload_start: usize,
}

fn parse_header(path: &Path, bytes: &[u8]) -> Result<Header, IoError> {
    let mut fields = None;
    let mut points = None;
    let mut width = None;
    let mut height = None;
    let mut cursor = 0usize;
    loop {
        let rest = &bytes[cursor..];
        let eol = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| IoError::malformed(path, "header ends before DATA line"))?;
        let line = std::str::from_utf8(&rest[..eol])
            .map_err(|_| IoError::malformed(path, "non-UTF8 header"))?
            .trim_end_matches('\r')
            .trim();
        cursor += eol + 1;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let key = tokens.next().unwrap_or("");
        let values: Vec<&str> = tokens.collect();
        match key {
            "VERSION" | "VIEWPOINT" | "COUNT" => {}
            "FIELDS" => fields = Some(values.iter().map(|s| s.to_string()).collect::<Vec<_>>()),
            "SIZE" => {
                if values.iter().any(|v| *v != "4") {
                    return Err(IoError::malformed(path, format!("unsupported SIZE {line}")));
                }
            }
            "TYPE" => {
                if values.iter().any(|v| *v != "F") {
                    return Err(IoError::malformed(path, format!("unsupported TYPE {line}")));
                }
            }
            "WIDTH" => width = values.first().and_then(|v| v.parse::<usize>().ok()),
            "HEIGHT" => height = values.first().and_then(|v| v.parse::<usize>().ok()),
            "POINTS" => {
                points = Some(values.first().and_then(|v| v.parse::<usize>().ok()).ok_or_else(
                    || IoError::malformed(path, format!("bad POINTS line {line:?}")),
                )?)
            }
            "DATA" => {
                let binary = match values.first().copied() {
                    Some("ascii") => false,
                    Some("binary") => true,
                    other => {
                        return Err(IoError::malformed(
                            path,
                            format!("unsupported DATA mode {other:?}"),
                        ))
                    }
                };
                let fields =
                    fields.ok_or_else(|| IoError::malformed(path, "missing FIELDS line"))?;
                let points = points
                    .or_else(|| Some(width? * height?))
                    .ok_or_else(|| IoError::malformed(path, "missing POINTS line"))?;
                return Ok(Header {
                    fields,
                    points,
                    binary,
                    payload_start: cursor,
                });
            }
            other => {
                return Err(IoError::malformed(path, format!("unknown header key {other:?}")))
            }
        }
    }
}

fn check_fields(path: &Path, fields: &[String]) -> Result<(), IoError> {
    if fields == ["x", "y", "z", "intensity"] {
        return Ok(());
    }
    if fields == ["x", "y", "z"] {
        return Err(IoError::IntensityRequired(path.to_path_buf()));
    }
    Err(IoError::malformed(
        path,
        format!("unsupported field layout {fields:?}"),
    ))
}

/// Parses a PCD byte stream. Returns the cloud and the dropped-record count.
pub fn parse(path: &Path, bytes: &[u8]) -> Result<(IntensityPointCloud, usize), IoError> {
    let header = parse_header(path, bytes)?;
    check_fields(path, &header.fields)?;
    let payload = &bytes[header.payload_start..];
    let mut points = Vec::with_capacity(header.points);
    let mut dropped = 0usize;
    if header.binary {
        let need = header.points * 16;
        if payload.len() < need {
            return Err(IoError::malformed(
                path,
                format!("binary payload truncated: {} of {need} bytes", payload.len()),
            ));
        }
        for rec in payload[..need].chunks_exact(16) {
            let f = |i: usize| f32::from_le_bytes(rec[i * 4..i * 4 + 4].try_into().unwrap());
            let p = CloudPoint {
                x: f(0),
                y: f(1),
                z: f(2),
                intensity: f(3),
            };
            if p.is_valid() {
                points.push(p);
            } else {
                dropped += 1;
            }
        }
    } else {
        let text = std::str::from_utf8(payload)
            .map_err(|_| IoError::malformed(path, "non-UTF8 ascii payload"))?;
        for line in text.lines().take(header.points) {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut vals = [0f32; 4];
            let mut n = 0;
            for tok in line.split_whitespace() {
                if n == 4 {
                    n += 1;
                    break;
                }
                vals[n] = tok
                    .parse::<f32>()
                    .map_err(|_| IoError::malformed(path, format!("bad float {tok:?}")))?;
                n += 1;
            }
            if n != 4 {
                return Err(IoError::malformed(
                    path,
                    format!("expected 4 columns, got line {line:?}"),
                ));
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
    }
    Ok((IntensityPointCloud { points }, dropped))
}

fn header_string(count: usize, mode: &str) -> String {
    format!(
        "# .PCD v0.7 - Point Cloud Data file format\n\
         VERSION 0.7\n\
         FIELDS x y z intensity\n\
         SIZE 4 4 4 4\n\
         TYPE F F F F\n\
         COUNT 1 1 1 1\n\
         WIDTH {count}\n\
         HEIGHT 1\n\
         VIEWPOINT 0 0 0 1 0 0 0\n\
         POINTS {count}\n\
         DATA {mode}\n"
    )
}

/// Writes ASCII PCD. Floats use the shortest representation that parses
/// back to the same bits, so a write/read round trip is exact.
pub fn write_ascii(cloud: &IntensityPointCloud, path: &Path) -> Result<(), IoError> {
    let mut out = String::with_capacity(cloud.len() * 32 + 256);
    out.push_str(&header_string(cloud.len(), "ascii"));
    for p in &cloud.points {
        out.push_str(&format!("{} {} {} {}\n", p.x, p.y, p.z, p.intensity));
    }
    std::fs::write(path, out).map_err(|e| IoError::io(path, e))
}

/// Writes little-endian binary PCD.
pub fn write_binary(cloud: &IntensityPointCloud, path: &Path) -> Result<(), IoError> {
    let mut buf = Vec::with_capacity(cloud.len() * 16 + 256);
    buf.extend_from_slice(header_string(cloud.len(), "binary").as_bytes());
    for p in &cloud.points {
        for v in [p.x, p.y, p.z, p.intensity] {
            buf.write_all(&v.to_le_bytes()).unwrap();
        }
    }
    std::fs::write(path, buf).map_err(|e| IoError::io(path, e))
}
