//! Analytic ground-truth edges for synthetic scenes.
//!
//! Three families mirror the extractor's taxonomy: borders shared by
//! two non-coplanar rectangles are depth-continuous folds; box edges
//! whose adjacent faces straddle visibility from the LiDAR origin are
//! depth-discontinuous silhouettes (box creases with both faces visible
//! are folds); reflectance-pattern boundaries in rectangle interiors
//! are intensity edges on a single surface.

use mfcalib::lidar_edge::planar::SAMPLE_STEP;
use mfcalib::lidar_edge::{EdgeClass, EdgeSegment3D};
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::scene::{BoxSpec, IntensityPattern, PlaneSpec, SceneSpec};

/// Matching tolerance for shared rectangle borders (m).
const BORDER_TOL: f64 = 1e-9;

pub fn ground_truth_edges(scene: &SceneSpec) -> Vec<(EdgeSegment3D, EdgeClass)> {
    let mut out = Vec::new();
    shared_plane_borders(&scene.planes, &mut out);
    box_edges(&scene.boxes, &mut out);
    pattern_boundaries(&scene.planes, &mut out);
    out
}

/// Segment from `p0` to `p1`, sampled at the fold-line spacing so truth
/// segments and extracted segments are directly comparable.
fn segment(p0: Vector3<f64>, p1: Vector3<f64>) -> EdgeSegment3D {
    let length = (p1 - p0).norm();
    let direction = (p1 - p0) / length;
    let count = (length / SAMPLE_STEP).floor() as usize;
    let samples = (0..=count)
        .map(|k| p0 + direction * (k as f64 * SAMPLE_STEP))
        .collect();
    EdgeSegment3D {
        origin: p0,
        direction,
        extent: [0.0, length],
        samples,
    }
}

fn borders(p: &PlaneSpec) -> [[Vector3<f64>; 2]; 4] {
    let (c, u, v) = (p.corner, p.edge_u, p.edge_v);
    [
        [c, c + u],
        [c + u, c + u + v],
        [c + v, c + u + v],
        [c, c + v],
    ]
}

fn same_border(a: &[Vector3<f64>; 2], b: &[Vector3<f64>; 2]) -> bool {
    ((a[0] - b[0]).norm() < BORDER_TOL && (a[1] - b[1]).norm() < BORDER_TOL)
        || ((a[0] - b[1]).norm() < BORDER_TOL && (a[1] - b[0]).norm() < BORDER_TOL)
}

fn shared_plane_borders(planes: &[PlaneSpec], out: &mut Vec<(EdgeSegment3D, EdgeClass)>) {
    for i in 0..planes.len() {
        for j in i + 1..planes.len() {
            // Coplanar patches meet without a fold; only distinct
            // surface orientations make a depth-continuous edge.
            if planes[i].normal().cross(&planes[j].normal()).norm() < 1e-9 {
                continue;
            }
            for bi in borders(&planes[i]) {
                for bj in borders(&planes[j]) {
                    if same_border(&bi, &bj) {
                        out.push((segment(bi[0], bi[1]), EdgeClass::DepthContinuous));
                    }
                }
            }
        }
    }
}

/// The 12 edges of an axis-aligned box with the outward normals of the
/// two faces meeting there.
fn aabb_edges(b: &BoxSpec) -> Vec<(Vector3<f64>, Vector3<f64>, Vector3<f64>, Vector3<f64>)> {
    let mut edges = Vec::with_capacity(12);
    for run in 0..3 {
        let a = (run + 1) % 3;
        let c = (run + 2) % 3;
        for sa in [false, true] {
            for sc in [false, true] {
                let mut p0 = Vector3::zeros();
                p0[run] = b.min[run];
                p0[a] = if sa { b.max[a] } else { b.min[a] };
                p0[c] = if sc { b.max[c] } else { b.min[c] };
                let mut p1 = p0;
                p1[run] = b.max[run];
                let mut n1 = Vector3::zeros();
                n1[a] = if sa { 1.0 } else { -1.0 };
                let mut n2 = Vector3::zeros();
                n2[c] = if sc { 1.0 } else { -1.0 };
                edges.push((p0, p1, n1, n2));
            }
        }
    }
    edges
}

fn box_edges(boxes: &[BoxSpec], out: &mut Vec<(EdgeSegment3D, EdgeClass)>) {
    for b in boxes {
        for (p0, p1, n1, n2) in aabb_edges(b) {
            // A face is visible from the LiDAR origin when its outward
            // normal points back toward the sensor: n . (0 - m) > 0.
            let m = (p0 + p1) / 2.0;
            let vis1 = n1.dot(&m) < 0.0;
            let vis2 = n2.dot(&m) < 0.0;
            let class = match (vis1, vis2) {
                (true, true) => Some(EdgeClass::DepthContinuous),
                (true, false) | (false, true) => Some(EdgeClass::DepthDiscontinuous),
                // Both faces hidden: the edge itself is occluded.
                (false, false) => None,
            };
            if let Some(class) = class {
                out.push((segment(p0, p1), class));
            }
        }
    }
}

fn pattern_boundaries(planes: &[PlaneSpec], out: &mut Vec<(EdgeSegment3D, EdgeClass)>) {
    for p in planes {
        let lu = p.edge_u.norm();
        let lv = p.edge_v.norm();
        let du = p.edge_u / lu;
        let dv = p.edge_v / lv;
        // Interior grid lines only; the rectangle's own border is not a
        // reflectance change.
        let mut lines = |step: f64, along_u: bool| {
            let limit = if along_u { lu } else { lv };
            let mut k = 1;
            while (k as f64) * step < limit - BORDER_TOL {
                let offset = k as f64 * step;
                let (p0, p1) = if along_u {
                    let base = p.corner + du * offset;
                    (base, base + p.edge_v)
                } else {
                    let base = p.corner + dv * offset;
                    (base, base + p.edge_u)
                };
                out.push((segment(p0, p1), EdgeClass::IntensityDiscontinuous));
                k += 1;
            }
        };
        match &p.pattern {
            IntensityPattern::Uniform => {}
            IntensityPattern::Stripes { period, .. } => lines(*period, true),
            IntensityPattern::Checker { size, .. } => {
                lines(*size, true);
                lines(*size, false);
            }
        }
    }
}

/// Flat JSON form of a classified truth segment; samples are
/// regenerated on load rather than stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthEdgeJson {
    pub class: String,
    pub origin: [f64; 3],
    pub direction: [f64; 3],
    pub extent: [f64; 2],
}

pub fn class_name(class: EdgeClass) -> &'static str {
    match class {
        EdgeClass::DepthContinuous => "depth_continuous",
        EdgeClass::DepthDiscontinuous => "depth_discontinuous",
        EdgeClass::IntensityDiscontinuous => "intensity_discontinuous",
    }
}

fn class_from_name(name: &str) -> Result<EdgeClass, String> {
    match name {
        "depth_continuous" => Ok(EdgeClass::DepthContinuous),
        "depth_discontinuous" => Ok(EdgeClass::DepthDiscontinuous),
        "intensity_discontinuous" => Ok(EdgeClass::IntensityDiscontinuous),
        other => Err(format!("unknown edge class {other:?}")),
    }
}

pub fn truth_to_json(edges: &[(EdgeSegment3D, EdgeClass)]) -> Vec<TruthEdgeJson> {
    edges
        .iter()
        .map(|(seg, class)| TruthEdgeJson {
            class: class_name(*class).to_string(),
            origin: seg.origin.into(),
            direction: seg.direction.into(),
            extent: seg.extent,
        })
        .collect()
}

pub fn truth_from_json(rows: &[TruthEdgeJson]) -> Result<Vec<(EdgeSegment3D, EdgeClass)>, String> {
    rows.iter()
        .map(|row| {
            let class = class_from_name(&row.class)?;
            let origin = Vector3::from(row.origin);
            let direction = Vector3::from(row.direction);
            let p0 = origin + direction * row.extent[0];
            let p1 = origin + direction * row.extent[1];
            if (p1 - p0).norm() < BORDER_TOL {
                return Err("degenerate truth segment".to_string());
            }
            Ok((segment(p0, p1), class))
        })
        .collect()
}
