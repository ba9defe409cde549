//! Scene primitives and exact ray intersection.
//!
//! A scene is a set of finite rectangles with a reflectance pattern plus
//! axis-aligned boxes, all in the LiDAR frame. `trace` is the precision
//! reference for the whole simulator: it intersects in f64 and returns
//! the nearest hit with its surface reflectance.

use nalgebra::Vector3;
use thiserror::Error;

/// Reflectance layout over a rectangle, on the 0..255 scale shared with
/// 8-bit imagery.
#[derive(Debug, Clone, PartialEq)]
pub enum IntensityPattern {
    /// Constant `base_intensity` everywhere.
    Uniform,
    /// Bands of width `period` along `edge_u`; the band at the corner is
    /// `high`.
    Stripes { period: f64, low: f64, high: f64 },
    /// Square cells of side `size`; the cell at the corner is `high`.
    Checker { size: f64, low: f64, high: f64 },
}

/// Finite rectangle spanned by `edge_u` and `edge_v` from `corner`.
/// The edges must be orthogonal; they need not be unit length.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneSpec {
    pub corner: Vector3<f64>,
    pub edge_u: Vector3<f64>,
    pub edge_v: Vector3<f64>,
    /// Reflectance used by the `Uniform` pattern; patterned surfaces
    /// ignore it.
    pub base_intensity: f64,
    pub pattern: IntensityPattern,
}

/// Axis-aligned box with one reflectance on all faces.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxSpec {
    pub min: Vector3<f64>,
    pub max: Vector3<f64>,
    pub intensity: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SceneSpec {
    pub planes: Vec<PlaneSpec>,
    pub boxes: Vec<BoxSpec>,
}

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("plane {0}: edge vectors must be orthogonal")]
    NonOrthogonalPlane(usize),
    #[error("plane {0}: edge vector too short to span a surface")]
    DegeneratePlane(usize),
    #[error("plane {0}: {1}")]
    BadPattern(usize, String),
    #[error("box {0}: min must be strictly below max on every axis")]
    InvertedBox(usize),
    #[error("box {0}: reflectance must be non-negative")]
    NegativeIntensity(usize),
}

/// One ray-surface intersection, before any quantization or noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    /// Distance along the unit ray direction (m).
    pub t: f64,
    pub point: Vector3<f64>,
    pub intensity: f64,
}

/// Hits closer than this are treated as self-intersection at the origin.
const MIN_HIT_T: f64 = 1e-9;
/// Membership slack on rectangle borders so abutting coplanar patches do
/// not open a seam between them.
const EDGE_SLACK: f64 = 1e-12;

impl PlaneSpec {
    /// Unit normal `edge_u x edge_v`.
    pub fn normal(&self) -> Vector3<f64> {
        self.edge_u.cross(&self.edge_v).normalize()
    }

    /// Reflectance at in-plane offsets (meters along `edge_u`/`edge_v`
    /// from the corner).
    pub fn intensity_at(&self, a: f64, b: f64) -> f64 {
        match &self.pattern {
            IntensityPattern::Uniform => self.base_intensity,
            IntensityPattern::Stripes { period, low, high } => {
                if (a / period).floor() as i64 % 2 == 0 {
                    *high
                } else {
                    *low
                }
            }
            IntensityPattern::Checker { size, low, high } => {
                let parity = (a / size).floor() as i64 + (b / size).floor() as i64;
                if parity.rem_euclid(2) == 0 {
                    *high
                } else {
                    *low
                }
            }
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<(), SceneError> {
        for (i, p) in self.planes.iter().enumerate() {
            if p.edge_u.norm() < 1e-9 || p.edge_v.norm() < 1e-9 {
                return Err(SceneError::DegeneratePlane(i));
            }
            if p.edge_u.normalize().dot(&p.edge_v.normalize()).abs() > 1e-9 {
                return Err(SceneError::NonOrthogonalPlane(i));
            }
            let bad = |msg: &str| Err(SceneError::BadPattern(i, msg.to_string()));
            match &p.pattern {
                IntensityPattern::Uniform => {
                    if p.base_intensity < 0.0 {
                        return bad("negative base reflectance");
                    }
                }
                IntensityPattern::Stripes { period, low, high } => {
                    if !(*period > 0.0) {
                        return bad("stripe period must be positive");
                    }
                    if *low < 0.0 || *high < 0.0 {
                        return bad("negative stripe reflectance");
                    }
                }
                IntensityPattern::Checker { size, low, high } => {
                    if !(*size > 0.0) {
                        return bad("checker size must be positive");
                    }
                    if *low < 0.0 || *high < 0.0 {
                        return bad("negative checker reflectance");
                    }
                }
            }
        }
        for (i, b) in self.boxes.iter().enumerate() {
            if !(b.min.x < b.max.x && b.min.y < b.max.y && b.min.z < b.max.z) {
                return Err(SceneError::InvertedBox(i));
            }
            if b.intensity < 0.0 {
                return Err(SceneError::NegativeIntensity(i));
            }
        }
        Ok(())
    }

    /// Nearest intersection of `origin + t * dir` (unit `dir`) with any
    /// primitive. Entirely f64; `None` when the ray escapes the scene.
    pub fn trace(&self, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<Hit> {
        let mut best: Option<Hit> = None;
        for p in &self.planes {
            if let Some(h) = intersect_plane(p, origin, dir) {
                if best.as_ref().is_none_or(|b| h.t < b.t) {
                    best = Some(h);
                }
            }
        }
        for b in &self.boxes {
            if let Some(h) = intersect_box(b, origin, dir) {
                if best.as_ref().is_none_or(|c| h.t < c.t) {
                    best = Some(h);
                }
            }
        }
        best
    }
}

fn intersect_plane(p: &PlaneSpec, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<Hit> {
    let n = p.edge_u.cross(&p.edge_v);
    let denom = n.dot(dir);
    if denom.abs() < 1e-15 {
        return None;
    }
    let t = n.dot(&(p.corner - origin)) / denom;
    if t <= MIN_HIT_T {
        return None;
    }
    let point = origin + t * dir;
    let rel = point - p.corner;
    // In-plane offsets in meters; valid range is [0, edge length].
    let lu = p.edge_u.norm();
    let lv = p.edge_v.norm();
    let a = rel.dot(&p.edge_u) / lu;
    let b = rel.dot(&p.edge_v) / lv;
    if a < -EDGE_SLACK || a > lu + EDGE_SLACK || b < -EDGE_SLACK || b > lv + EDGE_SLACK {
        return None;
    }
    Some(Hit {
        t,
        point,
        intensity: p.intensity_at(a.clamp(0.0, lu), b.clamp(0.0, lv)),
    })
}

fn intersect_box(bx: &BoxSpec, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<Hit> {
    let mut t_enter = f64::NEG_INFINITY;
    let mut t_exit = f64::INFINITY;
    for axis in 0..3 {
        let d = dir[axis];
        if d.abs() < 1e-15 {
            if origin[axis] < bx.min[axis] || origin[axis] > bx.max[axis] {
                return None;
            }
            continue;
        }
        let mut t0 = (bx.min[axis] - origin[axis]) / d;
        let mut t1 = (bx.max[axis] - origin[axis]) / d;
        if t0 > t1 {
            std::mem::swap(&mut t0, &mut t1);
        }
        t_enter = t_enter.max(t0);
        t_exit = t_exit.min(t1);
        if t_enter > t_exit {
            return None;
        }
    }
    // A sensor inside the box would see t_enter < 0; no scene places one
    // there, so such rays simply miss.
    (t_enter > MIN_HIT_T).then(|| Hit {
        t: t_enter,
        point: origin + t_enter * dir,
        intensity: bx.intensity,
    })
}
