//! Intensity-image edge path: project the cloud onto a spherical grid,
//! run edge detection on the normalized intensity, split edge pixels by
//! local depth variation, and remap them to 3D with the beam-footprint
//! inflation bias attached to silhouette points.

use nalgebra::{Matrix3, Vector3};

use crate::image_edge::canny;
use crate::io::{CalibConfig, GrayImage, IntensityPointCloud};
use crate::registration::{point_covariance, NoiseModel};

use super::planar::least_squares_plane;
use super::{EdgeClass, EdgePoint3D, LidarEdgeError};

/// Pixel radius of the neighborhood used to estimate a surface normal
/// around a remapped edge point.
const NORMAL_WINDOW_PX: i64 = 2;
/// Minimum neighborhood size for a usable normal estimate.
const NORMAL_MIN_POINTS: usize = 8;

/// Cloud binned over azimuth/elevation. Row 0 holds the lowest
/// elevation, column 0 the lowest azimuth; pixel (r,c) covers
/// [el_min + r·el_res, +el_res) x [az_min + c·az_res, +az_res).
#[derive(Debug, Clone)]
pub struct SphericalImage {
    pub az_res: f64,
    pub el_res: f64,
    /// [min, max] azimuth over binned points (rad).
    pub az_range: [f64; 2],
    pub el_range: [f64; 2],
    pub width: usize,
    pub height: usize,
    /// Mean intensity per occupied pixel, native sensor units.
    intensity: Vec<f64>,
    /// Mean contributor range per occupied pixel (m).
    depth: Vec<f64>,
    /// Smallest contributor range per occupied pixel (m).
    min_range: Vec<f64>,
    /// Contributing cloud indices per pixel.
    point_map: Vec<Vec<usize>>,
    /// Mid-air returns dropped by the bleeding filter.
    pub bleeding_dropped: usize,
}

impl SphericalImage {
    #[inline]
    fn idx(&self, row: usize, col: usize) -> usize {
        row * self.width + col
    }

    pub fn occupied(&self, row: usize, col: usize) -> bool {
        !self.point_map[self.idx(row, col)].is_empty()
    }

    /// Mean contributor range; None when the pixel is empty.
    pub fn depth_at(&self, row: usize, col: usize) -> Option<f64> {
        self.occupied(row, col).then(|| self.depth[self.idx(row, col)])
    }

    /// Mean contributor intensity in native units; None when empty.
    pub fn intensity_at(&self, row: usize, col: usize) -> Option<f64> {
        self.occupied(row, col)
            .then(|| self.intensity[self.idx(row, col)])
    }

    pub fn contributors(&self, row: usize, col: usize) -> &[usize] {
        &self.point_map[self.idx(row, col)]
    }

    fn min_range_at(&self, row: usize, col: usize) -> Option<f64> {
        self.occupied(row, col)
            .then(|| self.min_range[self.idx(row, col)])
    }

    /// Pixel owning the given direction, by the same binning arithmetic
    /// used during projection.
    pub fn pixel_of(&self, position: &Vector3<f64>) -> Option<(usize, usize)> {
        let (az, el, _) = spherical_of(position)?;
        let col = ((az - self.az_range[0]) / self.az_res).floor();
        let row = ((el - self.el_range[0]) / self.el_res).floor();
        if col < 0.0 || row < 0.0 {
            return None;
        }
        let (row, col) = (row as usize, col as usize);
        (row < self.height && col < self.width).then_some((row, col))
    }

    /// Occupied intensities min-max scaled to 0..255 for edge
    /// detection; empty pixels map to 0. The robust variant clips to
    /// the 1st..99th percentile first so a few saturated returns do not
    /// flatten the rest of the scale.
    pub fn normalized(&self, robust: bool) -> GrayImage {
        let mut occupied: Vec<f64> = self
            .point_map
            .iter()
            .zip(&self.intensity)
            .filter(|(m, _)| !m.is_empty())
            .map(|(_, &v)| v)
            .collect();
        let mut img = GrayImage::new(self.width as u32, self.height as u32);
        if occupied.is_empty() {
            return img;
        }
        occupied.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let (lo, hi) = if robust {
            let pick = |q: f64| occupied[((occupied.len() - 1) as f64 * q).round() as usize];
            (pick(0.01), pick(0.99))
        } else {
            (occupied[0], *occupied.last().unwrap())
        };
        if hi - lo < 1e-12 {
            return img;
        }
        for row in 0..self.height {
            for col in 0..self.width {
                let i = self.idx(row, col);
                if self.point_map[i].is_empty() {
                    continue;
                }
                let v = ((self.intensity[i] - lo) / (hi - lo) * 255.0)
                    .round()
                    .clamp(0.0, 255.0) as u8;
                img.set(col as u32, row as u32, v);
            }
        }
        img
    }
}

/// (azimuth, elevation, range) of a point; None below 1 mm range where
/// the direction is meaningless.
fn spherical_of(p: &Vector3<f64>) -> Option<(f64, f64, f64)> {
    let r = p.norm();
    if r <= 1e-3 {
        return None;
    }
    Some((p.y.atan2(p.x), (p.z / r).asin(), r))
}

/// Bins the cloud over azimuth/elevation, averaging intensity and range
/// per pixel. Returns with image bounds fitted to the data. Mid-air
/// returns between a local foreground and background (bleeding points)
/// are dropped before averaging.
pub fn spherical_project(
    cloud: &IntensityPointCloud,
    cfg: &CalibConfig,
) -> Result<SphericalImage, LidarEdgeError> {
    if cloud.points.is_empty() {
        return Err(LidarEdgeError::EmptyCloud);
    }
    struct Binned {
        index: usize,
        row: usize,
        col: usize,
        range: f64,
        intensity: f64,
    }

    let mut az_min = f64::INFINITY;
    let mut az_max = f64::NEG_INFINITY;
    let mut el_min = f64::INFINITY;
    let mut el_max = f64::NEG_INFINITY;
    let mut sph: Vec<(usize, f64, f64, f64, f64)> = Vec::with_capacity(cloud.points.len());
    for (i, p) in cloud.points.iter().enumerate() {
        let pos = p.position();
        let Some((az, el, r)) = spherical_of(&pos) else {
            continue;
        };
        az_min = az_min.min(az);
        az_max = az_max.max(az);
        el_min = el_min.min(el);
        el_max = el_max.max(el);
        sph.push((i, az, el, r, f64::from(p.intensity)));
    }
    if sph.is_empty() {
        return Err(LidarEdgeError::DegenerateRanges);
    }

    let width = ((az_max - az_min) / cfg.spherical_az_res).floor() as usize + 1;
    let height = ((el_max - el_min) / cfg.spherical_el_res).floor() as usize + 1;
    let npx = width * height;
    let to_pixel = |az: f64, el: f64| {
        let col = (((az - az_min) / cfg.spherical_az_res).floor() as usize).min(width - 1);
        let row = (((el - el_min) / cfg.spherical_el_res).floor() as usize).min(height - 1);
        (row, col)
    };
    let binned: Vec<Binned> = sph
        .iter()
        .map(|&(index, az, el, range, intensity)| {
            let (row, col) = to_pixel(az, el);
            Binned {
                index,
                row,
                col,
                range,
                intensity,
            }
        })
        .collect();

    // Bleeding filter: a return well above the neighborhood's nearest
    // surface and well below its farthest is mid-air between the two.
    let mut lo = vec![f64::INFINITY; npx];
    let mut hi = vec![f64::NEG_INFINITY; npx];
    for b in &binned {
        let i = b.row * width + b.col;
        lo[i] = lo[i].min(b.range);
        hi[i] = hi[i].max(b.range);
    }
    let nbhd = |row: usize, col: usize| {
        let mut mn = f64::INFINITY;
        let mut mx = f64::NEG_INFINITY;
        for dr in -1..=1i64 {
            for dc in -1..=1i64 {
                let (r, c) = (row as i64 + dr, col as i64 + dc);
                if r < 0 || c < 0 || r >= height as i64 || c >= width as i64 {
                    continue;
                }
                let i = r as usize * width + c as usize;
                mn = mn.min(lo[i]);
                mx = mx.max(hi[i]);
            }
        }
        (mn, mx)
    };

    let mut intensity = vec![0.0; npx];
    let mut depth = vec![0.0; npx];
    let mut min_range = vec![f64::INFINITY; npx];
    let mut count = vec![0usize; npx];
    let mut point_map: Vec<Vec<usize>> = vec![Vec::new(); npx];
    let mut bleeding_dropped = 0;
    for b in &binned {
        let (mn, mx) = nbhd(b.row, b.col);
        if b.range - mn > cfg.depth_jump_threshold && mx - b.range > cfg.depth_jump_threshold {
            bleeding_dropped += 1;
            continue;
        }
        let i = b.row * width + b.col;
        intensity[i] += b.intensity;
        depth[i] += b.range;
        min_range[i] = min_range[i].min(b.range);
        count[i] += 1;
        point_map[i].push(b.index);
    }
    for i in 0..npx {
        if count[i] > 0 {
            intensity[i] /= count[i] as f64;
            depth[i] /= count[i] as f64;
        }
    }

    Ok(SphericalImage {
        az_res: cfg.spherical_az_res,
        el_res: cfg.spherical_el_res,
        az_range: [az_min, az_max],
        el_range: [el_min, el_max],
        width,
        height,
        intensity,
        depth,
        min_range,
        point_map,
        bleeding_dropped,
    })
}

/// Canny on the normalized intensity image, then each edge pixel is
/// classified by the range spread of occupied pixels within
/// `classify_radius_px`: a spread above `depth_jump_threshold` marks a
/// silhouette, anything else a reflectance change. Returns
/// (depth-discontinuous, intensity-discontinuous) pixels as (row, col).
pub fn extract_and_classify(
    sph: &SphericalImage,
    cfg: &CalibConfig,
) -> (Vec<(usize, usize)>, Vec<(usize, usize)>) {
    let gray = sph.normalized(cfg.normalize_robust);
    let edges = canny(&gray, cfg.gaussian_sigma, cfg.canny_low, cfg.canny_high);
    let r = cfg.classify_radius_px as i64;
    let mut depth_px = Vec::new();
    let mut intensity_px = Vec::new();
    for &(x, y) in edges.pixels() {
        let (row, col) = (y as usize, x as usize);
        let mut mn = f64::INFINITY;
        let mut mx = f64::NEG_INFINITY;
        for dr in -r..=r {
            for dc in -r..=r {
                let (nr, nc) = (row as i64 + dr, col as i64 + dc);
                if nr < 0 || nc < 0 || nr >= sph.height as i64 || nc >= sph.width as i64 {
                    continue;
                }
                if let Some(d) = sph.depth_at(nr as usize, nc as usize) {
                    mn = mn.min(d);
                    mx = mx.max(d);
                }
            }
        }
        if mx - mn > cfg.depth_jump_threshold {
            depth_px.push((row, col));
        } else {
            intensity_px.push((row, col));
        }
    }
    (depth_px, intensity_px)
}

/// In-image direction of increasing depth at a pixel, from central (or
/// one-sided) differences over occupied neighbors; None when flat or
/// isolated. Units are mean-range meters per pixel along (col, row).
fn depth_gradient(sph: &SphericalImage, row: usize, col: usize) -> Option<(f64, f64)> {
    let sample = |r: i64, c: i64| {
        if r < 0 || c < 0 || r >= sph.height as i64 || c >= sph.width as i64 {
            None
        } else {
            sph.depth_at(r as usize, c as usize)
        }
    };
    let (row, col) = (row as i64, col as i64);
    let axis = |a: Option<f64>, b: Option<f64>, here: Option<f64>| match (a, b) {
        (Some(lo), Some(hi)) => Some((hi - lo) / 2.0),
        (Some(lo), None) => here.map(|h| h - lo),
        (None, Some(hi)) => here.map(|h| hi - h),
        (None, None) => None,
    };
    let here = sample(row, col);
    let gx = axis(sample(row, col - 1), sample(row, col + 1), here);
    let gy = axis(sample(row - 1, col), sample(row + 1, col), here);
    let (gx, gy) = (gx.unwrap_or(0.0), gy.unwrap_or(0.0));
    (gx.hypot(gy) > 1e-9).then_some((gx, gy))
}

/// Remaps edge pixels back onto cloud points.
///
/// Silhouette pixels keep only their foreground cluster (ranges within
/// `depth_jump_threshold` of the pixel minimum) and take the member
/// lying farthest along the local depth-increase direction: the
/// farthest inflation point, the one the bias model describes. Without
/// a usable gradient the minimum-range member is taken. A pixel whose
/// own minimum range sits a jump above the surrounding window lies on
/// the background side of the silhouette; it is re-rooted at the
/// nearest foreground pixel in the window, or skipped when none
/// exists. Pixels with no contributors are skipped too; the count of
/// skips is returned.
///
/// Reflectance-edge pixels take the contributor nearest the pixel's
/// mean range.
pub fn remap_to_3d(
    pixels: &[(usize, usize)],
    sph: &SphericalImage,
    cloud: &IntensityPointCloud,
    edge_class: EdgeClass,
    cfg: &CalibConfig,
) -> (Vec<EdgePoint3D>, usize) {
    let mut out = Vec::new();
    let mut skipped = 0;
    let r = cfg.classify_radius_px as i64;
    for &(row, col) in pixels {
        let members = sph.contributors(row, col);
        if members.is_empty() {
            skipped += 1;
            continue;
        }
        let ranges: Vec<f64> = members
            .iter()
            .map(|&i| cloud.points[i].position().norm())
            .collect();
        let chosen = match edge_class {
            EdgeClass::DepthDiscontinuous => {
                let pixel_min = ranges.iter().copied().fold(f64::INFINITY, f64::min);
                let mut window_min = f64::INFINITY;
                for dr in -r..=r {
                    for dc in -r..=r {
                        let (nr, nc) = (row as i64 + dr, col as i64 + dc);
                        if nr < 0 || nc < 0 || nr >= sph.height as i64 || nc >= sph.width as i64 {
                            continue;
                        }
                        if let Some(m) = sph.min_range_at(nr as usize, nc as usize) {
                            window_min = window_min.min(m);
                        }
                    }
                }
                // An edge pixel whose own returns all belong to the
                // background sits on the far side of the silhouette;
                // re-root it at the nearest foreground pixel in the
                // window so the emitted point is on the occluder.
                let fg_pixel = if pixel_min <= window_min + cfg.depth_jump_threshold {
                    Some((row, col))
                } else {
                    let mut best: Option<(i64, i64, i64)> = None;
                    for dr in -r..=r {
                        for dc in -r..=r {
                            let (nr, nc) = (row as i64 + dr, col as i64 + dc);
                            if nr < 0 || nc < 0 || nr >= sph.height as i64 || nc >= sph.width as i64
                            {
                                continue;
                            }
                            let Some(m) = sph.min_range_at(nr as usize, nc as usize) else {
                                continue;
                            };
                            if m > window_min + cfg.depth_jump_threshold {
                                continue;
                            }
                            let key = (dr.abs().max(dc.abs()), dr, dc);
                            if best.is_none_or(|b| key < b) {
                                best = Some(key);
                            }
                        }
                    }
                    best.map(|(_, dr, dc)| ((row as i64 + dr) as usize, (col as i64 + dc) as usize))
                };
                let Some((srow, scol)) = fg_pixel else {
                    skipped += 1;
                    continue;
                };
                let members = sph.contributors(srow, scol);
                let ranges: Vec<f64> = members
                    .iter()
                    .map(|&i| cloud.points[i].position().norm())
                    .collect();
                let pixel_min = ranges.iter().copied().fold(f64::INFINITY, f64::min);
                let fg: Vec<usize> = (0..members.len())
                    .filter(|&k| ranges[k] < pixel_min + cfg.depth_jump_threshold)
                    .collect();
                let chosen = match depth_gradient(sph, srow, scol) {
                    Some((gx, gy)) => {
                        let g = gx.hypot(gy);
                        let (gx, gy) = (gx / g, gy / g);
                        let center_c = scol as f64 + 0.5;
                        let center_r = srow as f64 + 0.5;
                        let mut best = fg[0];
                        let mut best_score = f64::NEG_INFINITY;
                        for &k in &fg {
                            let p = cloud.points[members[k]].position();
                            let Some((az, el, _)) = spherical_of(&p) else {
                                continue;
                            };
                            let off_c = (az - sph.az_range[0]) / sph.az_res - center_c;
                            let off_r = (el - sph.el_range[0]) / sph.el_res - center_r;
                            let score = off_c * gx + off_r * gy;
                            if score > best_score {
                                best_score = score;
                                best = k;
                            }
                        }
                        best
                    }
                    None => {
                        let mut best = fg[0];
                        for &k in &fg {
                            if ranges[k] < ranges[best] {
                                best = k;
                            }
                        }
                        best
                    }
                };
                members[chosen]
            }
            _ => {
                let mean = sph.depth_at(row, col).unwrap();
                let mut best = 0;
                for k in 1..members.len() {
                    if (ranges[k] - mean).abs() < (ranges[best] - mean).abs() {
                        best = k;
                    }
                }
                members[best]
            }
        };
        out.push(EdgePoint3D {
            position: cloud.points[chosen].position(),
            edge_class,
            bias: Vector3::zeros(),
            covariance: Matrix3::zeros(),
            plane_normal: None,
        });
    }
    (out, skipped)
}

/// Beam-footprint inflation bias at a silhouette point. With the
/// foreground surface normal N and an edge tangent hint oriented so
/// that N x hint points from the surface interior toward the edge, the
/// bias has magnitude ‖position‖·tan(theta/2) along that in-plane
/// direction; subtracting it moves the inflated point back onto the
/// true edge.
pub fn beam_bias(
    point: &EdgePoint3D,
    edge_direction_hint: &Vector3<f64>,
    plane_normal: &Vector3<f64>,
    theta: f64,
) -> Result<Vector3<f64>, LidarEdgeError> {
    debug_assert_eq!(point.edge_class, EdgeClass::DepthDiscontinuous);
    let v = plane_normal.cross(edge_direction_hint);
    let norm = v.norm();
    if norm < 1e-9 {
        return Err(LidarEdgeError::DegenerateBiasDirection);
    }
    let e = point.position.norm() * (theta / 2.0).tan();
    Ok(v * (e / norm))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IntensityDiagnostics {
    pub depth_edge_pixels: usize,
    pub intensity_edge_pixels: usize,
    pub skipped_pixels: usize,
    pub bleeding_dropped: usize,
    /// Silhouette points with no usable surface normal: their bias is
    /// zero and the unmodeled inflation is folded into the covariance.
    pub downweighted: usize,
}

#[derive(Debug, Clone)]
pub struct IntensityPathResult {
    pub points: Vec<EdgePoint3D>,
    pub diagnostics: IntensityDiagnostics,
}

/// Estimates the foreground surface normal and interior centroid around
/// an edge point from contributors in a small pixel window. For
/// silhouette points only the window's foreground cluster is used so
/// the background surface cannot tilt the fit.
fn local_surface(
    sph: &SphericalImage,
    cloud: &IntensityPointCloud,
    row: usize,
    col: usize,
    foreground_only: bool,
    threshold: f64,
) -> Option<(Vector3<f64>, Vector3<f64>)> {
    let mut pts: Vec<Vector3<f64>> = Vec::new();
    for dr in -NORMAL_WINDOW_PX..=NORMAL_WINDOW_PX {
        for dc in -NORMAL_WINDOW_PX..=NORMAL_WINDOW_PX {
            let (nr, nc) = (row as i64 + dr, col as i64 + dc);
            if nr < 0 || nc < 0 || nr >= sph.height as i64 || nc >= sph.width as i64 {
                continue;
            }
            for &i in sph.contributors(nr as usize, nc as usize) {
                pts.push(cloud.points[i].position());
            }
        }
    }
    if foreground_only {
        let wmin = pts
            .iter()
            .map(|p| p.norm())
            .fold(f64::INFINITY, f64::min);
        pts.retain(|p| p.norm() < wmin + threshold);
    }
    if pts.len() < NORMAL_MIN_POINTS {
        return None;
    }
    let centroid = pts.iter().sum::<Vector3<f64>>() / pts.len() as f64;
    let (normal, _) = least_squares_plane(&pts)?;
    Some((normal, centroid))
}

/// Full intensity-image path: project, detect, classify, remap, then
/// attach covariance, surface normal, and silhouette bias to every
/// point.
pub fn extract_intensity_path(
    cloud: &IntensityPointCloud,
    cfg: &CalibConfig,
) -> Result<IntensityPathResult, LidarEdgeError> {
    let sph = spherical_project(cloud, cfg)?;
    let (depth_px, intensity_px) = extract_and_classify(&sph, cfg);
    let (d_points, d_skipped) = remap_to_3d(&depth_px, &sph, cloud, EdgeClass::DepthDiscontinuous, cfg);
    let (i_points, i_skipped) =
        remap_to_3d(&intensity_px, &sph, cloud, EdgeClass::IntensityDiscontinuous, cfg);
    let mut diagnostics = IntensityDiagnostics {
        depth_edge_pixels: depth_px.len(),
        intensity_edge_pixels: intensity_px.len(),
        skipped_pixels: d_skipped + i_skipped,
        bleeding_dropped: sph.bleeding_dropped,
        downweighted: 0,
    };

    let noise = NoiseModel::from_config(cfg);
    let mut points = Vec::with_capacity(d_points.len() + i_points.len());
    for mut pt in d_points.into_iter().chain(i_points) {
        let Ok(cov) = point_covariance(&pt.position, &noise) else {
            continue;
        };
        pt.covariance = cov;
        let silhouette = pt.edge_class == EdgeClass::DepthDiscontinuous;
        let surface = sph.pixel_of(&pt.position).and_then(|(row, col)| {
            local_surface(&sph, cloud, row, col, silhouette, cfg.depth_jump_threshold)
        });
        if let Some((normal, centroid)) = surface {
            pt.plane_normal = Some(normal);
            if silhouette {
                // Edge tangent hint oriented so N x hint points from the
                // foreground interior (centroid) toward the edge point.
                let v = pt.position - centroid;
                let in_plane = v - normal * normal.dot(&v);
                let bias = if in_plane.norm() > 1e-9 {
                    let hint = in_plane.normalize().cross(&normal);
                    beam_bias(&pt, &hint, &normal, cfg.beam_divergence).ok()
                } else {
                    None
                };
                match bias {
                    Some(b) => pt.bias = b,
                    None => downweight(&mut pt, cfg, &mut diagnostics),
                }
            }
        } else if silhouette {
            downweight(&mut pt, cfg, &mut diagnostics);
        }
        points.push(pt);
    }
    Ok(IntensityPathResult {
        points,
        diagnostics,
    })
}

/// No surface normal means the inflation cannot be subtracted; widen
/// the covariance by the worst-case bias magnitude instead so the
/// solver trusts the point less.
fn downweight(pt: &mut EdgePoint3D, cfg: &CalibConfig, diag: &mut IntensityDiagnostics) {
    let e = pt.position.norm() * (cfg.beam_divergence / 2.0).tan();
    pt.covariance += Matrix3::identity() * e * e;
    diag.downweighted += 1;
}
