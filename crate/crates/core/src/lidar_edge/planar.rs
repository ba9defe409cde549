//! Depth-continuous edge extraction: voxelize the cloud, fit planes per
//! voxel by seeded RANSAC, intersect plane pairs within and across
//! adjacent voxels, and sample the accepted fold lines.
//!
//! Fold points sit on two real surfaces, so they carry no beam-footprint
//! inflation; their bias is zero and only the sensor noise covariance is
//! attached.

use std::collections::BTreeMap;

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::io::{CalibConfig, IntensityPointCloud};
use crate::registration::{point_covariance, NoiseModel};

use super::{mix_seed, EdgeClass, EdgePoint3D, LidarEdgeError};

/// Dihedral-angle acceptance window for a plane pair (degrees).
pub const MIN_DIHEDRAL_DEG: f64 = 30.0;
pub const MAX_DIHEDRAL_DEG: f64 = 150.0;
/// Spacing of emitted samples along an accepted fold line (m).
pub const SAMPLE_STEP: f64 = 0.02;
/// Each patch must have an inlier within this multiple of the sample
/// step of the clipped segment, else the pair is a phantom crossing of
/// surfaces that never meet.
pub const SUPPORT_RADIUS_FACTOR: f64 = 4.0;
/// A supporting inlier must also sit at least this many fitting
/// thresholds off the other patch's plane. RANSAC assigns points near a
/// fold to whichever plane is fitted first, so a patch can hold a thin
/// stripe of a neighboring surface; such borrowed points lie on both
/// planes at once and must not vouch for an intersection.
pub const SUPPORT_CLEARANCE_FACTOR: f64 = 2.0;
/// Minimum RMS extent of a patch's inliers along the second principal
/// direction, in fitting thresholds. Quasi-collinear inlier sets (range
/// readings smeared along a silhouette) fit a plane with an arbitrary
/// roll angle and breed phantom folds.
pub const MIN_SECONDARY_EXTENT_FACTOR: f64 = 2.0;
/// Minimum inliers for a patch to be kept.
pub const MIN_PLANE_INLIERS: usize = 40;
/// At most this many planes are peeled from one voxel.
pub const MAX_PLANES_PER_VOXEL: usize = 3;
/// RANSAC stops once this success probability is reached, or at the
/// trial cap, whichever comes first.
pub const RANSAC_CONFIDENCE: f64 = 0.99;
pub const RANSAC_MAX_TRIALS: usize = 200;

/// Exhaustive, disjoint partition of point indices into cubic cells.
#[derive(Debug, Clone)]
pub struct VoxelGrid {
    pub voxel_size: f64,
    pub cells: BTreeMap<[i64; 3], Vec<usize>>,
}

/// A plane nᵀx = d supported by the listed inliers, all within the
/// fitting threshold of it.
#[derive(Debug, Clone)]
pub struct PlanePatch {
    pub normal: Vector3<f64>,
    pub d: f64,
    pub inliers: Vec<usize>,
    pub centroid: Vector3<f64>,
}

/// Fold line between two planes, clipped to where both patches have
/// support and sampled at a fixed spacing.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeSegment3D {
    pub origin: Vector3<f64>,
    pub direction: Vector3<f64>,
    pub extent: [f64; 2],
    pub samples: Vec<Vector3<f64>>,
}

/// Why a plane pair produced no segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PairRejection {
    /// Dihedral angle outside the acceptance window.
    NearParallel { angle_deg: f64 },
    /// Inlier projections onto the line do not overlap.
    DisjointExtents,
    /// Neither patch has an inlier near the clipped segment.
    NoAdjacentSupport,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PlanarDiagnostics {
    pub voxel_count: usize,
    pub fitted_planes: usize,
    pub candidate_pairs: usize,
    pub rejected_angle: usize,
    pub rejected_extent: usize,
    pub rejected_support: usize,
    pub emitted_points: usize,
    pub deduplicated: usize,
}

#[derive(Debug, Clone)]
pub struct DepthContinuousResult {
    pub points: Vec<EdgePoint3D>,
    pub segments: Vec<EdgeSegment3D>,
    pub diagnostics: PlanarDiagnostics,
}

pub fn voxelize(cloud: &IntensityPointCloud, voxel_size: f64) -> VoxelGrid {
    assert!(voxel_size > 0.0, "voxel_size must be positive");
    let mut cells: BTreeMap<[i64; 3], Vec<usize>> = BTreeMap::new();
    for (i, p) in cloud.points.iter().enumerate() {
        let key = [
            (f64::from(p.x) / voxel_size).floor() as i64,
            (f64::from(p.y) / voxel_size).floor() as i64,
            (f64::from(p.z) / voxel_size).floor() as i64,
        ];
        cells.entry(key).or_default().push(i);
    }
    VoxelGrid { voxel_size, cells }
}

/// Least-squares plane through `pts`: centroid plus the smallest-
/// eigenvalue eigenvector of the scatter matrix. None when the scatter
/// is numerically zero (coincident points).
pub(crate) fn least_squares_plane(pts: &[Vector3<f64>]) -> Option<(Vector3<f64>, f64)> {
    let n = pts.len() as f64;
    let centroid = pts.iter().sum::<Vector3<f64>>() / n;
    let mut scatter = Matrix3::zeros();
    for p in pts {
        let q = p - centroid;
        scatter += q * q.transpose();
    }
    if scatter.trace() < 1e-18 {
        return None;
    }
    let eig = scatter.symmetric_eigen();
    let mut k = 0;
    for i in 1..3 {
        if eig.eigenvalues[i] < eig.eigenvalues[k] {
            k = i;
        }
    }
    let normal = eig.eigenvectors.column(k).normalize();
    Some((normal, normal.dot(&centroid)))
}

/// Fixes the normal sign: point away from the halfspace containing the
/// origin (d ≤ 0); for planes through the origin, first component above
/// noise is positive.
fn orient_plane(normal: &mut Vector3<f64>, d: &mut f64) {
    let flip = if d.abs() > 1e-12 {
        *d > 0.0
    } else {
        match normal.iter().find(|c| c.abs() > 1e-12) {
            Some(c) => *c < 0.0,
            None => false,
        }
    };
    if flip {
        *normal = -*normal;
        *d = -*d;
    }
}

fn needed_trials(inlier_ratio: f64) -> usize {
    let w3 = inlier_ratio.powi(3);
    if w3 >= 1.0 {
        return 1;
    }
    if w3 <= 0.0 {
        return RANSAC_MAX_TRIALS;
    }
    let n = (1.0 - RANSAC_CONFIDENCE).ln() / (1.0 - w3).ln();
    n.ceil().clamp(1.0, RANSAC_MAX_TRIALS as f64) as usize
}

/// Peels up to [`MAX_PLANES_PER_VOXEL`] planes from one cell's points.
/// Returned inlier lists index into `points`; each patch has at least
/// `min_inliers` members, all within `inlier_threshold` of its plane.
pub fn fit_planes(
    points: &[Vector3<f64>],
    inlier_threshold: f64,
    min_inliers: usize,
    rng: &mut impl Rng,
) -> Vec<PlanePatch> {
    let mut remaining: Vec<usize> = (0..points.len()).collect();
    let mut patches = Vec::new();
    while patches.len() < MAX_PLANES_PER_VOXEL && remaining.len() >= min_inliers.max(3) {
        let mut best: Option<(Vector3<f64>, f64, usize)> = None;
        let mut target = RANSAC_MAX_TRIALS;
        let mut trials = 0;
        while trials < target {
            trials += 1;
            let pick = rand::seq::index::sample(rng, remaining.len(), 3);
            let p0 = points[remaining[pick.index(0)]];
            let p1 = points[remaining[pick.index(1)]];
            let p2 = points[remaining[pick.index(2)]];
            let cross = (p1 - p0).cross(&(p2 - p0));
            let area = cross.norm();
            if area < 1e-12 {
                continue;
            }
            let normal = cross / area;
            let d = normal.dot(&p0);
            let count = remaining
                .iter()
                .filter(|&&i| (normal.dot(&points[i]) - d).abs() <= inlier_threshold)
                .count();
            if best.as_ref().is_none_or(|b| count > b.2) {
                best = Some((normal, d, count));
                target = needed_trials(count as f64 / remaining.len() as f64).max(trials);
            }
        }
        let Some((mut normal, mut d, count)) = best else {
            break;
        };
        if count < min_inliers {
            break;
        }
        let candidate: Vec<Vector3<f64>> = remaining
            .iter()
            .filter(|&&i| (normal.dot(&points[i]) - d).abs() <= inlier_threshold)
            .map(|&i| points[i])
            .collect();
        if let Some((n2, d2)) = least_squares_plane(&candidate) {
            normal = n2;
            d = d2;
        }
        let inliers: Vec<usize> = remaining
            .iter()
            .copied()
            .filter(|&i| (normal.dot(&points[i]) - d).abs() <= inlier_threshold)
            .collect();
        if inliers.len() < min_inliers {
            break;
        }
        orient_plane(&mut normal, &mut d);
        let centroid =
            inliers.iter().map(|&i| points[i]).sum::<Vector3<f64>>() / inliers.len() as f64;
        remaining.retain(|i| (normal.dot(&points[*i]) - d).abs() > inlier_threshold);
        // In-plane width check; the claimed points stay consumed either
        // way so the next peel cannot rediscover the same stripe.
        let mut scatter = Matrix3::zeros();
        for &i in &inliers {
            let q = points[i] - centroid;
            scatter += q * q.transpose();
        }
        let mut eig: Vec<f64> = scatter.symmetric_eigen().eigenvalues.iter().copied().collect();
        eig.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let secondary_rms = (eig[1] / inliers.len() as f64).max(0.0).sqrt();
        if secondary_rms < MIN_SECONDARY_EXTENT_FACTOR * inlier_threshold {
            continue;
        }
        patches.push(PlanePatch {
            normal,
            d,
            inliers,
            centroid,
        });
    }
    patches
}

/// Intersects two patches. The line is clipped to where both inlier
/// sets project onto it, must keep an inlier of each patch nearby that
/// clearly belongs to that patch alone, and is sampled every
/// `sample_step` meters. `inlier_threshold` is the fitting threshold
/// the patches were built with; it scales the clearance check.
pub fn intersect_planes(
    a: &PlanePatch,
    b: &PlanePatch,
    positions: &[Vector3<f64>],
    min_angle_deg: f64,
    max_angle_deg: f64,
    sample_step: f64,
    inlier_threshold: f64,
) -> Result<EdgeSegment3D, PairRejection> {
    let cosang = a.normal.dot(&b.normal).clamp(-1.0, 1.0);
    let angle_deg = cosang.acos().to_degrees();
    if angle_deg < min_angle_deg || angle_deg > max_angle_deg {
        return Err(PairRejection::NearParallel { angle_deg });
    }

    let mut direction = a.normal.cross(&b.normal).normalize();
    if let Some(c) = direction.iter().find(|c| c.abs() > 1e-12) {
        if *c < 0.0 {
            direction = -direction;
        }
    }

    // Point on both planes nearest the patches: x = c + α n_a + β n_b
    // with c the centroid midpoint, then re-rooted at the projection of
    // c onto the line.
    let c = 0.5 * (a.centroid + b.centroid);
    let g = a.normal.dot(&b.normal);
    let ra = a.d - a.normal.dot(&c);
    let rb = b.d - b.normal.dot(&c);
    let det = 1.0 - g * g;
    let alpha = (ra - g * rb) / det;
    let beta = (rb - g * ra) / det;
    let on_line = c + alpha * a.normal + beta * b.normal;
    let origin = on_line + (c - on_line).dot(&direction) * direction;

    let span = |patch: &PlanePatch| {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &i in &patch.inliers {
            let s = (positions[i] - origin).dot(&direction);
            lo = lo.min(s);
            hi = hi.max(s);
        }
        (lo, hi)
    };
    let (a_lo, a_hi) = span(a);
    let (b_lo, b_hi) = span(b);
    let s_min = a_lo.max(b_lo);
    let s_max = a_hi.min(b_hi);
    if !(s_min < s_max) {
        return Err(PairRejection::DisjointExtents);
    }

    let support_radius = SUPPORT_RADIUS_FACTOR * sample_step;
    // Clearance can never exceed the support radius or no geometry
    // could satisfy both bounds at once.
    let clearance = (SUPPORT_CLEARANCE_FACTOR * inlier_threshold).min(0.5 * support_radius);
    let supported = |patch: &PlanePatch, other: &PlanePatch| {
        patch.inliers.iter().any(|&i| {
            let s = (positions[i] - origin).dot(&direction).clamp(s_min, s_max);
            (positions[i] - origin - s * direction).norm() <= support_radius
                && (other.normal.dot(&positions[i]) - other.d).abs() > clearance
        })
    };
    if !supported(a, b) || !supported(b, a) {
        return Err(PairRejection::NoAdjacentSupport);
    }

    let count = ((s_max - s_min) / sample_step).floor() as usize;
    let samples = (0..=count)
        .map(|k| origin + (s_min + k as f64 * sample_step) * direction)
        .collect();
    Ok(EdgeSegment3D {
        origin,
        direction,
        extent: [s_min, s_max],
        samples,
    })
}

/// Offsets to the lexicographically larger half of the 26-neighborhood;
/// visiting only these from each cell touches every adjacent cell pair
/// once.
fn forward_neighbor_offsets() -> Vec<[i64; 3]> {
    let mut offs = Vec::with_capacity(13);
    for dx in -1..=1i64 {
        for dy in -1..=1i64 {
            for dz in -1..=1i64 {
                if [dx, dy, dz] > [0, 0, 0] {
                    offs.push([dx, dy, dz]);
                }
            }
        }
    }
    offs
}

fn cell_rng(seed: u64, cell: [i64; 3]) -> ChaCha8Rng {
    let mut h = mix_seed(seed, cell[0] as u64);
    h = mix_seed(h, cell[1] as u64);
    h = mix_seed(h, cell[2] as u64);
    ChaCha8Rng::seed_from_u64(h)
}

/// Full depth-continuous extraction. Emitted points are deduplicated on
/// a half-sample-step lattice so overlapping recoveries of one physical
/// fold are not over-weighted later.
pub fn extract_depth_continuous(
    cloud: &IntensityPointCloud,
    cfg: &CalibConfig,
) -> Result<DepthContinuousResult, LidarEdgeError> {
    if cloud.points.is_empty() {
        return Err(LidarEdgeError::EmptyCloud);
    }
    let positions: Vec<Vector3<f64>> = cloud.points.iter().map(|p| p.position()).collect();
    let inlier_threshold = (2.5 * cfg.range_sigma).max(0.01);
    let noise = NoiseModel::from_config(cfg);

    let grid = voxelize(cloud, cfg.voxel_size);
    let mut diag = PlanarDiagnostics {
        voxel_count: grid.cells.len(),
        ..PlanarDiagnostics::default()
    };

    // Patch inliers are remapped to cloud indices so one positions
    // slice serves every later lookup. Per-cell RNG streams make each
    // fit independent of map iteration order.
    let mut cell_patches: BTreeMap<[i64; 3], Vec<PlanePatch>> = BTreeMap::new();
    for (cell, indices) in &grid.cells {
        if indices.len() < MIN_PLANE_INLIERS {
            continue;
        }
        let pts: Vec<Vector3<f64>> = indices.iter().map(|&i| positions[i]).collect();
        let mut rng = cell_rng(cfg.seed, *cell);
        let mut patches = fit_planes(&pts, inlier_threshold, MIN_PLANE_INLIERS, &mut rng);
        for patch in &mut patches {
            for idx in &mut patch.inliers {
                *idx = indices[*idx];
            }
        }
        if !patches.is_empty() {
            diag.fitted_planes += patches.len();
            cell_patches.insert(*cell, patches);
        }
    }

    let offsets = forward_neighbor_offsets();
    let mut segments = Vec::new();
    let reject = |diag: &mut PlanarDiagnostics, r: PairRejection| match r {
        PairRejection::NearParallel { .. } => diag.rejected_angle += 1,
        PairRejection::DisjointExtents => diag.rejected_extent += 1,
        PairRejection::NoAdjacentSupport => diag.rejected_support += 1,
    };
    for (cell, patches) in &cell_patches {
        for i in 0..patches.len() {
            for j in i + 1..patches.len() {
                diag.candidate_pairs += 1;
                match intersect_planes(
                    &patches[i],
                    &patches[j],
                    &positions,
                    MIN_DIHEDRAL_DEG,
                    MAX_DIHEDRAL_DEG,
                    SAMPLE_STEP,
                    inlier_threshold,
                ) {
                    Ok(seg) => segments.push(seg),
                    Err(r) => reject(&mut diag, r),
                }
            }
        }
        for off in &offsets {
            let other = [cell[0] + off[0], cell[1] + off[1], cell[2] + off[2]];
            let Some(neighbors) = cell_patches.get(&other) else {
                continue;
            };
            for p in patches {
                for q in neighbors {
                    diag.candidate_pairs += 1;
                    match intersect_planes(
                        p,
                        q,
                        &positions,
                        MIN_DIHEDRAL_DEG,
                        MAX_DIHEDRAL_DEG,
                        SAMPLE_STEP,
                        inlier_threshold,
                    ) {
                        Ok(seg) => segments.push(seg),
                        Err(r) => reject(&mut diag, r),
                    }
                }
            }
        }
    }

    let dedupe_cell = SAMPLE_STEP / 2.0;
    let mut seen: std::collections::BTreeSet<[i64; 3]> = std::collections::BTreeSet::new();
    let mut points = Vec::new();
    for seg in &segments {
        for s in &seg.samples {
            let key = [
                (s.x / dedupe_cell).floor() as i64,
                (s.y / dedupe_cell).floor() as i64,
                (s.z / dedupe_cell).floor() as i64,
            ];
            if !seen.insert(key) {
                diag.deduplicated += 1;
                continue;
            }
            // A sample at the sensor origin has no bearing to propagate
            // noise along; such samples cannot be weighted and are
            // dropped.
            let Ok(covariance) = point_covariance(s, &noise) else {
                continue;
            };
            points.push(EdgePoint3D {
                position: *s,
                edge_class: EdgeClass::DepthContinuous,
                bias: Vector3::zeros(),
                covariance,
                plane_normal: None,
            });
        }
    }
    diag.emitted_points = points.len();
    Ok(DepthContinuousResult {
        points,
        segments,
        diagnostics: diag,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::CloudPoint;
    use approx::assert_relative_eq;
    use rand::rngs::StdRng;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    fn cloud_from(points: &[Vector3<f64>]) -> IntensityPointCloud {
        IntensityPointCloud {
            points: points
                .iter()
                .map(|p| CloudPoint {
                    x: p.x as f32,
                    y: p.y as f32,
                    z: p.z as f32,
                    intensity: 100.0,
                })
                .collect(),
        }
    }

    #[test]
    fn voxelize_assigns_by_floor() {
        let cloud = cloud_from(&[
            Vector3::new(0.1, 0.1, 0.1),
            Vector3::new(1.1, 0.1, 0.1),
        ]);
        let grid = voxelize(&cloud, 1.0);
        assert_eq!(grid.cells.len(), 2);
        assert_eq!(grid.cells[&[0, 0, 0]], vec![0]);
        assert_eq!(grid.cells[&[1, 0, 0]], vec![1]);
    }

    #[test]
    fn voxelize_boundary_point_goes_to_upper_cell() {
        let cloud = cloud_from(&[Vector3::new(1.0, 0.0, 0.0)]);
        let grid = voxelize(&cloud, 1.0);
        assert_eq!(grid.cells.keys().next(), Some(&[1, 0, 0]));
    }

    #[test]
    fn voxelize_matches_histogram_oracle() {
        let mut rng = StdRng::seed_from_u64(11);
        let pts: Vec<Vector3<f64>> = (0..10_000)
            .map(|_| {
                Vector3::new(
                    rng.random_range(0.0..10.0),
                    rng.random_range(0.0..10.0),
                    rng.random_range(0.0..10.0),
                )
            })
            .collect();
        let cloud = cloud_from(&pts);
        let grid = voxelize(&cloud, 1.0);

        // Brute-force binning over the f32-rounded coordinates the grid
        // actually saw.
        let mut expected: BTreeMap<[i64; 3], usize> = BTreeMap::new();
        for p in &cloud.points {
            let key = [
                f64::from(p.x).floor() as i64,
                f64::from(p.y).floor() as i64,
                f64::from(p.z).floor() as i64,
            ];
            *expected.entry(key).or_default() += 1;
        }
        assert_eq!(grid.cells.len(), expected.len());
        let mut total = 0;
        for (key, members) in &grid.cells {
            assert_eq!(members.len(), expected[key]);
            total += members.len();
        }
        assert_eq!(total, 10_000);
    }

    #[test]
    fn fit_recovers_noisy_ground_plane() {
        let mut rng = StdRng::seed_from_u64(21);
        let noise = Normal::new(0.0, 0.002).unwrap();
        let pts: Vec<Vector3<f64>> = (0..200)
            .map(|_| {
                Vector3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    noise.sample(&mut rng),
                )
            })
            .collect();
        let mut fit_rng = ChaCha8Rng::seed_from_u64(1);
        let patches = fit_planes(&pts, 0.01, 40, &mut fit_rng);
        assert_eq!(patches.len(), 1);
        let n = patches[0].normal;
        let angle = n.dot(&Vector3::z()).abs().clamp(-1.0, 1.0).acos().to_degrees();
        assert!(angle < 0.5, "normal off by {angle} deg");
        assert!(patches[0].d.abs() < 0.01);
        for &i in &patches[0].inliers {
            assert!((n.dot(&pts[i]) - patches[0].d).abs() <= 0.01);
        }
    }

    #[test]
    fn fit_three_exact_points_returns_their_plane() {
        let pts = [
            Vector3::new(1.0, 0.0, 2.0),
            Vector3::new(0.0, 1.0, 2.0),
            Vector3::new(-1.0, -1.0, 2.0),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let patches = fit_planes(&pts, 1e-9, 3, &mut rng);
        assert_eq!(patches.len(), 1);
        assert_relative_eq!(patches[0].normal.z.abs(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(patches[0].d / patches[0].normal.z, 2.0, epsilon = 1e-12);
        assert_eq!(patches[0].inliers.len(), 3);
    }

    #[test]
    fn ball_has_no_large_plane() {
        let mut rng = StdRng::seed_from_u64(31);
        let mut pts: Vec<Vector3<f64>> = Vec::new();
        while pts.len() < 100 {
            let p = Vector3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            if p.norm() <= 1.0 {
                pts.push(p);
            }
        }
        let threshold = 0.05;

        // Exhaustive RANSAC oracle: no 3-point plane, even after the
        // least-squares polish, reaches 80 inliers at this threshold.
        let mut oracle_best = 0;
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                for k in j + 1..pts.len() {
                    let cross = (pts[j] - pts[i]).cross(&(pts[k] - pts[i]));
                    if cross.norm() < 1e-12 {
                        continue;
                    }
                    let n = cross.normalize();
                    let d = n.dot(&pts[i]);
                    let sel: Vec<Vector3<f64>> = pts
                        .iter()
                        .filter(|p| (n.dot(p) - d).abs() <= threshold)
                        .copied()
                        .collect();
                    let (n2, d2) = least_squares_plane(&sel).unwrap();
                    let refined = pts
                        .iter()
                        .filter(|p| (n2.dot(p) - d2).abs() <= threshold)
                        .count();
                    oracle_best = oracle_best.max(sel.len()).max(refined);
                }
            }
        }
        assert!(oracle_best < 80, "ball unexpectedly planar: {oracle_best}");

        let mut fit_rng = ChaCha8Rng::seed_from_u64(3);
        assert!(fit_planes(&pts, threshold, 80, &mut fit_rng).is_empty());
    }

    #[test]
    fn least_squares_plane_beats_any_candidate() {
        let mut rng = StdRng::seed_from_u64(41);
        for _ in 0..50 {
            let pts: Vec<Vector3<f64>> = (0..30)
                .map(|_| {
                    Vector3::new(
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-0.1..0.1),
                    )
                })
                .collect();
            let (n, d) = least_squares_plane(&pts).unwrap();
            let sse: f64 = pts.iter().map(|p| (n.dot(p) - d).powi(2)).sum();
            for _ in 0..20 {
                let cn = Vector3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                )
                .normalize();
                let cd = rng.random_range(-0.2..0.2);
                let cand_sse: f64 = pts.iter().map(|p| (cn.dot(p) - cd).powi(2)).sum();
                assert!(sse <= cand_sse + 1e-12);
            }
        }
    }

    fn patch_from_points(pts: &[Vector3<f64>], base: usize) -> PlanePatch {
        let (mut normal, mut d) = least_squares_plane(pts).unwrap();
        orient_plane(&mut normal, &mut d);
        let centroid = pts.iter().sum::<Vector3<f64>>() / pts.len() as f64;
        PlanePatch {
            normal,
            d,
            inliers: (base..base + pts.len()).collect(),
            centroid,
        }
    }

    #[test]
    fn coordinate_planes_intersect_along_z_axis() {
        let a_pts = vec![
            Vector3::new(0.0, 0.05, 0.45),
            Vector3::new(0.0, 0.5, 0.2),
            Vector3::new(0.0, 0.02, 1.0),
            Vector3::new(0.0, 0.8, 0.9),
        ];
        let b_pts = vec![
            Vector3::new(0.04, 0.0, 0.1),
            Vector3::new(0.6, 0.0, 0.4),
            Vector3::new(0.03, 0.0, 0.9),
            Vector3::new(0.7, 0.0, 0.85),
        ];
        let positions: Vec<Vector3<f64>> =
            a_pts.iter().chain(b_pts.iter()).copied().collect();
        let a = patch_from_points(&a_pts, 0);
        let b = patch_from_points(&b_pts, a_pts.len());
        let seg = intersect_planes(&a, &b, &positions, 30.0, 150.0, 0.02, 0.01).unwrap();
        assert_relative_eq!(seg.direction.z.abs(), 1.0, epsilon = 1e-12);
        assert!(seg.direction.z > 0.0, "sign convention");
        for s in &seg.samples {
            assert!(s.x.abs() < 1e-9 && s.y.abs() < 1e-9, "sample off axis: {s}");
            let to_line = s - seg.origin - (s - seg.origin).dot(&seg.direction) * seg.direction;
            assert!(to_line.norm() < 1e-6);
        }
        assert!(seg.direction.dot(&a.normal).abs() < 1e-6);
        assert!(seg.direction.dot(&b.normal).abs() < 1e-6);
        let lo = seg.origin + seg.extent[0] * seg.direction;
        let hi = seg.origin + seg.extent[1] * seg.direction;
        assert_relative_eq!(lo.z, 0.2, epsilon = 1e-9);
        assert_relative_eq!(hi.z, 0.9, epsilon = 1e-9);
    }

    #[test]
    fn shallow_dihedral_angle_rejected() {
        let t = 2.0f64.to_radians();
        let a = PlanePatch {
            normal: Vector3::z(),
            d: 0.0,
            inliers: vec![],
            centroid: Vector3::zeros(),
        };
        let b = PlanePatch {
            normal: Vector3::new(t.sin(), 0.0, t.cos()),
            d: 0.0,
            inliers: vec![],
            centroid: Vector3::zeros(),
        };
        match intersect_planes(&a, &b, &[], 30.0, 150.0, 0.02, 0.01) {
            Err(PairRejection::NearParallel { angle_deg }) => {
                assert_relative_eq!(angle_deg, 2.0, epsilon = 1e-9)
            }
            other => panic!("expected near-parallel rejection, got {other:?}"),
        }
        let c = PlanePatch {
            normal: Vector3::new(178.0f64.to_radians().sin(), 0.0, 178.0f64.to_radians().cos()),
            d: 0.0,
            inliers: vec![],
            centroid: Vector3::zeros(),
        };
        assert!(matches!(
            intersect_planes(&a, &c, &[], 30.0, 150.0, 0.02, 0.01),
            Err(PairRejection::NearParallel { .. })
        ));
    }

    #[test]
    fn disjoint_extents_rejected() {
        let a_pts = vec![
            Vector3::new(0.0, 0.01, 0.0),
            Vector3::new(0.0, 0.5, 0.5),
            Vector3::new(0.0, 0.02, 1.0),
        ];
        let b_pts = vec![
            Vector3::new(0.01, 0.0, 2.0),
            Vector3::new(0.5, 0.0, 2.5),
            Vector3::new(0.02, 0.0, 3.0),
        ];
        let positions: Vec<Vector3<f64>> =
            a_pts.iter().chain(b_pts.iter()).copied().collect();
        let a = patch_from_points(&a_pts, 0);
        let b = patch_from_points(&b_pts, a_pts.len());
        assert_eq!(
            intersect_planes(&a, &b, &positions, 30.0, 150.0, 0.02, 0.01),
            Err(PairRejection::DisjointExtents)
        );
    }

    #[test]
    fn distant_patches_fail_support_gate() {
        // Extents along z overlap, but the y=0 patch lives at x near 5,
        // meters away from the z axis where the planes cross.
        let a_pts = vec![
            Vector3::new(0.0, 0.01, 0.0),
            Vector3::new(0.0, 0.5, 0.5),
            Vector3::new(0.0, 0.02, 1.0),
        ];
        let b_pts = vec![
            Vector3::new(5.0, 0.0, 0.1),
            Vector3::new(5.5, 0.0, 0.5),
            Vector3::new(5.2, 0.0, 0.9),
        ];
        let positions: Vec<Vector3<f64>> =
            a_pts.iter().chain(b_pts.iter()).copied().collect();
        let a = patch_from_points(&a_pts, 0);
        let b = patch_from_points(&b_pts, a_pts.len());
        assert_eq!(
            intersect_planes(&a, &b, &positions, 30.0, 150.0, 0.02, 0.01),
            Err(PairRejection::NoAdjacentSupport)
        );
    }

    #[test]
    fn collinear_streak_is_not_a_plane() {
        // A streak of returns along one line (the shape range inflation
        // smears past a silhouette) plus a genuine plane: only the
        // plane may come back.
        let mut rng = StdRng::seed_from_u64(61);
        let jitter = Normal::new(0.0, 0.002).unwrap();
        let mut pts: Vec<Vector3<f64>> = (0..60)
            .map(|i| {
                Vector3::new(
                    i as f64 * 0.02,
                    jitter.sample(&mut rng),
                    jitter.sample(&mut rng),
                )
            })
            .collect();
        for i in 0..10 {
            for j in 0..10 {
                pts.push(Vector3::new(i as f64 * 0.1, j as f64 * 0.1, 0.5));
            }
        }
        let mut fit_rng = ChaCha8Rng::seed_from_u64(4);
        let patches = fit_planes(&pts, 0.01, 40, &mut fit_rng);
        assert_eq!(patches.len(), 1);
        assert!(patches[0].normal.z.abs() > 0.999);
        assert_relative_eq!(patches[0].d / patches[0].normal.z, 0.5, epsilon = 1e-6);
    }

    #[test]
    fn borrowed_stripe_does_not_support_an_intersection() {
        // A wall floating above the floor: no physical fold. The wall
        // patch nevertheless holds a stripe of floor points that lie
        // within threshold of the extended wall plane; those points sit
        // on the floor itself and must not vouch for the pair.
        let mut positions = Vec::new();
        for i in 0..10 {
            for j in 0..5 {
                positions.push(Vector3::new(0.0, -0.45 + i as f64 * 0.1, 0.5 + j as f64 * 0.1));
            }
        }
        for i in 0..10 {
            positions.push(Vector3::new(0.0, -0.45 + i as f64 * 0.1, 0.0));
        }
        let wall_count = positions.len();
        for i in 0..10 {
            for j in 1..8 {
                positions.push(Vector3::new(j as f64 * 0.05, -0.45 + i as f64 * 0.1, 0.0));
            }
        }
        let wall = PlanePatch {
            normal: Vector3::x(),
            d: 0.0,
            inliers: (0..wall_count).collect(),
            centroid: positions[..wall_count].iter().sum::<Vector3<f64>>() / wall_count as f64,
        };
        let floor = PlanePatch {
            normal: Vector3::z(),
            d: 0.0,
            inliers: (wall_count..positions.len()).collect(),
            centroid: positions[wall_count..].iter().sum::<Vector3<f64>>()
                / (positions.len() - wall_count) as f64,
        };
        assert_eq!(
            intersect_planes(&wall, &floor, &positions, 30.0, 150.0, 0.02, 0.01),
            Err(PairRejection::NoAdjacentSupport)
        );

        // Extending the wall down to the floor makes the fold real.
        let mut grounded = positions.clone();
        for i in 0..10 {
            grounded.push(Vector3::new(0.0, -0.45 + i as f64 * 0.1, 0.05));
        }
        let mut wall2 = wall.clone();
        wall2.inliers.extend(positions.len()..grounded.len());
        let seg = intersect_planes(&wall2, &floor, &grounded, 30.0, 150.0, 0.02, 0.01).unwrap();
        assert!(seg.direction.y.abs() > 0.999);
    }

    fn room_corner_cloud(noise_sigma: f64, seed: u64) -> IntensityPointCloud {
        let mut rng = StdRng::seed_from_u64(seed);
        let noise = Normal::new(0.0, noise_sigma).unwrap();
        let mut pts = Vec::new();
        let step = 0.02;
        let n = (2.0 / step) as usize;
        for i in 0..n {
            for j in 0..n {
                let u = i as f64 * step;
                let v = j as f64 * step;
                pts.push(Vector3::new(2.0 + noise.sample(&mut rng), u, v));
                pts.push(Vector3::new(u, 2.0 + noise.sample(&mut rng), v));
                pts.push(Vector3::new(u, v, 2.0 + noise.sample(&mut rng)));
            }
        }
        cloud_from(&pts)
    }

    #[test]
    fn room_corner_recovers_three_fold_lines() {
        let cloud = room_corner_cloud(0.002, 51);
        let mut cfg = CalibConfig::default();
        cfg.range_sigma = 0.002;
        cfg.seed = 7;
        let result = extract_depth_continuous(&cloud, &cfg).unwrap();
        assert!(!result.points.is_empty());

        // True fold lines: x=y=2 along z, x=z=2 along y, y=z=2 along x.
        let lines = [
            (Vector3::new(2.0, 2.0, 0.0), Vector3::z()),
            (Vector3::new(2.0, 0.0, 2.0), Vector3::y()),
            (Vector3::new(0.0, 2.0, 2.0), Vector3::x()),
        ];
        let dist_to = |p: &Vector3<f64>, line: &(Vector3<f64>, Vector3<f64>)| {
            let r = p - line.0;
            (r - r.dot(&line.1) * line.1).norm()
        };
        let mut hits = [0usize; 3];
        for pt in &result.points {
            let (best, d) = lines
                .iter()
                .enumerate()
                .map(|(k, l)| (k, dist_to(&pt.position, l)))
                .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
                .unwrap();
            assert!(d < 0.005, "sample {} is {d:.4} m from nearest fold", pt.position);
            hits[best] += 1;
        }
        assert!(hits.iter().all(|&h| h > 10), "fold coverage {hits:?}");

        for seg in &result.segments {
            let align = lines
                .iter()
                .map(|l| seg.direction.dot(&l.1).abs())
                .fold(0.0, f64::max);
            let angle = align.clamp(-1.0, 1.0).acos().to_degrees();
            assert!(angle < 0.5, "segment direction off by {angle} deg");
        }
        assert_eq!(result.diagnostics.emitted_points, result.points.len());
    }

    #[test]
    fn single_plane_yields_nothing() {
        let mut pts = Vec::new();
        for i in 0..60 {
            for j in 0..60 {
                pts.push(Vector3::new(i as f64 * 0.05, j as f64 * 0.05, 0.0));
            }
        }
        let cloud = cloud_from(&pts);
        let cfg = CalibConfig::default();
        let result = extract_depth_continuous(&cloud, &cfg).unwrap();
        assert!(result.points.is_empty());
        assert!(result.diagnostics.fitted_planes >= 1);
    }

    #[test]
    fn empty_cloud_is_an_error() {
        let cloud = IntensityPointCloud { points: vec![] };
        assert!(matches!(
            extract_depth_continuous(&cloud, &CalibConfig::default()),
            Err(LidarEdgeError::EmptyCloud)
        ));
    }

    #[test]
    fn extraction_is_bit_reproducible() {
        let cloud = room_corner_cloud(0.002, 52);
        let mut cfg = CalibConfig::default();
        cfg.range_sigma = 0.002;
        cfg.seed = 9;
        let a = extract_depth_continuous(&cloud, &cfg).unwrap();
        let b = extract_depth_continuous(&cloud, &cfg).unwrap();
        assert_eq!(a.points.len(), b.points.len());
        for (x, y) in a.points.iter().zip(&b.points) {
            assert_eq!(x.position, y.position);
            assert_eq!(x.covariance, y.covariance);
        }
        assert_eq!(a.diagnostics, b.diagnostics);
    }

    #[test]
    fn samples_lie_on_both_parent_planes() {
        let cloud = room_corner_cloud(0.001, 53);
        let mut cfg = CalibConfig::default();
        cfg.range_sigma = 0.001;
        cfg.seed = 3;
        let result = extract_depth_continuous(&cloud, &cfg).unwrap();
        // Parent planes are the axis-aligned walls at 2 m; every sample
        // must be near two of them.
        for pt in &result.points {
            let p = pt.position;
            let on_wall = [
                (p.x - 2.0).abs() < 0.01,
                (p.y - 2.0).abs() < 0.01,
                (p.z - 2.0).abs() < 0.01,
            ];
            let near = on_wall.iter().filter(|&&b| b).count();
            assert!(near >= 2, "sample {p} not on two walls");
        }
    }
}
