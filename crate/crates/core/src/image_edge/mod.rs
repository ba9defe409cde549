//! Image-side edge features: Canny pixels wrapped in a k-NN index, and
//! local line fits (unit normal + point) over pixel neighborhoods.

mod canny;
mod kdtree;

use nalgebra::{Matrix2, Vector2};
use thiserror::Error;

use crate::io::GrayImage;

pub use canny::canny;
pub use kdtree::{KdTree2, Neighbor};

#[derive(Debug, Error)]
pub enum ImageEdgeError {
    #[error("no image edges")]
    NoImageEdges,
    #[error("need at least 2 neighbors to fit a line, got {0}")]
    InsufficientNeighbors(usize),
    #[error("degenerate line: neighbors have zero scatter")]
    DegenerateLine,
}

/// Edge pixels plus an immutable nearest-neighbor index over them.
#[derive(Debug, Clone, Default)]
pub struct EdgePixelSet {
    pixels: Vec<(u32, u32)>,
    index: KdTree2,
}

impl EdgePixelSet {
    pub fn empty() -> EdgePixelSet {
        EdgePixelSet::default()
    }

    /// Indexes a pixel list; empty input is an error because every
    /// downstream consumer needs at least one match target.
    pub fn from_pixels(pixels: Vec<(u32, u32)>) -> Result<EdgePixelSet, ImageEdgeError> {
        if pixels.is_empty() {
            return Err(ImageEdgeError::NoImageEdges);
        }
        Ok(Self::from_pixels_allow_empty(pixels))
    }

    /// Detector-internal constructor: a detector legitimately finds
    /// nothing on featureless input.
    pub(crate) fn from_pixels_allow_empty(pixels: Vec<(u32, u32)>) -> EdgePixelSet {
        let pts: Vec<[f64; 2]> = pixels.iter().map(|&(x, y)| [x as f64, y as f64]).collect();
        EdgePixelSet {
            index: KdTree2::build(&pts),
            pixels,
        }
    }

    pub fn pixels(&self) -> &[(u32, u32)] {
        &self.pixels
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    /// The `k` nearest edge pixels to an image-plane query point,
    /// nearest first, equidistant ties in insertion order.
    pub fn knn(&self, query: Vector2<f64>, k: usize) -> Vec<Vector2<f64>> {
        self.index
            .knn([query.x, query.y], k)
            .into_iter()
            .map(|n| Vector2::new(n.point[0], n.point[1]))
            .collect()
    }

    /// Distance from a query point to the closest edge pixel.
    pub fn nearest_distance(&self, query: Vector2<f64>) -> Option<f64> {
        self.index
            .knn([query.x, query.y], 1)
            .first()
            .map(|n| n.dist_sq.sqrt())
    }

    /// Binary mask (255 = edge) for debug output.
    pub fn to_mask(&self, width: u32, height: u32) -> GrayImage {
        let mut img = GrayImage::new(width, height);
        for &(x, y) in &self.pixels {
            if x < width && y < height {
                img.set(x, y, 255);
            }
        }
        img
    }
}

/// Local image line: unit normal `n` and a point `q` on the line, both
/// in pixel coordinates. The signed point-to-line distance of pixel `p`
/// is `n · (p - q)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFeature {
    pub normal: Vector2<f64>,
    pub point: Vector2<f64>,
}

/// Fits a line through a pixel neighborhood: `q` is the centroid, `n`
/// the scatter-matrix eigenvector with the smaller eigenvalue
/// (perpendicular to the dominant direction). The sign convention makes
/// the first nonzero normal component positive.
pub fn fit_line(neighbors: &[Vector2<f64>]) -> Result<LineFeature, ImageEdgeError> {
    if neighbors.len() < 2 {
        return Err(ImageEdgeError::InsufficientNeighbors(neighbors.len()));
    }
    let centroid = neighbors.iter().sum::<Vector2<f64>>() / neighbors.len() as f64;
    let mut scatter = Matrix2::zeros();
    for p in neighbors {
        let d = p - centroid;
        scatter += d * d.transpose();
    }
    if scatter.trace() < 1e-12 {
        return Err(ImageEdgeError::DegenerateLine);
    }
    let (a, b, c) = (scatter[(0, 0)], scatter[(0, 1)], scatter[(1, 1)]);
    // Closed-form smaller eigenpair of the symmetric 2x2 [a b; b c].
    let lambda = 0.5 * (a + c) - (0.25 * (a - c) * (a - c) + b * b).sqrt();
    let mut n = if b.abs() > 1e-12 {
        // Two algebraically equivalent eigenvector forms; take the better
        // conditioned one.
        let v1 = Vector2::new(b, lambda - a);
        let v2 = Vector2::new(lambda - c, b);
        if v1.norm() >= v2.norm() {
            v1
        } else {
            v2
        }
    } else if a <= c {
        Vector2::new(1.0, 0.0)
    } else {
        Vector2::new(0.0, 1.0)
    };
    n.normalize_mut();
    if n.x < -1e-12 || (n.x.abs() <= 1e-12 && n.y < 0.0) {
        n = -n;
    }
    if n.x.abs() <= 1e-12 {
        n.x = 0.0;
    }
    Ok(LineFeature {
        normal: n,
        point: centroid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn v(x: f64, y: f64) -> Vector2<f64> {
        Vector2::new(x, y)
    }

    #[test]
    fn empty_pixel_list_is_an_error() {
        assert!(matches!(
            EdgePixelSet::from_pixels(vec![]),
            Err(ImageEdgeError::NoImageEdges)
        ));
    }

    #[test]
    fn member_pixel_is_its_own_nearest_neighbor() {
        let set = EdgePixelSet::from_pixels(vec![(3, 7), (10, 2), (40, 40)]).unwrap();
        assert_eq!(set.nearest_distance(v(10.0, 2.0)), Some(0.0));
        assert_eq!(set.knn(v(10.0, 2.0), 1), vec![v(10.0, 2.0)]);
    }

    #[test]
    fn horizontal_neighbors_give_vertical_normal() {
        let pts: Vec<_> = (0..5).map(|x| v(x as f64, 0.0)).collect();
        let line = fit_line(&pts).unwrap();
        assert_relative_eq!(line.point, v(2.0, 0.0), epsilon = 1e-12);
        assert_relative_eq!(line.normal, v(0.0, 1.0), epsilon = 1e-12);
    }

    #[test]
    fn diagonal_neighbors_give_antidiagonal_normal() {
        let pts: Vec<_> = (0..6).map(|i| v(i as f64, i as f64)).collect();
        let line = fit_line(&pts).unwrap();
        let s = 1.0 / 2f64.sqrt();
        assert_relative_eq!(line.normal, v(s, -s), epsilon = 1e-9);
    }

    #[test]
    fn identical_pixels_are_degenerate() {
        let pts = vec![v(3.0, 3.0); 5];
        assert!(matches!(
            fit_line(&pts),
            Err(ImageEdgeError::DegenerateLine)
        ));
    }

    #[test]
    fn single_neighbor_is_insufficient() {
        assert!(matches!(
            fit_line(&[v(1.0, 1.0)]),
            Err(ImageEdgeError::InsufficientNeighbors(1))
        ));
    }

    #[test]
    fn normal_is_unit_and_sign_convention_holds() {
        let mut rng = StdRng::seed_from_u64(59);
        for _ in 0..200 {
            let angle = rng.random_range(0.0..std::f64::consts::PI);
            let dir = v(angle.cos(), angle.sin());
            let origin = v(rng.random_range(0.0..50.0), rng.random_range(0.0..50.0));
            let pts: Vec<_> = (0..8)
                .map(|i| {
                    origin
                        + dir * (i as f64)
                        + v(rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1))
                })
                .collect();
            let line = fit_line(&pts).unwrap();
            assert_relative_eq!(line.normal.norm(), 1.0, epsilon = 1e-9);
            let first = if line.normal.x != 0.0 {
                line.normal.x
            } else {
                line.normal.y
            };
            assert!(first > 0.0, "sign convention violated: {:?}", line.normal);
        }
    }

    #[test]
    fn rotating_neighbors_by_quarter_turn_rotates_normal() {
        let mut rng = StdRng::seed_from_u64(61);
        for _ in 0..50 {
            let angle = rng.random_range(0.0..std::f64::consts::PI);
            let dir = v(angle.cos(), angle.sin());
            let pts: Vec<_> = (0..10)
                .map(|i| dir * (i as f64) + v(rng.random_range(-0.05..0.05), rng.random_range(-0.05..0.05)))
                .collect();
            let rotated: Vec<_> = pts.iter().map(|p| v(-p.y, p.x)).collect();
            let n0 = fit_line(&pts).unwrap().normal;
            let n1 = fit_line(&rotated).unwrap().normal;
            let n0_rot = v(-n0.y, n0.x);
            // Equal up to the sign convention.
            let err = (n1 - n0_rot).norm().min((n1 + n0_rot).norm());
            assert!(err < 1e-9, "equivariance broken: {err}");
        }
    }

    #[test]
    fn residuals_match_exhaustive_angle_scan() {
        // Brute-force oracle for the eigen solve: scan all 1-degree line
        // directions through the centroid and keep the one minimizing the
        // summed squared perpendicular deviation (the criterion fit_line
        // optimizes in closed form). Every neighbor's residual under the
        // fitted line must stay within 5% of that line's worst residual,
        // plus the oracle's own angular quantization allowance (half a
        // grid step over the farthest neighbor).
        let mut rng = StdRng::seed_from_u64(67);
        for trial in 0..200 {
            let angle = rng.random_range(0.0..std::f64::consts::PI);
            let dir = v(angle.cos(), angle.sin());
            let origin = v(rng.random_range(0.0..50.0), rng.random_range(0.0..50.0));
            let k = 5 + trial % 6;
            let pts: Vec<_> = (0..k)
                .map(|i| {
                    let p = origin + dir * i as f64;
                    if trial % 2 == 0 {
                        // Canny chain model: snapped to the pixel grid.
                        v(p.x.round(), p.y.round())
                    } else {
                        p + v(rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2))
                    }
                })
                .collect();
            let line = fit_line(&pts).unwrap();
            let centroid = line.point;
            let worst = |n: Vector2<f64>| -> f64 {
                pts.iter()
                    .map(|p| (n.dot(&(p - centroid))).abs())
                    .fold(0.0, f64::max)
            };
            let sse = |n: Vector2<f64>| -> f64 {
                pts.iter()
                    .map(|p| {
                        let r = n.dot(&(p - centroid));
                        r * r
                    })
                    .sum()
            };
            let pca_worst = worst(line.normal);
            let (mut best_sse, mut grid_worst) = (f64::INFINITY, 0.0);
            for deg in 0..180 {
                let n = v((deg as f64).to_radians().cos(), (deg as f64).to_radians().sin());
                let e = sse(n);
                if e < best_sse {
                    best_sse = e;
                    grid_worst = worst(n);
                }
            }
            let r_max = pts
                .iter()
                .map(|p| (p - centroid).norm())
                .fold(0.0, f64::max);
            let slack = r_max * 0.5f64.to_radians().sin();
            assert!(
                pca_worst <= grid_worst * 1.05 + slack,
                "pca {pca_worst:.4} vs grid {grid_worst:.4} (slack {slack:.4})"
            );
        }
    }
}
