//! Point-to-line registration residual, its analytic Jacobian and
//! variance, correspondence search, and the damped Gauss-Newton loop.
//!
//! The residual of one correspondence is the signed distance from the
//! projected (bias-corrected) LiDAR point to the matched image line:
//! z = n · (π(T(P - E)) - q). The solver alternates an outer
//! re-matching pass with inner normal-equation steps on the SE(3)
//! tangent space.

use nalgebra::Matrix6;
use serde::{Deserialize, Serialize};

use crate::geometry::{tangent_from_parts, CameraIntrinsics, RigidTransform, TangentVector};
use crate::image_edge::{fit_line, EdgePixelSet, LineFeature};
use crate::io::json::ExtrinsicsJson;
use crate::io::CalibConfig;
use crate::lidar_edge::{EdgeClass, EdgePoint3D};

use super::noise::NoiseModel;
use super::RegistrationError;

/// 6 DoF plus margin; below this the normal equations are meaningless.
const MIN_CORRESPONDENCES: usize = 10;
/// Huber clip on the normalized residual z/σ.
const HUBER_DELTA: f64 = 1.345;
/// Condition-number ceiling on the undamped normal equations.
const MAX_CONDITION: f64 = 1e12;
/// Initial Levenberg damping when an undamped step increases cost.
const LEVENBERG_INIT: f64 = 1e-4;
/// Damping above this means no step can improve the cost; stall.
const LEVENBERG_MAX: f64 = 1e10;

/// One matched pair: a 3D edge point and the local image line its
/// projection should lie on.
#[derive(Debug, Clone)]
pub struct Correspondence {
    pub point: EdgePoint3D,
    pub line: LineFeature,
    /// First-order residual variance (px²), strictly positive.
    pub sigma_sq: f64,
    /// 1/sigma_sq; the solver multiplies a Huber factor on top.
    pub weight: f64,
}

/// Signed point-to-line distance in pixels of the projected,
/// bias-corrected point. Fails when the point does not project into
/// the image at `t`; the caller drops it for that iteration.
pub fn residual(
    corr: &Correspondence,
    t: &RigidTransform,
    k: &CameraIntrinsics,
) -> Result<f64, RegistrationError> {
    let pc = t.transform_point(&corr.point.corrected_position());
    let uv = k.project(&pc).ok_or(RegistrationError::BehindCamera)?;
    Ok(corr.line.normal.dot(&(uv - corr.line.point)))
}

/// Gradient of the residual with respect to a tangent increment δ at
/// zero, under the left-multiplicative update Exp(δ)·T. With
/// P_c = T(P - E): d(P_c)/dδ = [-[P_c]ₓ | I], chained through the
/// projection Jacobian and the line normal.
pub fn residual_jacobian(
    corr: &Correspondence,
    t: &RigidTransform,
    k: &CameraIntrinsics,
) -> Result<TangentVector, RegistrationError> {
    let pc = t.transform_point(&corr.point.corrected_position());
    if k.project(&pc).is_none() {
        return Err(RegistrationError::BehindCamera);
    }
    let nj = (corr.line.normal.transpose() * k.project_jacobian(&pc)).transpose();
    // Row form n'Jπ·[-[P_c]ₓ | I], transposed blockwise to a column.
    let rot = pc.cross(&nj);
    Ok(tangent_from_parts(&rot, &nj))
}

/// First-order variance of the residual: the point covariance rotated
/// into the camera frame and pushed through the projection, plus the
/// isotropic image-edge term. Strictly positive for a unit normal.
pub fn residual_variance(
    corr: &Correspondence,
    t: &RigidTransform,
    k: &CameraIntrinsics,
    model: &NoiseModel,
) -> Result<f64, RegistrationError> {
    let pc = t.transform_point(&corr.point.corrected_position());
    if k.project(&pc).is_none() {
        return Err(RegistrationError::BehindCamera);
    }
    let r = t.rotation.matrix();
    let cov_c = r * corr.point.covariance * r.transpose();
    let nj = (corr.line.normal.transpose() * k.project_jacobian(&pc)).transpose();
    let lidar = nj.dot(&(cov_c * nj));
    let camera = model.camera_sigma.powi(2) * corr.line.normal.norm_squared();
    Ok(lidar + camera)
}

/// Projects every edge point through `t` and matches it to the nearest
/// image edge. A point is kept when it lands inside the image, its
/// nearest edge pixel is within `correspondence_max_px`, and a line fits
/// through its `knn_k` neighbors. Errors when fewer than the minimum
/// needed for a 6-DoF solve survive.
pub fn build_correspondences(
    edges: &[EdgePoint3D],
    image_edges: &EdgePixelSet,
    t: &RigidTransform,
    k: &CameraIntrinsics,
    cfg: &CalibConfig,
) -> Result<Vec<Correspondence>, RegistrationError> {
    let model = NoiseModel::from_config(cfg);
    let mut out = Vec::new();
    for point in edges {
        let pc = t.transform_point(&point.corrected_position());
        let Some(uv) = k.project(&pc) else { continue };
        match image_edges.nearest_distance(uv) {
            Some(d) if d <= cfg.correspondence_max_px => {}
            _ => continue,
        }
        let neighbors = image_edges.knn(uv, cfg.knn_k);
        let Ok(line) = fit_line(&neighbors) else {
            continue;
        };
        let mut corr = Correspondence {
            point: point.clone(),
            line,
            sigma_sq: 1.0,
            weight: 1.0,
        };
        let Ok(sigma_sq) = residual_variance(&corr, t, k, &model) else {
            continue;
        };
        corr.sigma_sq = sigma_sq;
        corr.weight = 1.0 / sigma_sq;
        out.push(corr);
    }
    if out.len() < MIN_CORRESPONDENCES {
        return Err(RegistrationError::InsufficientCorrespondences(
            out.len(),
            MIN_CORRESPONDENCES,
        ));
    }
    Ok(out)
}

/// Robust loss value and IRLS weight factor for a normalized residual.
fn huber_terms(r: f64, enabled: bool) -> (f64, f64) {
    if !enabled || r.abs() <= HUBER_DELTA {
        (0.5 * r * r, 1.0)
    } else {
        (
            HUBER_DELTA * r.abs() - 0.5 * HUBER_DELTA * HUBER_DELTA,
            HUBER_DELTA / r.abs(),
        )
    }
}

struct Linearization {
    h: Matrix6<f64>,
    g: TangentVector,
    cost: f64,
    /// Indexes into the correspondence list that evaluated at `t`.
    active: Vec<usize>,
}

/// Accumulates the weighted normal equations in a fixed order.
fn linearize(
    corrs: &[Correspondence],
    t: &RigidTransform,
    k: &CameraIntrinsics,
    use_huber: bool,
) -> Linearization {
    let mut lin = Linearization {
        h: Matrix6::zeros(),
        g: TangentVector::zeros(),
        cost: 0.0,
        active: Vec::with_capacity(corrs.len()),
    };
    for (i, corr) in corrs.iter().enumerate() {
        let (Ok(z), Ok(j)) = (residual(corr, t, k), residual_jacobian(corr, t, k)) else {
            continue;
        };
        let (rho, hw) = huber_terms(z / corr.sigma_sq.sqrt(), use_huber);
        let w = corr.weight * hw;
        lin.h += w * j * j.transpose();
        lin.g += j * (w * z);
        lin.cost += rho;
        lin.active.push(i);
    }
    lin
}

/// Robust cost over a fixed active set; None when any member stops
/// projecting, which marks the candidate step as unacceptable.
fn cost_over(
    corrs: &[Correspondence],
    active: &[usize],
    t: &RigidTransform,
    k: &CameraIntrinsics,
    use_huber: bool,
) -> Option<f64> {
    let mut cost = 0.0;
    for &i in active {
        let z = residual(&corrs[i], t, k).ok()?;
        cost += huber_terms(z / corrs[i].sigma_sq.sqrt(), use_huber).0;
    }
    Some(cost)
}

/// Unweighted pixel RMS of the residuals that evaluate at `t`.
fn residual_rms(corrs: &[Correspondence], t: &RigidTransform, k: &CameraIntrinsics) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for corr in corrs {
        if let Ok(z) = residual(corr, t, k) {
            sum += z * z;
            n += 1;
        }
    }
    (sum / n.max(1) as f64).sqrt()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeClassCounts {
    pub depth_continuous: usize,
    pub depth_discontinuous: usize,
    pub intensity_discontinuous: usize,
}

impl EdgeClassCounts {
    pub fn tally(edges: &[EdgePoint3D]) -> EdgeClassCounts {
        let mut c = EdgeClassCounts::default();
        for e in edges {
            match e.edge_class {
                EdgeClass::DepthContinuous => c.depth_continuous += 1,
                EdgeClass::DepthDiscontinuous => c.depth_discontinuous += 1,
                EdgeClass::IntensityDiscontinuous => c.intensity_discontinuous += 1,
            }
        }
        c
    }
}

/// Solve result and iteration trace, serializable as the report JSON.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub extrinsics: ExtrinsicsJson,
    pub converged: bool,
    /// Outer (re-matching) iterations performed.
    pub iterations: usize,
    /// Pixel RMS after each outer iteration.
    pub residual_rms: Vec<f64>,
    /// Matched pairs at the start of each outer iteration.
    pub correspondence_count: Vec<usize>,
    /// Classes of the edge points handed to the solver.
    pub edge_counts: EdgeClassCounts,
}

impl CalibrationReport {
    pub fn transform(&self) -> Result<RigidTransform, String> {
        self.extrinsics.to_transform()
    }
}

/// Estimates the extrinsics from edge points and image edge pixels.
///
/// Outer loop: rebuild correspondences at the current estimate. Inner
/// loop: solve (Σ wJJᵀ)δ = -Σ wJz, retract T ← Exp(δ)·T, and stop once
/// ‖δ‖ drops under `convergence_tol`. A step that raises the robust
/// cost is retried with growing Levenberg damping, so the cost never
/// increases across accepted steps.
pub fn gauss_newton_solve(
    edges: &[EdgePoint3D],
    image_edges: &EdgePixelSet,
    k: &CameraIntrinsics,
    t_init: &RigidTransform,
    cfg: &CalibConfig,
) -> Result<CalibrationReport, RegistrationError> {
    let mut t = *t_init;
    let mut rms_trace = Vec::new();
    let mut count_trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    for _outer in 0..cfg.max_outer_iters {
        let corrs = build_correspondences(edges, image_edges, &t, k, cfg)?;
        count_trace.push(corrs.len());
        let mut lambda = 0.0;
        let mut progressed = false;
        let mut stable = false;
        converged = false;

        for inner in 0..cfg.max_inner_iters {
            let lin = linearize(&corrs, &t, k, cfg.use_huber);
            if lin.active.len() < MIN_CORRESPONDENCES {
                return Err(RegistrationError::InsufficientCorrespondences(
                    lin.active.len(),
                    MIN_CORRESPONDENCES,
                ));
            }
            let eig = lin.h.symmetric_eigen();
            let emin = eig.eigenvalues.min();
            let emax = eig.eigenvalues.max();
            let cond = if emin > 0.0 { emax / emin } else { f64::INFINITY };
            if cond > MAX_CONDITION {
                return Err(RegistrationError::DegenerateGeometry(cond));
            }

            let mut accepted = None;
            while lambda <= LEVENBERG_MAX {
                let damped = lin.h + Matrix6::identity() * lambda;
                let Some(chol) = damped.cholesky() else {
                    lambda = if lambda == 0.0 { LEVENBERG_INIT } else { lambda * 10.0 };
                    continue;
                };
                let delta = chol.solve(&-lin.g);
                let cand = t.boxplus(&delta);
                // The relative slack absorbs round-off ties at a fixed
                // point without admitting real cost increases.
                let limit = lin.cost + 1e-12 * lin.cost.abs() + 1e-15;
                match cost_over(&corrs, &lin.active, &cand, k, cfg.use_huber) {
                    Some(c) if c <= limit => {
                        accepted = Some((cand, delta.norm()));
                        lambda = if lambda <= LEVENBERG_INIT { 0.0 } else { lambda / 10.0 };
                        break;
                    }
                    _ => {
                        lambda = if lambda == 0.0 { LEVENBERG_INIT } else { lambda * 10.0 };
                    }
                }
            }
            let Some((next, step_norm)) = accepted else {
                // Any nonzero gradient admits a cost-reducing step once
                // the damping is large enough, so exhausting the damping
                // schedule means the pose is already a stationary point
                // of this correspondence set.
                converged = true;
                stable = inner == 0;
                break;
            };
            t = next;
            if step_norm < cfg.convergence_tol {
                converged = true;
                // Converging on the very first step after a re-match
                // means the matching itself is a fixed point; stopping
                // any earlier would freeze a partial correspondence set.
                stable = inner == 0;
                break;
            }
            progressed = true;
        }

        rms_trace.push(residual_rms(&corrs, &t, k));
        iterations += 1;
        if stable || !progressed {
            break;
        }
    }

    Ok(CalibrationReport {
        extrinsics: ExtrinsicsJson::from(&t),
        converged,
        iterations,
        residual_rms: rms_trace,
        correspondence_count: count_trace,
        edge_counts: EdgeClassCounts::tally(edges),
    })
}
