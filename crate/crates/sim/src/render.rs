//! Camera image synthesis by supersampled ray casting.
//!
//! The extrinsic transform maps LiDAR-frame points into the camera
//! frame, so the camera sits at the inverse-transformed origin of the
//! scene. Four rays per pixel, averaged, give just enough anti-aliasing
//! for gradient-based edge detection; rays that escape the scene
//! contribute black.

use mfcalib::{CameraIntrinsics, GrayImage, RigidTransform};
use nalgebra::Vector2;

use crate::scene::SceneSpec;

/// 2x2 subpixel grid centered in the pixel square `[u, u+1) x [v, v+1)`.
const SUBPIXEL: [[f64; 2]; 4] = [[0.25, 0.25], [0.75, 0.25], [0.25, 0.75], [0.75, 0.75]];

/// Renders the scene as the camera described by `intrinsics` would see
/// it with the LiDAR-to-camera transform `extrinsics`.
pub fn render_camera(
    scene: &SceneSpec,
    intrinsics: &CameraIntrinsics,
    extrinsics: &RigidTransform,
) -> GrayImage {
    let to_scene = extrinsics.inverse();
    let center = to_scene.translation;
    let mut img = GrayImage::new(intrinsics.width, intrinsics.height);
    for v in 0..intrinsics.height {
        for u in 0..intrinsics.width {
            let mut sum = 0.0;
            for off in SUBPIXEL {
                let uv = Vector2::new(u as f64 + off[0], v as f64 + off[1]);
                let dir = to_scene.rotation.rotate(&intrinsics.unproject(&uv));
                sum += scene.trace(&center, &dir).map_or(0.0, |h| h.intensity);
            }
            let value = sum / SUBPIXEL.len() as f64;
            img.set(u, v, value.round().clamp(0.0, 255.0) as u8);
        }
    }
    img
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{IntensityPattern, PlaneSpec, SceneSpec};
    use mfcalib::geometry::RotationMatrix;
    use nalgebra::{Matrix3, Vector3};

    fn test_camera() -> CameraIntrinsics {
        CameraIntrinsics {
            fx: 600.0,
            fy: 600.0,
            cx: 512.0,
            cy: 384.0,
            dist: [0.0; 5],
            width: 1024,
            height: 768,
        }
    }

    /// Axis remap with the camera at the LiDAR origin: LiDAR x becomes
    /// the camera's forward z.
    fn forward_mount() -> RigidTransform {
        let r = RotationMatrix::from_matrix(Matrix3::new(
            0.0, -1.0, 0.0, //
            0.0, 0.0, -1.0, //
            1.0, 0.0, 0.0,
        ))
        .unwrap();
        RigidTransform::new(r, Vector3::zeros())
    }

    fn striped_wall() -> SceneSpec {
        SceneSpec {
            planes: vec![PlaneSpec {
                corner: Vector3::new(4.0, -4.0, -3.0),
                edge_u: Vector3::new(0.0, 8.0, 0.0),
                edge_v: Vector3::new(0.0, 0.0, 6.0),
                base_intensity: 0.0,
                pattern: IntensityPattern::Stripes {
                    period: 0.5,
                    low: 60.0,
                    high: 200.0,
                },
            }],
            boxes: vec![],
        }
    }

    #[test]
    fn empty_scene_renders_black() {
        let img = render_camera(&SceneSpec::default(), &test_camera(), &forward_mount());
        assert!(img.data.iter().all(|&v| v == 0));
    }

    #[test]
    fn uniform_wall_renders_flat() {
        let scene = SceneSpec {
            planes: vec![PlaneSpec {
                base_intensity: 137.0,
                pattern: IntensityPattern::Uniform,
                ..striped_wall().planes[0].clone()
            }],
            boxes: vec![],
        };
        let img = render_camera(&scene, &test_camera(), &forward_mount());
        // The wall covers the full view, so anti-aliasing has nothing to
        // blend: every pixel within one level of the reflectance.
        assert!(img.data.iter().all(|&v| (v as i32 - 137).abs() <= 1));
    }

    #[test]
    fn stripe_boundaries_land_within_one_pixel_of_projection() {
        let scene = striped_wall();
        let cam = test_camera();
        let img = render_camera(&scene, &cam, &forward_mount());

        // Under the forward mount a scene point (4, y, z) lands at
        // u = cx - fx * y / 4, independent of z: stripe boundaries are
        // vertical image lines at analytic columns.
        for k in 1..16 {
            let y = -4.0 + 0.5 * k as f64;
            let u_expected = 512.0 - 600.0 * y / 4.0;
            if !(1.0..1023.0).contains(&u_expected) {
                continue;
            }
            for v in [150u32, 384, 600] {
                let mut best: Option<f64> = None;
                for u in 0..1023u32 {
                    let a = img.get(u, v) as i32;
                    let b = img.get(u + 1, v) as i32;
                    if (a - b).abs() > 50 {
                        // Transition between pixel centers u and u+1.
                        let crossing = u as f64 + 1.0;
                        let d = (crossing - u_expected).abs();
                        if best.is_none_or(|p| d < p) {
                            best = Some(d);
                        }
                    }
                }
                let d = best.expect("no transition found");
                assert!(d <= 1.0, "boundary y={y} row {v}: off by {d} px");
            }
        }
    }

    #[test]
    fn translated_camera_shifts_the_image() {
        let scene = striped_wall();
        let cam = test_camera();
        let mut moved = forward_mount();
        // Put the camera at LiDAR-frame (0, -0.25, 0): t = -R * c.
        moved.translation = moved.rotation.rotate(&Vector3::new(0.0, -0.25, 0.0)) * -1.0;
        let base = render_camera(&scene, &cam, &forward_mount());
        let shifted = render_camera(&scene, &cam, &moved);
        assert_ne!(base.data, shifted.data);

        // The y = 0 stripe boundary projects to u = cx = 512 from the
        // origin and to 512 - fx * 0.25 / 4 = 474.5 from the moved
        // camera; both renders must show a transition there.
        let transition_near = |img: &GrayImage, target: f64| -> f64 {
            let v = 384;
            let mut best = f64::INFINITY;
            for u in 0..1023u32 {
                let a = img.get(u, v) as i32;
                let b = img.get(u + 1, v) as i32;
                if (a - b).abs() > 50 {
                    best = best.min((u as f64 + 1.0 - target).abs());
                }
            }
            best
        };
        assert!(transition_near(&base, 512.0) <= 1.5);
        assert!(transition_near(&shifted, 474.5) <= 1.5);
    }
}
