//! Synthetic scenes with a virtual LiDAR and camera.
//!
//! Everything the calibrator estimates is known exactly here: scene
//! geometry, surface reflectance, the sensor transform, and the beam
//! footprint that inflates silhouette points. Tests measure the real
//! pipeline against these analytic answers instead of against captures
//! whose ground truth is itself an estimate.
//!
//! Intersection math stays in f64 end to end; positions quantize to the
//! 32-bit cloud storage only when a scan is packed, so precision checks
//! run against [`scene::SceneSpec::trace`] rather than the packed cloud.

pub mod bench;
pub mod raycast;
pub mod render;
pub mod scene;
pub mod truth;

pub use bench::{make_benchmark_scene, perturb_pose, Benchmark, BenchmarkKind};
pub use raycast::{raycast, LidarSpec};
pub use render::render_camera;
pub use scene::{BoxSpec, Hit, IntensityPattern, PlaneSpec, SceneError, SceneSpec};
pub use truth::{ground_truth_edges, truth_from_json, truth_to_json, TruthEdgeJson};
