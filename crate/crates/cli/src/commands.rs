//! The five subcommands. Every failure path returns a `Failure`
//! carrying the exit code and a single diagnostic line.

use std::fmt;
use std::path::{Path, PathBuf};

use clap::Args;

use mfcalib::geometry::{rotation_error_deg, translation_error_cm};
use mfcalib::io::{
    pcd, ply, read_extrinsics, read_image, read_intrinsics, read_point_cloud, write_extrinsics,
    write_intrinsics, write_pgm, write_png,
};
use mfcalib::lidar_edge::{extract_and_classify, spherical_project, LidarEdgeError};
use mfcalib::pipeline::{calibrate, CalibrationError, CalibrationRun};
use mfcalib::registration::RegistrationError;
use mfcalib::{CalibConfig, EdgeClass, GrayImage, IntensityPointCloud, RigidTransform};
use mfcalib_sim::{
    ground_truth_edges, make_benchmark_scene, raycast, render_camera, truth_to_json, BenchmarkKind,
};

use crate::jet;

/// Fixture bundle layout shared by `simulate` and the tests that feed
/// its output back into `calibrate`.
pub const BUNDLE_CLOUD: &str = "cloud.pcd";
pub const BUNDLE_IMAGE: &str = "image.png";
pub const BUNDLE_INTRINSICS: &str = "intrinsics.json";
pub const BUNDLE_GT_EXTRINSICS: &str = "extrinsics_gt.json";
pub const BUNDLE_TRUTH_EDGES: &str = "truth_edges.json";

/// Exit code plus one machine-parseable stderr line.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub kind: &'static str,
    pub detail: String,
}

impl Failure {
    pub fn new(kind: &'static str, code: u8, detail: impl fmt::Display) -> Self {
        Failure {
            code,
            kind,
            detail: detail.to_string().replace('\n', "; "),
        }
    }

    pub fn io(e: impl fmt::Display) -> Self {
        Failure::new("io", 1, e)
    }

    fn io_at(path: &Path, e: impl fmt::Display) -> Self {
        Failure::new("io", 1, format!("{}: {e}", path.display()))
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "error kind={} detail={}", self.kind, self.detail)
    }
}

fn lidar_failure(e: &LidarEdgeError) -> Failure {
    match e {
        LidarEdgeError::EmptyCloud | LidarEdgeError::DegenerateRanges => {
            Failure::new("insufficient-features", 3, e)
        }
        LidarEdgeError::DegenerateBiasDirection => Failure::new("degenerate-geometry", 2, e),
    }
}

fn calibration_failure(e: &CalibrationError) -> Failure {
    match e {
        CalibrationError::Config(m) => Failure::new("config", 1, m),
        CalibrationError::LidarEdge(le) => lidar_failure(le),
        CalibrationError::Registration(re) => match re {
            RegistrationError::InsufficientCorrespondences(_, _) => {
                Failure::new("insufficient-correspondences", 3, re)
            }
            _ => Failure::new("degenerate-geometry", 2, re),
        },
    }
}

#[derive(Args, Debug)]
pub struct CalibrateArgs {
    /// Point cloud with intensity (PCD ascii/binary or ascii PLY).
    #[arg(long)]
    pub cloud: PathBuf,
    /// Camera image; color inputs collapse to luminance.
    #[arg(long)]
    pub image: PathBuf,
    /// Intrinsics JSON {fx, fy, cx, cy, dist:[5], width, height}.
    #[arg(long)]
    pub intrinsics: PathBuf,
    /// Initial extrinsics JSON; identity when omitted.
    #[arg(long)]
    pub init: Option<PathBuf>,
    /// Calibration config file; compiled defaults when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Calibration report JSON destination.
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the config RNG seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Writes intermediate artifacts (spherical intensity PGM, edge
    /// masks, classified edge PLY) into this directory.
    #[arg(long)]
    pub debug_dir: Option<PathBuf>,
}

pub fn cmd_calibrate(args: &CalibrateArgs) -> Result<(), Failure> {
    let (cloud, _dropped) = read_point_cloud(&args.cloud).map_err(Failure::io)?;
    let image = read_image(&args.image).map_err(Failure::io)?;
    let k = read_intrinsics(&args.intrinsics).map_err(Failure::io)?;
    let t_init = match &args.init {
        Some(p) => read_extrinsics(p).map_err(Failure::io)?,
        None => RigidTransform::identity(),
    };
    let mut cfg = match &args.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Failure::io_at(p, e))?;
            CalibConfig::parse(&text)
                .map_err(|m| Failure::new("config", 1, format!("{}: {m}", p.display())))?
        }
        None => CalibConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }

    let run = calibrate(&cloud, &image, &k, &t_init, &cfg).map_err(|e| calibration_failure(&e))?;

    let mut json = serde_json::to_string_pretty(&run.report).expect("report serializes");
    json.push('\n');
    std::fs::write(&args.out, json).map_err(|e| Failure::io_at(&args.out, e))?;

    if let Some(dir) = &args.debug_dir {
        write_debug_artifacts(dir, &cloud, &image, &cfg, &run)?;
    }
    if !run.report.converged {
        return Err(Failure::new(
            "not-converged",
            2,
            "no convergence within the iteration budget",
        ));
    }
    Ok(())
}

/// Blue folds, red silhouettes, green reflectance boundaries.
pub fn class_color(class: EdgeClass) -> [u8; 3] {
    match class {
        EdgeClass::DepthContinuous => [0, 0, 255],
        EdgeClass::DepthDiscontinuous => [255, 0, 0],
        EdgeClass::IntensityDiscontinuous => [0, 255, 0],
    }
}

fn pixel_mask(width: usize, height: usize, pixels: &[(usize, usize)]) -> GrayImage {
    let mut img = GrayImage::new(width as u32, height as u32);
    for &(row, col) in pixels {
        img.set(col as u32, row as u32, 255);
    }
    img
}

fn write_debug_artifacts(
    dir: &Path,
    cloud: &IntensityPointCloud,
    image: &GrayImage,
    cfg: &CalibConfig,
    run: &CalibrationRun,
) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| Failure::io_at(dir, e))?;
    let sph = spherical_project(cloud, cfg).map_err(|e| lidar_failure(&e))?;
    write_pgm(
        &sph.normalized(cfg.normalize_robust),
        &dir.join("spherical_intensity.pgm"),
    )
    .map_err(Failure::io)?;
    let (depth_px, intensity_px) = extract_and_classify(&sph, cfg);
    write_png(
        &pixel_mask(sph.width, sph.height, &depth_px),
        &dir.join("lidar_depth_edges.png"),
    )
    .map_err(Failure::io)?;
    write_png(
        &pixel_mask(sph.width, sph.height, &intensity_px),
        &dir.join("lidar_intensity_edges.png"),
    )
    .map_err(Failure::io)?;
    write_png(
        &run.image_edges.to_mask(image.width, image.height),
        &dir.join("camera_edges.png"),
    )
    .map_err(Failure::io)?;
    let colored: Vec<_> = run
        .edges
        .points
        .iter()
        .map(|p| (p.corrected_position(), class_color(p.edge_class)))
        .collect();
    ply::write_colored(&colored, &dir.join("classified_edges.ply")).map_err(Failure::io)?;
    Ok(())
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Scene kind: corner_room | box_wall | stripes | mixed.
    #[arg(long)]
    pub scene: BenchmarkKind,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Fixture bundle output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the LiDAR range noise sigma (meters).
    #[arg(long)]
    pub range_noise: Option<f64>,
    /// Disables beam-footprint inflation.
    #[arg(long)]
    pub no_inflation: bool,
    /// Adds mid-gap bleeding returns at silhouettes.
    #[arg(long)]
    pub bleeding: bool,
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<(), Failure> {
    let mut bench = make_benchmark_scene(args.scene, args.seed);
    if let Some(sigma) = args.range_noise {
        bench.lidar.range_noise = sigma;
    }
    if args.no_inflation {
        bench.lidar.inflation_enabled = false;
    }
    if args.bleeding {
        bench.lidar.bleeding_enabled = true;
    }
    bench
        .lidar
        .validate()
        .map_err(|m| Failure::new("config", 1, m))?;

    let cloud = raycast(&bench.scene, &bench.lidar);
    let image = render_camera(&bench.scene, &bench.intrinsics, &bench.extrinsics);
    let truth = truth_to_json(&ground_truth_edges(&bench.scene));

    std::fs::create_dir_all(&args.out).map_err(|e| Failure::io_at(&args.out, e))?;
    pcd::write_binary(&cloud, &args.out.join(BUNDLE_CLOUD)).map_err(Failure::io)?;
    write_png(&image, &args.out.join(BUNDLE_IMAGE)).map_err(Failure::io)?;
    write_intrinsics(&bench.intrinsics, &args.out.join(BUNDLE_INTRINSICS)).map_err(Failure::io)?;
    write_extrinsics(&bench.extrinsics, &args.out.join(BUNDLE_GT_EXTRINSICS))
        .map_err(Failure::io)?;
    let mut json = serde_json::to_string_pretty(&truth).expect("truth rows serialize");
    json.push('\n');
    let truth_path = args.out.join(BUNDLE_TRUTH_EDGES);
    std::fs::write(&truth_path, json).map_err(|e| Failure::io_at(&truth_path, e))?;
    Ok(())
}

#[derive(Args, Debug)]
pub struct OverlayArgs {
    #[arg(long)]
    pub cloud: PathBuf,
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long)]
    pub intrinsics: PathBuf,
    /// Extrinsics JSON used for the projection.
    #[arg(long)]
    pub extrinsics: PathBuf,
    /// Output PNG.
    #[arg(long)]
    pub out: PathBuf,
}

/// Draws the cloud over the image, one pixel per projected point,
/// colored by jet-mapped normalized intensity.
pub fn overlay_image(
    cloud: &IntensityPointCloud,
    gray: &GrayImage,
    k: &mfcalib::CameraIntrinsics,
    t: &RigidTransform,
) -> image::RgbImage {
    let mut rgb = image::RgbImage::from_fn(gray.width, gray.height, |x, y| {
        let g = gray.get(x, y);
        image::Rgb([g, g, g])
    });
    let (mut min, mut max) = (f32::INFINITY, f32::NEG_INFINITY);
    for p in &cloud.points {
        min = min.min(p.intensity);
        max = max.max(p.intensity);
    }
    for p in &cloud.points {
        if let Some(uv) = k.project(&t.transform_point(&p.position())) {
            let x = (uv.x.round() as i64).clamp(0, i64::from(gray.width) - 1) as u32;
            let y = (uv.y.round() as i64).clamp(0, i64::from(gray.height) - 1) as u32;
            rgb.put_pixel(x, y, image::Rgb(jet::jet(jet::normalize(p.intensity, min, max))));
        }
    }
    rgb
}

pub fn cmd_overlay(args: &OverlayArgs) -> Result<(), Failure> {
    let (cloud, _) = read_point_cloud(&args.cloud).map_err(Failure::io)?;
    let gray = read_image(&args.image).map_err(Failure::io)?;
    let k = read_intrinsics(&args.intrinsics).map_err(Failure::io)?;
    let t = read_extrinsics(&args.extrinsics).map_err(Failure::io)?;
    let rgb = overlay_image(&cloud, &gray, &k, &t);
    rgb.save_with_format(&args.out, image::ImageFormat::Png)
        .map_err(|e| Failure::io_at(&args.out, e))?;
    Ok(())
}

#[derive(Args, Debug)]
pub struct ColorizeArgs {
    #[arg(long)]
    pub cloud: PathBuf,
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long)]
    pub intrinsics: PathBuf,
    #[arg(long)]
    pub extrinsics: PathBuf,
    /// Output colored PLY.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn cmd_colorize(args: &ColorizeArgs) -> Result<(), Failure> {
    let (cloud, _) = read_point_cloud(&args.cloud).map_err(Failure::io)?;
    let image = read_image(&args.image).map_err(Failure::io)?;
    let k = read_intrinsics(&args.intrinsics).map_err(Failure::io)?;
    let t = read_extrinsics(&args.extrinsics).map_err(Failure::io)?;
    mfcalib::io::write_colored_cloud(&cloud, &image, &k, &t, &args.out).map_err(Failure::io)?;
    Ok(())
}

#[derive(Args, Debug)]
pub struct MetricsArgs {
    /// First extrinsics JSON.
    pub a: PathBuf,
    /// Second extrinsics JSON.
    pub b: PathBuf,
}

pub fn cmd_metrics(args: &MetricsArgs) -> Result<(), Failure> {
    let a = read_extrinsics(&args.a).map_err(Failure::io)?;
    let b = read_extrinsics(&args.b).map_err(Failure::io)?;
    println!(
        "{:.4} {:.4}",
        rotation_error_deg(&a.rotation, &b.rotation),
        translation_error_cm(&a.translation, &b.translation)
    );
    Ok(())
}
