//! Pipeline configuration: documented defaults plus a line-oriented
//! `key = value` file format with `#` comments. Keys are case-sensitive
//! and match the struct field names exactly.

use std::path::Path;

use super::IoError;

#[derive(Debug, Clone, PartialEq)]
pub struct CalibConfig {
    /// Voxel edge length for plane extraction (m).
    pub voxel_size: f64,
    /// Canny hysteresis thresholds on Sobel gradient magnitude.
    pub canny_low: f64,
    pub canny_high: f64,
    /// Gaussian blur sigma before gradients (px).
    pub gaussian_sigma: f64,
    /// Neighbor count for image-edge line fitting.
    pub knn_k: usize,
    /// Full beam cone angle (rad); footprint radius at range d is
    /// d·tan(θ/2).
    pub beam_divergence: f64,
    /// LiDAR range noise sigma (m).
    pub range_sigma: f64,
    /// LiDAR bearing noise sigma in the tangent plane (rad).
    pub bearing_sigma: f64,
    /// Image edge localization sigma (px).
    pub camera_sigma: f64,
    pub max_outer_iters: usize,
    pub max_inner_iters: usize,
    /// Tangent-step norm below which the solve is converged.
    pub convergence_tol: f64,
    /// Spherical intensity-image resolution (rad/px).
    pub spherical_az_res: f64,
    pub spherical_el_res: f64,
    /// Range gap that separates fore/background in a pixel window (m).
    pub depth_jump_threshold: f64,
    /// Pixel radius of the depth window that splits depth- from
    /// intensity-discontinuous edges.
    pub classify_radius_px: usize,
    /// Clip intensities to the 1st..99th percentile before scaling to
    /// 0..255; resists a few saturated returns.
    pub normalize_robust: bool,
    /// Reject matches whose nearest image edge is farther than this (px).
    pub correspondence_max_px: f64,
    /// Robust loss on normalized residuals; disable for a pure
    /// least-squares objective.
    pub use_huber: bool,
    /// Per-class feature switches for ablation runs.
    pub use_depth_continuous: bool,
    pub use_depth_discontinuous: bool,
    pub use_intensity: bool,
    /// Subtract the beam-footprint inflation offset from silhouette
    /// points before projecting.
    pub use_bias_correction: bool,
    /// Seed for every pseudo-random draw in the pipeline.
    pub seed: u64,
}

impl Default for CalibConfig {
    fn default() -> Self {
        CalibConfig {
            voxel_size: 1.0,
            canny_low: 40.0,
            canny_high: 110.0,
            gaussian_sigma: 1.4,
            knn_k: 5,
            beam_divergence: 0.0028,
            range_sigma: 0.02,
            bearing_sigma: 0.00087,
            camera_sigma: 1.0,
            max_outer_iters: 20,
            max_inner_iters: 50,
            convergence_tol: 1e-8,
            spherical_az_res: 0.002,
            spherical_el_res: 0.002,
            depth_jump_threshold: 0.3,
            classify_radius_px: 2,
            normalize_robust: false,
            correspondence_max_px: 20.0,
            use_huber: true,
            use_depth_continuous: true,
            use_depth_discontinuous: true,
            use_intensity: true,
            use_bias_correction: true,
            seed: 0,
        }
    }
}

impl CalibConfig {
    /// Checks the cross-field invariants; every loaded or hand-built
    /// config should pass through here before use.
    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            ("voxel_size", self.voxel_size),
            ("canny_low", self.canny_low),
            ("canny_high", self.canny_high),
            ("gaussian_sigma", self.gaussian_sigma),
            ("beam_divergence", self.beam_divergence),
            ("range_sigma", self.range_sigma),
            ("bearing_sigma", self.bearing_sigma),
            ("camera_sigma", self.camera_sigma),
            ("convergence_tol", self.convergence_tol),
            ("spherical_az_res", self.spherical_az_res),
            ("spherical_el_res", self.spherical_el_res),
            ("depth_jump_threshold", self.depth_jump_threshold),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(format!("{name} must be positive, got {v}"));
            }
        }
        if self.correspondence_max_px < 0.0 || !self.correspondence_max_px.is_finite() {
            return Err(format!(
                "correspondence_max_px must be non-negative, got {}",
                self.correspondence_max_px
            ));
        }
        if self.canny_low >= self.canny_high {
            return Err(format!(
                "canny_low ({}) must be below canny_high ({})",
                self.canny_low, self.canny_high
            ));
        }
        if self.knn_k < 2 {
            return Err(format!("knn_k must be at least 2, got {}", self.knn_k));
        }
        if self.max_outer_iters == 0 || self.max_inner_iters == 0 {
            return Err("iteration limits must be at least 1".into());
        }
        if self.classify_radius_px == 0 {
            return Err("classify_radius_px must be at least 1".into());
        }
        Ok(())
    }

    /// Parses config text; keys absent from the text keep their defaults.
    pub fn parse(text: &str) -> Result<CalibConfig, String> {
        let mut cfg = CalibConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected `key = value`", lineno + 1))?;
            let (key, value) = (key.trim(), value.trim());
            let bad = || format!("line {}: bad value for {key}: {value:?}", lineno + 1);
            match key {
                "voxel_size" => cfg.voxel_size = value.parse().map_err(|_| bad())?,
                "canny_low" => cfg.canny_low = value.parse().map_err(|_| bad())?,
                "canny_high" => cfg.canny_high = value.parse().map_err(|_| bad())?,
                "gaussian_sigma" => cfg.gaussian_sigma = value.parse().map_err(|_| bad())?,
                "knn_k" => cfg.knn_k = value.parse().map_err(|_| bad())?,
                "beam_divergence" => cfg.beam_divergence = value.parse().map_err(|_| bad())?,
                "range_sigma" => cfg.range_sigma = value.parse().map_err(|_| bad())?,
                "bearing_sigma" => cfg.bearing_sigma = value.parse().map_err(|_| bad())?,
                "camera_sigma" => cfg.camera_sigma = value.parse().map_err(|_| bad())?,
                "max_outer_iters" => cfg.max_outer_iters = value.parse().map_err(|_| bad())?,
                "max_inner_iters" => cfg.max_inner_iters = value.parse().map_err(|_| bad())?,
                "convergence_tol" => cfg.convergence_tol = value.parse().map_err(|_| bad())?,
                "spherical_az_res" => cfg.spherical_az_res = value.parse().map_err(|_| bad())?,
                "spherical_el_res" => cfg.spherical_el_res = value.parse().map_err(|_| bad())?,
                "depth_jump_threshold" => cfg.depth_jump_threshold = value.parse().map_err(|_| bad())?,
                "classify_radius_px" => cfg.classify_radius_px = value.parse().map_err(|_| bad())?,
                "normalize_robust" => cfg.normalize_robust = value.parse().map_err(|_| bad())?,
                "correspondence_max_px" => {
                    cfg.correspondence_max_px = value.parse().map_err(|_| bad())?
                }
                "use_huber" => cfg.use_huber = value.parse().map_err(|_| bad())?,
                "use_depth_continuous" => cfg.use_depth_continuous = value.parse().map_err(|_| bad())?,
                "use_depth_discontinuous" => {
                    cfg.use_depth_discontinuous = value.parse().map_err(|_| bad())?
                }
                "use_intensity" => cfg.use_intensity = value.parse().map_err(|_| bad())?,
                "use_bias_correction" => cfg.use_bias_correction = value.parse().map_err(|_| bad())?,
                "seed" => cfg.seed = value.parse().map_err(|_| bad())?,
                other => return Err(format!("line {}: unknown key {other:?}", lineno + 1)),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_text(&self) -> String {
        format!(
            "voxel_size = {}\ncanny_low = {}\ncanny_high = {}\ngaussian_sigma = {}\n\
             knn_k = {}\nbeam_divergence = {}\nrange_sigma = {}\nbearing_sigma = {}\n\
             camera_sigma = {}\nmax_outer_iters = {}\nmax_inner_iters = {}\n\
             convergence_tol = {}\nspherical_az_res = {}\nspherical_el_res = {}\n\
             depth_jump_threshold = {}\nclassify_radius_px = {}\nnormalize_robust = {}\n\
             correspondence_max_px = {}\nuse_huber = {}\n\
             use_depth_continuous = {}\nuse_depth_discontinuous = {}\nuse_intensity = {}\n\
             use_bias_correction = {}\nseed = {}\n",
            self.voxel_size,
            self.canny_low,
            self.canny_high,
            self.gaussian_sigma,
            self.knn_k,
            self.beam_divergence,
            self.range_sigma,
            self.bearing_sigma,
            self.camera_sigma,
            self.max_outer_iters,
            self.max_inner_iters,
            self.convergence_tol,
            self.spherical_az_res,
            self.spherical_el_res,
            self.depth_jump_threshold,
            self.classify_radius_px,
            self.normalize_robust,
            self.correspondence_max_px,
            self.use_huber,
            self.use_depth_continuous,
            self.use_depth_discontinuous,
            self.use_intensity,
            self.use_bias_correction,
            self.seed,
        )
    }
}

pub fn read_config(path: &Path) -> Result<CalibConfig, IoError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| IoError::io(path, e))?;
    CalibConfig::parse(&text).map_err(|msg| IoError::Config {
        path: path.to_path_buf(),
        detail: msg,
    })
}

pub fn write_config(cfg: &CalibConfig, path: &Path) -> Result<(), IoError> {
    std::fs::write(path, cfg.to_text()).map_err(|e| IoError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_yields_defaults() {
        let cfg = CalibConfig::parse("").unwrap();
        assert_eq!(cfg, CalibConfig::default());
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn comments_and_blank_lines_ignored() {
        let cfg = CalibConfig::parse("# header\n\nvoxel_size = 0.5 # inline\n").unwrap();
        assert_eq!(cfg.voxel_size, 0.5);
    }

    #[test]
    fn negative_voxel_size_rejected() {
        let err = CalibConfig::parse("voxel_size = -1\n").unwrap_err();
        assert!(err.contains("voxel_size"), "{err}");
    }

    #[test]
    fn inverted_canny_thresholds_rejected() {
        let err = CalibConfig::parse("canny_low = 120\n").unwrap_err();
        assert!(err.contains("canny_low"), "{err}");
    }

    #[test]
    fn unknown_key_rejected() {
        let err = CalibConfig::parse("voxelsize = 1\n").unwrap_err();
        assert!(err.contains("unknown key"), "{err}");
    }

    #[test]
    fn round_trips_through_file() {
        let mut cfg = CalibConfig::default();
        cfg.knn_k = 5;
        cfg.voxel_size = 0.75;
        cfg.use_huber = false;
        cfg.seed = 42;
        cfg.normalize_robust = true;
        let f = tempfile::NamedTempFile::new().unwrap();
        write_config(&cfg, f.path()).unwrap();
        assert_eq!(read_config(f.path()).unwrap(), cfg);
    }

    #[test]
    fn malformed_line_reports_position() {
        let err = CalibConfig::parse("voxel_size 1.0\n").unwrap_err();
        assert!(err.starts_with("line 1"), "{err}");
    }
}
