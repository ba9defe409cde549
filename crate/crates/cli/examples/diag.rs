//! Throwaway diagnostic: per-class residual stats at a given pose.

use mfcalib::image_edge::canny;
use mfcalib::io::{read_extrinsics, read_image, read_intrinsics, read_point_cloud};
use mfcalib::pipeline::extract_multi_feature_edges;
use mfcalib::{CalibConfig, EdgeClass};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let bundle = std::path::Path::new(&args[1]);
    let pose_path = std::path::Path::new(&args[2]);

    let (cloud, _) = read_point_cloud(&bundle.join("cloud.pcd")).unwrap();
    let image = read_image(&bundle.join("image.png")).unwrap();
    let k = read_intrinsics(&bundle.join("intrinsics.json")).unwrap();
    let t = read_extrinsics(pose_path).unwrap();

    let mut cfg = CalibConfig::default();
    cfg.range_sigma = 0.002;
    let edges = extract_multi_feature_edges(&cloud, &cfg).unwrap();
    println!("planar diagnostics: {:?}", edges.planar);
    for seg in &edges.segments {
        println!(
            "segment origin=({:6.3},{:6.3},{:6.3}) dir=({:5.2},{:5.2},{:5.2}) extent=[{:6.2},{:6.2}]",
            seg.origin.x, seg.origin.y, seg.origin.z,
            seg.direction.x, seg.direction.y, seg.direction.z,
            seg.extent[0], seg.extent[1]
        );
    }
    let image_edges = canny(&image, cfg.gaussian_sigma, cfg.canny_low, cfg.canny_high);

    for class in [
        EdgeClass::DepthContinuous,
        EdgeClass::DepthDiscontinuous,
        EdgeClass::IntensityDiscontinuous,
    ] {
        let mut ds: Vec<f64> = Vec::new();
        let mut behind = 0usize;
        let mut outside = 0usize;
        for p in edges.points.iter().filter(|p| p.edge_class == class) {
            let pc = t.transform_point(&p.corrected_position());
            match k.project(&pc) {
                Some(uv) => match image_edges.nearest_distance(uv) {
                    Some(d) => ds.push(d),
                    None => outside += 1,
                },
                None => behind += 1,
            }
        }
        ds.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = ds.len();
        if n == 0 {
            println!("{class:?}: no projected points (behind={behind} out={outside})");
            continue;
        }
        let mean = ds.iter().sum::<f64>() / n as f64;
        let pct = |q: f64| ds[((n as f64 * q) as usize).min(n - 1)];
        println!(
            "{class:?}: n={n} behind/out={behind}/{outside} mean={mean:.2} p50={:.2} p90={:.2} p99={:.2} max={:.2}",
            pct(0.5), pct(0.9), pct(0.99), ds[n-1]
        );

        let mut detailed: Vec<(f64, [f64; 3], [f64; 2])> = edges
            .points
            .iter()
            .filter(|p| p.edge_class == class)
            .filter_map(|p| {
                let pc = t.transform_point(&p.corrected_position());
                let uv = k.project(&pc)?;
                let d = image_edges.nearest_distance(uv)?;
                Some((d, [p.position.x, p.position.y, p.position.z], [uv.x, uv.y]))
            })
            .collect();
        detailed.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
        for (d, p, uv) in detailed.iter().take(8) {
            println!(
                "  worst d={d:7.2}  xyz=({:6.3},{:6.3},{:6.3})  uv=({:7.1},{:7.1})",
                p[0], p[1], p[2], uv[0], uv[1]
            );
        }
    }
}
