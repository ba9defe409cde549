//! Jet colormap for intensity visualization.

/// Piecewise-linear jet: four segments between the control points
/// blue (0) -> cyan (0.25) -> green (0.5) -> yellow (0.75) -> red (1).
/// Input is clamped to [0, 1].
pub fn jet(t: f64) -> [u8; 3] {
    const KNOTS: [(f64, [f64; 3]); 5] = [
        (0.00, [0.0, 0.0, 1.0]),
        (0.25, [0.0, 1.0, 1.0]),
        (0.50, [0.0, 1.0, 0.0]),
        (0.75, [1.0, 1.0, 0.0]),
        (1.00, [1.0, 0.0, 0.0]),
    ];
    let t = if t.is_nan() { 0.0 } else { t.clamp(0.0, 1.0) };
    let i = KNOTS
        .windows(2)
        .position(|w| t <= w[1].0)
        .unwrap_or(KNOTS.len() - 2);
    let (t0, a) = KNOTS[i];
    let (t1, b) = KNOTS[i + 1];
    let f = (t - t0) / (t1 - t0);
    let mut rgb = [0u8; 3];
    for (out, (lo, hi)) in rgb.iter_mut().zip(a.iter().zip(b.iter())) {
        *out = ((lo + f * (hi - lo)) * 255.0).round() as u8;
    }
    rgb
}

/// Maps an intensity to [0, 1] within the cloud's observed range.
/// A constant-intensity cloud maps everything to the midpoint.
pub fn normalize(value: f32, min: f32, max: f32) -> f64 {
    if max > min {
        f64::from((value - min) / (max - min))
    } else {
        0.5
    }
}
