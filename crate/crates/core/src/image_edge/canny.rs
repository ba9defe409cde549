//! Canny edge detection: Gaussian blur, Sobel gradients, non-maximum
//! suppression along the quantized gradient direction, and double
//! threshold hysteresis with 8-connectivity.
//!
//! Borders replicate-pad for the convolutions; the outermost two-pixel
//! frame never emits edges, so padding artifacts stay out of the output.

use crate::io::GrayImage;

use super::EdgePixelSet;

/// f64 scratch plane used between stages.
struct Plane {
    w: usize,
    h: usize,
    data: Vec<f64>,
}

impl Plane {
    fn new(w: usize, h: usize) -> Plane {
        Plane {
            w,
            h,
            data: vec![0.0; w * h],
        }
    }

    #[inline]
    fn at(&self, x: isize, y: isize) -> f64 {
        // Replicate padding.
        let x = x.clamp(0, self.w as isize - 1) as usize;
        let y = y.clamp(0, self.h as isize - 1) as usize;
        self.data[y * self.w + x]
    }

    #[inline]
    fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.w + x]
    }

    #[inline]
    fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.w + x] = v;
    }
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil().max(1.0) as isize;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

fn blur(img: &GrayImage, sigma: f64) -> Plane {
    let (w, h) = (img.width as usize, img.height as usize);
    let kernel = gaussian_kernel(sigma);
    let radius = (kernel.len() / 2) as isize;
    let mut src = Plane::new(w, h);
    for y in 0..h {
        for x in 0..w {
            src.set(x, y, img.get(x as u32, y as u32) as f64);
        }
    }
    let mut tmp = Plane::new(w, h);
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (i, kv) in kernel.iter().enumerate() {
                acc += kv * src.at(x as isize + i as isize - radius, y as isize);
            }
            tmp.set(x, y, acc);
        }
    }
    let mut out = Plane::new(w, h);
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (i, kv) in kernel.iter().enumerate() {
                acc += kv * tmp.at(x as isize, y as isize + i as isize - radius);
            }
            out.set(x, y, acc);
        }
    }
    out
}

/// 3×3 Sobel pair; y grows downward.
fn sobel(src: &Plane) -> (Plane, Plane) {
    let (w, h) = (src.w, src.h);
    let mut gx = Plane::new(w, h);
    let mut gy = Plane::new(w, h);
    for y in 0..h as isize {
        for x in 0..w as isize {
            let v = |dx: isize, dy: isize| src.at(x + dx, y + dy);
            let sx = (v(1, -1) + 2.0 * v(1, 0) + v(1, 1)) - (v(-1, -1) + 2.0 * v(-1, 0) + v(-1, 1));
            let sy = (v(-1, 1) + 2.0 * v(0, 1) + v(1, 1)) - (v(-1, -1) + 2.0 * v(0, -1) + v(1, -1));
            gx.set(x as usize, y as usize, sx);
            gy.set(x as usize, y as usize, sy);
        }
    }
    (gx, gy)
}

/// Offset pair for the two neighbors along the quantized gradient
/// direction. The first is the tie-winning side: of two equal-magnitude
/// pixels straddling an ideal edge, the one whose first neighbor is
/// strictly weaker survives, keeping ridges one pixel thin.
fn direction_offsets(gx: f64, gy: f64) -> ([isize; 2], [isize; 2]) {
    // Angle folded to [0, 180).
    let mut angle = gy.atan2(gx).to_degrees();
    if angle < 0.0 {
        angle += 180.0;
    }
    if !(22.5..157.5).contains(&angle) {
        ([-1, 0], [1, 0])
    } else if angle < 67.5 {
        ([-1, -1], [1, 1])
    } else if angle < 112.5 {
        ([0, -1], [0, 1])
    } else {
        ([-1, 1], [1, -1])
    }
}

/// Runs the full detector. An image too small to hold the blur kernel
/// plus the excluded border produces an empty set (the caller treats an
/// empty result as a warning; it is not an error here).
pub fn canny(img: &GrayImage, sigma: f64, low: f64, high: f64) -> EdgePixelSet {
    assert!(low < high, "canny thresholds must satisfy low < high");
    let (w, h) = (img.width as usize, img.height as usize);
    let support = 2 * (3.0 * sigma).ceil().max(1.0) as usize + 1;
    if w < support.max(5) || h < support.max(5) {
        return EdgePixelSet::empty();
    }
    let blurred = blur(img, sigma);
    let (gx, gy) = sobel(&blurred);

    let mut mag = Plane::new(w, h);
    for y in 0..h {
        for x in 0..w {
            mag.set(x, y, gx.get(x, y).hypot(gy.get(x, y)));
        }
    }

    // Non-maximum suppression, skipping the excluded 2-pixel frame.
    let mut keep = vec![false; w * h];
    for y in 2..h - 2 {
        for x in 2..w - 2 {
            let g = mag.get(x, y);
            if g < low {
                continue;
            }
            let (a, b) = direction_offsets(gx.get(x, y), gy.get(x, y));
            let n1 = mag.at(x as isize + a[0], y as isize + a[1]);
            let n2 = mag.at(x as isize + b[0], y as isize + b[1]);
            if g > n1 && g >= n2 {
                keep[y * w + x] = true;
            }
        }
    }

    // Hysteresis: flood from strong pixels across kept weak ones.
    let mut state = vec![0u8; w * h]; // 0 none, 1 weak, 2 strong
    let mut stack = Vec::new();
    for y in 2..h - 2 {
        for x in 2..w - 2 {
            if !keep[y * w + x] {
                continue;
            }
            if mag.get(x, y) >= high {
                state[y * w + x] = 2;
                stack.push((x, y));
            } else {
                state[y * w + x] = 1;
            }
        }
    }
    while let Some((x, y)) = stack.pop() {
        for dy in -1isize..=1 {
            for dx in -1isize..=1 {
                if dx == 0 && dy == 0 {
                    continue;
                }
                let (nx, ny) = (x as isize + dx, y as isize + dy);
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let ni = ny as usize * w + nx as usize;
                if state[ni] == 1 {
                    state[ni] = 2;
                    stack.push((nx as usize, ny as usize));
                }
            }
        }
    }

    let mut pixels = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if state[y * w + x] == 2 {
                pixels.push((x as u32, y as u32));
            }
        }
    }
    EdgePixelSet::from_pixels_allow_empty(pixels)
}
