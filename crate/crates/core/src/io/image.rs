//! Gray image container plus PNG (via the `image` crate) and PGM codecs.
//! Color inputs collapse to luminance 0.299 R + 0.587 G + 0.114 B,
//! rounded to the nearest integer.

use std::path::Path;

use super::IoError;

/// Row-major 8-bit luminance image.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub width: u32,
    pub height: u32,
    pub data: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: u32, height: u32) -> Self {
        GrayImage {
            width,
            height,
            data: vec![0; width as usize * height as usize],
        }
    }

    pub fn from_data(width: u32, height: u32, data: Vec<u8>) -> Self {
        assert_eq!(data.len(), width as usize * height as usize);
        GrayImage {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.data[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, v: u8) {
        self.data[y as usize * self.width as usize + x as usize] = v;
    }
}

pub fn luminance(r: u8, g: u8, b: u8) -> u8 {
    (0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64).round() as u8
}

/// Reads PNG or PGM, sniffing the magic bytes.
pub fn read_image(path: &Path) -> Result<GrayImage, IoError> {
    let bytes = std::fs::read(path).map_err(|e| IoError::io(path, e))?;
    if bytes.starts_with(b"P2") || bytes.starts_with(b"P5") {
        parse_pgm(path, &bytes)
    } else if bytes.starts_with(&[0x89, b'P', b'N', b'G']) {
        parse_png(path, &bytes)
    } else {
        Err(IoError::malformed(path, "unsupported image format"))
    }
}

fn parse_png(path: &Path, bytes: &[u8]) -> Result<GrayImage, IoError> {
    let dynamic = image::load_from_memory(bytes)
        .map_err(|e| IoError::malformed(path, format!("PNG decode failed: {e}")))?;
    let (width, height) = (dynamic.width(), dynamic.height());
    let data = match dynamic {
        image::DynamicImage::ImageLuma8(img) => img.into_raw(),
        other => other
            .to_rgb8()
            .pixels()
            .map(|p| luminance(p.0[0], p.0[1], p.0[2]))
            .collect(),
    };
    Ok(GrayImage::from_data(width, height, data))
}

/// PGM P2/P5 with maxval up to 255; values rescale to a 255 maxval.
fn parse_pgm(path: &Path, bytes: &[u8]) -> Result<GrayImage, IoError> {
    let bad = |d: &str| IoError::malformed(path, format!("PGM: {d}"));
    let binary = bytes.starts_with(b"P5");
    // Header tokens (magic, width, height, maxval) separated by whitespace,
    // with # comments running to end of line.
    let mut tokens = Vec::new();
    let mut pos = 2usize;
    while tokens.len() < 3 && pos < bytes.len() {
        match bytes[pos] {
            b'#' => {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            }
            c if c.is_ascii_whitespace() => pos += 1,
            _ => {
                let start = pos;
                while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                    pos += 1;
                }
                let tok = std::str::from_utf8(&bytes[start..pos])
                    .map_err(|_| bad("non-ASCII header"))?;
                tokens.push(tok.parse::<u32>().map_err(|_| bad("bad header number"))?);
            }
        }
    }
    let [width, height, maxval] = tokens[..] else {
        return Err(bad("truncated header"));
    };
    if maxval == 0 || maxval > 255 {
        return Err(bad("only 8-bit PGM supported"));
    }
    let count = width as usize * height as usize;
    let raw: Vec<u32> = if binary {
        pos += 1; // single whitespace byte after maxval
        if bytes.len() < pos + count {
            return Err(bad("truncated pixel data"));
        }
        bytes[pos..pos + count].iter().map(|&b| b as u32).collect()
    } else {
        let text = std::str::from_utf8(&bytes[pos..]).map_err(|_| bad("non-ASCII data"))?;
        let vals: Result<Vec<u32>, _> = text.split_whitespace().map(str::parse).collect();
        let vals = vals.map_err(|_| bad("bad pixel value"))?;
        if vals.len() < count {
            return Err(bad("truncated pixel data"));
        }
        vals[..count].to_vec()
    };
    let data = raw
        .iter()
        .map(|&v| {
            let v = v.min(maxval);
            ((v * 255 + maxval / 2) / maxval) as u8
        })
        .collect();
    Ok(GrayImage::from_data(width, height, data))
}

pub fn write_png(img: &GrayImage, path: &Path) -> Result<(), IoError> {
    let buf = image::GrayImage::from_raw(img.width, img.height, img.data.clone())
        .expect("dimension invariant");
    buf.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| IoError::malformed(path, format!("PNG encode failed: {e}")))
}

pub fn write_pgm(img: &GrayImage, path: &Path) -> Result<(), IoError> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.data);
    std::fs::write(path, out).map_err(|e| IoError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_ascii_values_pass_through() {
        let f = tempfile::NamedTempFile::new().unwrap();
        std::fs::write(f.path(), "P2\n# a comment\n2 2\n255\n0 255\n128 64\n").unwrap();
        let img = read_image(f.path()).unwrap();
        assert_eq!((img.width, img.height), (2, 2));
        assert_eq!(img.data, vec![0, 255, 128, 64]);
    }

    #[test]
    fn pgm_binary_round_trip() {
        let src = GrayImage::from_data(3, 2, vec![0, 10, 20, 255, 128, 7]);
        let f = tempfile::NamedTempFile::new().unwrap();
        write_pgm(&src, f.path()).unwrap();
        assert_eq!(read_image(f.path()).unwrap(), src);
    }

    #[test]
    fn red_pixel_luminance_is_76() {
        assert_eq!(luminance(255, 0, 0), 76);
        let rgb = image::RgbImage::from_pixel(1, 1, image::Rgb([255, 0, 0]));
        let f = tempfile::NamedTempFile::with_suffix(".png").unwrap();
        rgb.save(f.path()).unwrap();
        let img = read_image(f.path()).unwrap();
        assert_eq!(img.data, vec![76]);
    }

    #[test]
    fn png_gray_round_trip() {
        let src = GrayImage::from_data(4, 3, (0u8..12).map(|v| v * 20).collect());
        let f = tempfile::NamedTempFile::with_suffix(".png").unwrap();
        write_png(&src, f.path()).unwrap();
        assert_eq!(read_image(f.path()).unwrap(), src);
    }

    #[test]
    fn truncated_png_rejected() {
        let src = GrayImage::from_data(8, 8, vec![100; 64]);
        let f = tempfile::NamedTempFile::with_suffix(".png").unwrap();
        write_png(&src, f.path()).unwrap();
        let bytes = std::fs::read(f.path()).unwrap();
        std::fs::write(f.path(), &bytes[..bytes.len() / 2]).unwrap();
        assert!(read_image(f.path()).is_err());
    }

    #[test]
    fn unknown_magic_rejected() {
        let f = tempfile::NamedTempFile::new().unwrap();
        std::fs::write(f.path(), b"GIF89a....").unwrap();
        assert!(read_image(f.path()).is_err());
    }
}
