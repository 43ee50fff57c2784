//! PNG input/output, box-filter downsampling to 64x64 and 64x64 tiling.

use std::io::Cursor;
use std::path::{Path, PathBuf};

use png::{BitDepth, ColorType};

use crate::error::{Error, Result};

pub const SIDE: usize = 64;
pub const CHANNELS: usize = 3;
/// Length of the flattened `64 x 64 x 3` channel vector.
pub const IMAGE_VALUES: usize = SIDE * SIDE * CHANNELS;

/// Arbitrary-size 8-bit RGB image, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ImageRgbFull {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl ImageRgbFull {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::domain("image dimensions must be at least 1x1"));
        }
        if pixels.len() != width * height * CHANNELS {
            return Err(Error::shape(format!(
                "{width}x{height} RGB image needs {} bytes, got {}",
                width * height * CHANNELS,
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [u8; 3]) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width * height * CHANNELS);
        for y in 0..height {
            for x in 0..width {
                pixels.extend_from_slice(&f(x, y));
            }
        }
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * CHANNELS;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    /// Top-left `w x h` crop.
    pub fn crop(&self, w: usize, h: usize) -> Result<Self> {
        if w > self.width || h > self.height {
            return Err(Error::domain("crop larger than image"));
        }
        Self::from_fn(w, h, |x, y| self.pixel(x, y))
    }

    /// Grow to at least 64x64 by replicating the right and bottom edges.
    fn edge_padded(&self) -> ImageRgbFull {
        let (w, h) = (self.width.max(SIDE), self.height.max(SIDE));
        if (w, h) == (self.width, self.height) {
            return self.clone();
        }
        Self::from_fn(w, h, |x, y| {
            self.pixel(x.min(self.width - 1), y.min(self.height - 1))
        })
        .expect("non-empty")
    }
}

/// 64x64 RGB image with channels in `[0, 1]`, interleaved row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageRgb64 {
    data: Vec<f32>,
}

impl ImageRgb64 {
    pub fn new(data: Vec<f32>) -> Result<Self> {
        if data.len() != IMAGE_VALUES {
            return Err(Error::shape(format!(
                "64x64 RGB image needs {IMAGE_VALUES} values, got {}",
                data.len()
            )));
        }
        if data.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::domain("image channels must lie in [0, 1]"));
        }
        Ok(Self { data })
    }

    pub fn from_fn(mut f: impl FnMut(usize, usize) -> [f32; 3]) -> Result<Self> {
        let mut data = Vec::with_capacity(IMAGE_VALUES);
        for y in 0..SIDE {
            for x in 0..SIDE {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self::new(data)
    }

    pub fn filled(rgb: [f32; 3]) -> Result<Self> {
        Self::from_fn(|_, _| rgb)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f32; 3] {
        let i = (y * SIDE + x) * CHANNELS;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    /// Pixels in row-major scan order.
    pub fn scan(&self) -> impl Iterator<Item = [f32; 3]> + '_ {
        self.data.chunks_exact(CHANNELS).map(|c| [c[0], c[1], c[2]])
    }

    /// Exact conversion of an 8-bit 64x64 image.
    pub fn from_full(full: &ImageRgbFull) -> Result<Self> {
        if full.width != SIDE || full.height != SIDE {
            return Err(Error::shape(format!(
                "expected 64x64, got {}x{}",
                full.width, full.height
            )));
        }
        Self::new(full.pixels.iter().map(|&b| f32::from(b) / 255.0).collect())
    }

    /// 8-bit rendering, rounding each channel to the nearest level.
    pub fn to_full(&self) -> ImageRgbFull {
        ImageRgbFull {
            width: SIDE,
            height: SIDE,
            pixels: self.data.iter().map(|&v| unit_to_u8(v)).collect(),
        }
    }

    pub fn to_png(&self) -> Result<Vec<u8>> {
        save_png(&self.to_full())
    }
}

pub(crate) fn unit_to_u8(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// `round(c * a / 255)` with halves rounded up.
fn composite_over_black(c: u8, a: u8) -> u8 {
    ((2 * u32::from(c) * u32::from(a) + 255) / 510) as u8
}

/// Decode an 8-bit grayscale, gray+alpha, RGB or RGBA PNG. Alpha is
/// composited over black.
pub fn load_png(bytes: &[u8]) -> Result<ImageRgbFull> {
    let png_err = |e: png::DecodingError| Error::Png(e.to_string());
    let decoder = png::Decoder::new(Cursor::new(bytes));
    let mut reader = decoder.read_info().map_err(png_err)?;
    let (color, depth) = {
        let info = reader.info();
        (info.color_type, info.bit_depth)
    };
    if depth != BitDepth::Eight {
        return Err(Error::Png(format!("unsupported bit depth {depth:?}; only 8-bit images are accepted")));
    }
    let per_pixel = match color {
        ColorType::Grayscale => 1,
        ColorType::GrayscaleAlpha => 2,
        ColorType::Rgb => 3,
        ColorType::Rgba => 4,
        ColorType::Indexed => {
            return Err(Error::Png("indexed-color PNGs are not supported".into()));
        }
    };
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::Png("image too large".into()))?;
    let mut buf = vec![0u8; size];
    let frame = reader.next_frame(&mut buf).map_err(png_err)?;
    let (w, h) = (frame.width as usize, frame.height as usize);
    let mut pixels = Vec::with_capacity(w * h * CHANNELS);
    for row in buf[..frame.buffer_size()].chunks(frame.line_size) {
        for px in row[..w * per_pixel].chunks_exact(per_pixel) {
            let rgb = match per_pixel {
                1 => [px[0]; 3],
                2 => [composite_over_black(px[0], px[1]); 3],
                3 => [px[0], px[1], px[2]],
                _ => [
                    composite_over_black(px[0], px[3]),
                    composite_over_black(px[1], px[3]),
                    composite_over_black(px[2], px[3]),
                ],
            };
            pixels.extend_from_slice(&rgb);
        }
    }
    ImageRgbFull::new(w, h, pixels)
}

/// Encode as an 8-bit RGB PNG.
pub fn save_png(image: &ImageRgbFull) -> Result<Vec<u8>> {
    let png_err = |e: png::EncodingError| Error::Png(e.to_string());
    let mut out = Vec::new();
    {
        let mut encoder = png::Encoder::new(&mut out, image.width as u32, image.height as u32);
        encoder.set_color(ColorType::Rgb);
        encoder.set_depth(BitDepth::Eight);
        let mut writer = encoder.write_header().map_err(png_err)?;
        writer.write_image_data(&image.pixels).map_err(png_err)?;
        writer.finish().map_err(png_err)?;
    }
    Ok(out)
}

/// Area-weighted box filter down to 64x64. Images narrower or shorter than
/// 64 are first edge-replicated up to 64 in that dimension.
pub fn downsample64(image: &ImageRgbFull) -> ImageRgb64 {
    let src = image.edge_padded();
    let (w, h) = (src.width, src.height);
    // Target cell t spans [t*W, (t+1)*W) in units of 1/64 source pixel;
    // source pixel i spans [64i, 64(i+1)). Overlaps are exact integers.
    let spans = |len: usize| -> Vec<Vec<(usize, u64)>> {
        (0..SIDE)
            .map(|t| {
                let (a, b) = (t * len, (t + 1) * len);
                (a / SIDE..b.div_ceil(SIDE).min(len))
                    .filter_map(|i| {
                        let lo = a.max(i * SIDE);
                        let hi = b.min((i + 1) * SIDE);
                        (hi > lo).then_some((i, (hi - lo) as u64))
                    })
                    .collect()
            })
            .collect()
    };
    let xs = spans(w);
    let ys = spans(h);
    let denom = (w as u64 * h as u64 * 255) as f64;
    let mut data = Vec::with_capacity(IMAGE_VALUES);
    for row in &ys {
        for col in &xs {
            let mut acc = [0u64; 3];
            for &(sy, wy) in row {
                for &(sx, wx) in col {
                    let p = src.pixel(sx, sy);
                    for c in 0..CHANNELS {
                        acc[c] += u64::from(p[c]) * wx * wy;
                    }
                }
            }
            for a in acc {
                data.push((a as f64 / denom) as f32);
            }
        }
    }
    ImageRgb64::new(data).expect("averages of 8-bit values lie in [0, 1]")
}

/// Non-overlapping 64x64 tiles of the unresized image, row-major. Right and
/// bottom remainders are dropped; images smaller than 64x64 give no tiles.
pub fn tile64(image: &ImageRgbFull) -> Vec<ImageRgb64> {
    let (cols, rows) = (image.width / SIDE, image.height / SIDE);
    let mut tiles = Vec::with_capacity(cols * rows);
    for ty in 0..rows {
        for tx in 0..cols {
            let tile = ImageRgb64::from_fn(|x, y| {
                let p = image.pixel(tx * SIDE + x, ty * SIDE + y);
                p.map(|b| f32::from(b) / 255.0)
            })
            .expect("8-bit channels lie in [0, 1]");
            tiles.push(tile);
        }
    }
    tiles
}

/// Every `*.png` under `dir` (recursively), sorted lexicographically.
pub fn png_files_in(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in walkdir::WalkDir::new(dir) {
        let entry = entry.map_err(|e| {
            let path = e.path().map(Path::to_path_buf).unwrap_or_else(|| dir.to_path_buf());
            Error::io(path, e.into())
        })?;
        let is_png = entry
            .path()
            .extension()
            .is_some_and(|ext| ext.eq_ignore_ascii_case("png"));
        if entry.file_type().is_file() && is_png {
            files.push(entry.into_path());
        }
    }
    files.sort();
    Ok(files)
}

pub fn read_png_file(path: &Path) -> Result<ImageRgbFull> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    load_png(&bytes)
}

/// Load any PNG at the 64x64 working resolution.
pub fn read_png64(path: &Path) -> Result<ImageRgb64> {
    Ok(downsample64(&read_png_file(path)?))
}
