//! 8-bit RGB rasters, PNG encoding, bilinear resizing and the Parula
//! colour map.

use std::fs;
use std::io::Cursor;
use std::path::Path;
use std::sync::OnceLock;

use crate::dsp::SpectrogramMatrix;
use crate::error::{Error, Result};

/// Side length of images handed to embedding providers.
pub const EMBED_SIZE: usize = 224;

/// Row-major interleaved RGB, 8 bits per channel.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize) -> Self {
        RgbImage {
            width,
            height,
            data: vec![0; width * height * 3],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [u8; 3]) -> Self {
        let mut img = Self::new(width, height);
        for y in 0..height {
            for x in 0..width {
                img.put(x, y, f(x, y));
            }
        }
        img
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        let i = 3 * (y * self.width + x);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn put(&mut self, x: usize, y: usize, px: [u8; 3]) {
        let i = 3 * (y * self.width + x);
        self.data[i..i + 3].copy_from_slice(&px);
    }

    pub fn shape_str(&self) -> String {
        format!("{}x{}x3", self.width, self.height)
    }

    /// Fails unless the image is `width × height × 3`.
    pub fn expect_shape(&self, width: usize, height: usize) -> Result<()> {
        if self.width != width || self.height != height || self.data.len() != width * height * 3 {
            return Err(Error::ImageShape {
                expected: format!("{width}x{height}x3"),
                got: self.shape_str(),
            });
        }
        Ok(())
    }

    /// Bilinear resampling with pixel-centre alignment.
    pub fn resize_bilinear(&self, width: usize, height: usize) -> RgbImage {
        if width == self.width && height == self.height {
            return self.clone();
        }
        let sx = self.width as f64 / width as f64;
        let sy = self.height as f64 / height as f64;
        let coord = |dst: usize, scale: f64, len: usize| -> (usize, usize, f64) {
            let s = ((dst as f64 + 0.5) * scale - 0.5).max(0.0);
            let i0 = (s.floor() as usize).min(len - 1);
            let i1 = (i0 + 1).min(len - 1);
            (i0, i1, s - i0 as f64)
        };
        let mut out = RgbImage::new(width, height);
        for y in 0..height {
            let (y0, y1, fy) = coord(y, sy, self.height);
            for x in 0..width {
                let (x0, x1, fx) = coord(x, sx, self.width);
                let (a, b, c, d) = (self.get(x0, y0), self.get(x1, y0), self.get(x0, y1), self.get(x1, y1));
                let mut px = [0u8; 3];
                for k in 0..3 {
                    let top = a[k] as f64 * (1.0 - fx) + b[k] as f64 * fx;
                    let bot = c[k] as f64 * (1.0 - fx) + d[k] as f64 * fx;
                    px[k] = (top * (1.0 - fy) + bot * fy).round().clamp(0.0, 255.0) as u8;
                }
                out.put(x, y, px);
            }
        }
        out
    }

    pub fn to_png_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut buf, self.width as u32, self.height as u32);
            enc.set_color(png::ColorType::Rgb);
            enc.set_depth(png::BitDepth::Eight);
            let mut w = enc.write_header().expect("png header to memory");
            w.write_image_data(&self.data).expect("png data to memory");
        }
        buf
    }

    /// Decodes an 8-bit PNG; gray and alpha variants are converted to RGB.
    pub fn from_png_bytes(bytes: &[u8]) -> Result<Self> {
        let mut dec = png::Decoder::new(Cursor::new(bytes));
        dec.set_transformations(png::Transformations::EXPAND | png::Transformations::STRIP_16);
        let mut reader = dec.read_info().map_err(|e| Error::parse("png", e.to_string()))?;
        let (w, h) = {
            let info = reader.info();
            (info.width as usize, info.height as usize)
        };
        if w == 0 || h == 0 || w.saturating_mul(h) > 1 << 26 {
            return Err(Error::parse("png", format!("unsupported dimensions {w}x{h}")));
        }
        let mut buf = vec![0; reader.output_buffer_size()];
        let frame = reader
            .next_frame(&mut buf)
            .map_err(|e| Error::parse("png", e.to_string()))?;
        let channels = match frame.color_type {
            png::ColorType::Rgb => 3,
            png::ColorType::Rgba => 4,
            png::ColorType::Grayscale => 1,
            png::ColorType::GrayscaleAlpha => 2,
            png::ColorType::Indexed => {
                return Err(Error::parse("png", "unexpanded palette image"));
            }
        };
        let mut img = RgbImage::new(w, h);
        for y in 0..h {
            let row = &buf[y * frame.line_size..];
            for x in 0..w {
                let p = &row[x * channels..];
                let px = match channels {
                    1 | 2 => [p[0]; 3],
                    _ => [p[0], p[1], p[2]],
                };
                img.put(x, y, px);
            }
        }
        Ok(img)
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_png_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load_png(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_png_bytes(&bytes).map_err(|e| e.context(path.display().to_string()))
    }
}

fn parula_table() -> &'static [[f64; 3]] {
    static TABLE: OnceLock<Vec<[f64; 3]>> = OnceLock::new();
    TABLE.get_or_init(|| {
        include_str!("../assets/parula64.csv")
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                let v: Vec<f64> = l.split(',').map(|s| s.trim().parse().expect("parula entry")).collect();
                [v[0], v[1], v[2]]
            })
            .collect()
    })
}

/// Parula colour for `v` in [0, 1], linearly interpolated between the 64
/// table entries. Out-of-range values are clamped.
pub fn parula(v: f64) -> [u8; 3] {
    let table = parula_table();
    let v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
    let pos = v * (table.len() - 1) as f64;
    let lo = (pos.floor() as usize).min(table.len() - 1);
    let hi = (lo + 1).min(table.len() - 1);
    let f = pos - lo as f64;
    let mut px = [0u8; 3];
    for k in 0..3 {
        let c = table[lo][k] * (1.0 - f) + table[hi][k] * f;
        px[k] = (c * 255.0).round() as u8;
    }
    px
}

/// Log-power spectrogram raster, one pixel per (bin, frame), highest
/// frequency in the top row, coloured with Parula after min–max scaling.
/// A flat spectrogram maps to the lowest colour.
pub fn spectrogram_raster(m: &SpectrogramMatrix) -> RgbImage {
    let logp: Vec<Vec<f64>> = m
        .values
        .iter()
        .map(|row| row.iter().map(|p| (p + 1e-12).log10()).collect())
        .collect();
    let (lo, hi) = logp
        .iter()
        .flatten()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    let range = hi - lo;
    let bins = m.n_bins();
    RgbImage::from_fn(m.n_frames(), bins, |x, y| {
        let v = logp[bins - 1 - y][x];
        parula(if range > 0.0 { (v - lo) / range } else { 0.0 })
    })
}

/// [`spectrogram_raster`] resized to the embedding input size.
pub fn spectrogram_image(m: &SpectrogramMatrix) -> RgbImage {
    spectrogram_raster(m).resize_bilinear(EMBED_SIZE, EMBED_SIZE)
}
