//! Float color images, depth maps and their file formats.
//!
//! Color images are exchanged as 8-bit PNG and used as-is in `[0, 1]` (no
//! sRGB linearization). Depth maps use a raw little-endian f32 layout preceded
//! by a single JSON header line `{"width":W,"height":H,"dtype":"f32"}`; an
//! invalid pixel is stored as `NaN`.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major RGB image with `f64` channels.
#[derive(Debug, Clone, PartialEq)]
pub struct ColorImage {
    pub width: usize,
    pub height: usize,
    /// `height * width * 3` interleaved values.
    pub data: Vec<f64>,
}

impl ColorImage {
    pub fn new(width: usize, height: usize) -> Self {
        Self::filled(width, height, [0.0; 3])
    }

    pub fn filled(width: usize, height: usize, rgb: [f64; 3]) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for _ in 0..width * height {
            data.extend_from_slice(&rgb);
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> [f64; 3]) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn get(&self, x: usize, y: usize) -> [f64; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set(&mut self, x: usize, y: usize, rgb: [f64; 3]) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn same_size(&self, width: usize, height: usize) -> bool {
        self.width == width && self.height == height
    }

    pub fn to_rgb8(&self) -> image::RgbImage {
        let bytes = self.data.iter().map(|&v| quantize(v)).collect();
        image::RgbImage::from_raw(self.width as u32, self.height as u32, bytes)
            .expect("buffer matches dimensions")
    }

    pub fn from_rgb8(img: &image::RgbImage) -> Self {
        Self {
            width: img.width() as usize,
            height: img.height() as usize,
            data: img.as_raw().iter().map(|&b| b as f64 / 255.0).collect(),
        }
    }

    pub fn load_png(path: &Path) -> Result<Self> {
        Ok(Self::from_rgb8(&image::open(path)?.to_rgb8()))
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        self.to_rgb8().save(path)?;
        Ok(())
    }

    pub fn encode_png(&self) -> Vec<u8> {
        encode_png(&image::DynamicImage::ImageRgb8(self.to_rgb8()))
    }

    pub fn decode_png(bytes: &[u8]) -> Result<Self> {
        Ok(Self::from_rgb8(&image::load_from_memory(bytes)?.to_rgb8()))
    }

    /// Bilinear resample to a new size (pixel centers aligned at integer coordinates).
    pub fn resize_bilinear(&self, width: usize, height: usize) -> Self {
        let mut out = Self::new(width, height);
        for y in 0..height {
            for x in 0..width {
                let (sx, sy) = source_coord(x, y, (self.width, self.height), (width, height));
                let mut rgb = [0.0; 3];
                for (c, v) in rgb.iter_mut().enumerate() {
                    *v = bilinear(sx, sy, self.width, self.height, |xx, yy| {
                        self.data[(yy * self.width + xx) * 3 + c]
                    });
                }
                out.set(x, y, rgb);
            }
        }
        out
    }
}

pub(crate) fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub(crate) fn encode_png(img: &image::DynamicImage) -> Vec<u8> {
    let mut buf = std::io::Cursor::new(Vec::new());
    img.write_to(&mut buf, image::ImageFormat::Png)
        .expect("in-memory png encoding");
    buf.into_inner()
}

/// Single-channel depth with per-pixel validity.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    pub width: usize,
    pub height: usize,
    pub depth: Vec<f64>,
    pub valid: Vec<bool>,
}

impl DepthMap {
    pub fn invalid(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            depth: vec![0.0; width * height],
            valid: vec![false; width * height],
        }
    }

    /// All pixels valid with values from `f(x, y)`.
    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut depth = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                depth.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            depth,
            valid: vec![true; width * height],
        }
    }

    pub fn at(&self, x: usize, y: usize) -> Option<f64> {
        let i = y * self.width + x;
        self.valid[i].then_some(self.depth[i])
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    /// Enforces the invariant that invalid pixels carry depth 0.
    pub fn sanitize(&mut self) {
        for (d, &v) in self.depth.iter_mut().zip(&self.valid) {
            if !v || !d.is_finite() || *d < 0.0 {
                *d = 0.0;
            }
        }
        for (v, d) in self.valid.iter_mut().zip(&self.depth) {
            *v = *v && d.is_finite();
        }
    }

    pub fn write_raw(&self, mut out: impl Write) -> Result<()> {
        let header = RawHeader {
            width: self.width,
            height: self.height,
            dtype: "f32".into(),
        };
        serde_json::to_writer(&mut out, &header).map_err(std::io::Error::other)?;
        out.write_all(b"\n")?;
        let mut bytes = Vec::with_capacity(self.depth.len() * 4);
        for (&d, &v) in self.depth.iter().zip(&self.valid) {
            let value = if v { d as f32 } else { f32::NAN };
            bytes.extend_from_slice(&value.to_le_bytes());
        }
        out.write_all(&bytes)?;
        Ok(())
    }

    pub fn read_raw(mut input: impl BufRead) -> Result<Self> {
        let mut line = String::new();
        input.read_line(&mut line)?;
        let header: RawHeader = serde_json::from_str(line.trim()).map_err(|e| Error::Parse {
            offset: e.column().saturating_sub(1),
            message: e.to_string(),
        })?;
        if header.dtype != "f32" {
            return Err(Error::Schema(format!("unsupported dtype `{}`", header.dtype)));
        }
        let n = header.width * header.height;
        let mut bytes = vec![0u8; n * 4];
        input.read_exact(&mut bytes).map_err(|_| Error::Parse {
            offset: line.len(),
            message: "truncated depth payload".into(),
        })?;
        let mut map = Self::invalid(header.width, header.height);
        for (i, chunk) in bytes.chunks_exact(4).enumerate() {
            let v = f32::from_le_bytes(chunk.try_into().unwrap());
            if v.is_finite() {
                map.depth[i] = v as f64;
                map.valid[i] = true;
            }
        }
        Ok(map)
    }

    pub fn to_raw_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_raw(&mut buf).expect("writing to a vec");
        buf
    }

    pub fn save_raw(&self, path: &Path) -> Result<()> {
        self.write_raw(std::io::BufWriter::new(std::fs::File::create(path)?))
    }

    pub fn load_raw(path: &Path) -> Result<Self> {
        Self::read_raw(std::io::BufReader::new(std::fs::File::open(path)?))
    }

    /// Single-channel 32-bit float TIFF; invalid pixels are NaN.
    pub fn encode_tiff(&self) -> Vec<u8> {
        let data: Vec<f32> = self
            .depth
            .iter()
            .zip(&self.valid)
            .map(|(&d, &v)| if v { d as f32 } else { f32::NAN })
            .collect();
        let mut buf = std::io::Cursor::new(Vec::new());
        tiff::encoder::TiffEncoder::new(&mut buf)
            .and_then(|mut enc| {
                enc.write_image::<tiff::encoder::colortype::Gray32Float>(
                    self.width as u32,
                    self.height as u32,
                    &data,
                )
            })
            .expect("in-memory tiff encoding");
        buf.into_inner()
    }

    pub fn decode_tiff(bytes: &[u8]) -> Result<Self> {
        let tiff_err = |e: tiff::TiffError| Error::Image(e.to_string());
        let mut dec = tiff::decoder::Decoder::new(std::io::Cursor::new(bytes)).map_err(tiff_err)?;
        let (w, h) = dec.dimensions().map_err(tiff_err)?;
        let tiff::decoder::DecodingResult::F32(data) = dec.read_image().map_err(tiff_err)? else {
            return Err(Error::Schema("depth tiff must hold 32-bit floats".into()));
        };
        let mut map = Self::invalid(w as usize, h as usize);
        if data.len() != map.depth.len() {
            return Err(Error::Schema("depth tiff must have one channel".into()));
        }
        for (i, v) in data.into_iter().enumerate() {
            if v.is_finite() {
                map.depth[i] = v as f64;
                map.valid[i] = true;
            }
        }
        Ok(map)
    }

    /// Grayscale preview, near = bright, scaled over the valid range.
    pub fn to_preview(&self) -> image::GrayImage {
        let (lo, hi) = self
            .depth
            .iter()
            .zip(&self.valid)
            .filter(|(_, &v)| v)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (&d, _)| {
                (lo.min(d), hi.max(d))
            });
        let span = (hi - lo).max(1e-12);
        let bytes = self
            .depth
            .iter()
            .zip(&self.valid)
            .map(|(&d, &v)| if v { quantize(1.0 - 0.9 * (d - lo) / span) } else { 0 })
            .collect();
        image::GrayImage::from_raw(self.width as u32, self.height as u32, bytes)
            .expect("buffer matches dimensions")
    }
}

#[derive(Serialize, Deserialize)]
struct RawHeader {
    width: usize,
    height: usize,
    dtype: String,
}

/// Maps destination pixel centers onto source coordinates, corners aligned
/// at the image edges.
pub(crate) fn source_coord(
    x: usize,
    y: usize,
    src: (usize, usize),
    dst: (usize, usize),
) -> (f64, f64) {
    let sx = (x as f64 + 0.5) * src.0 as f64 / dst.0 as f64 - 0.5;
    let sy = (y as f64 + 0.5) * src.1 as f64 / dst.1 as f64 - 0.5;
    (sx, sy)
}

pub(crate) fn bilinear(
    sx: f64,
    sy: f64,
    width: usize,
    height: usize,
    sample: impl Fn(usize, usize) -> f64,
) -> f64 {
    let sx = sx.clamp(0.0, (width - 1) as f64);
    let sy = sy.clamp(0.0, (height - 1) as f64);
    let x0 = sx.floor() as usize;
    let y0 = sy.floor() as usize;
    let x1 = (x0 + 1).min(width - 1);
    let y1 = (y0 + 1).min(height - 1);
    let fx = sx - x0 as f64;
    let fy = sy - y0 as f64;
    let top = sample(x0, y0) * (1.0 - fx) + sample(x1, y0) * fx;
    let bottom = sample(x0, y1) * (1.0 - fx) + sample(x1, y1) * fx;
    top * (1.0 - fy) + bottom * fy
}
