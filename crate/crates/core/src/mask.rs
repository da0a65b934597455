//! Binary masks. `true` marks a pixel that belongs to the region to inpaint.

use std::path::Path;

use crate::error::Result;
use crate::imaging::{encode_png, source_coord};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MaskImage {
    pub width: usize,
    pub height: usize,
    pub bits: Vec<bool>,
}

impl MaskImage {
    pub fn new(width: usize, height: usize) -> Self {
        Self::filled(width, height, false)
    }

    pub fn filled(width: usize, height: usize, value: bool) -> Self {
        Self {
            width,
            height,
            bits: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            bits,
        }
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn same_size(&self, width: usize, height: usize) -> bool {
        self.width == width && self.height == height
    }

    pub fn and(&self, other: &MaskImage) -> MaskImage {
        self.zip_with(other, |a, b| a && b)
    }

    pub fn or(&self, other: &MaskImage) -> MaskImage {
        self.zip_with(other, |a, b| a || b)
    }

    fn zip_with(&self, other: &MaskImage, f: impl Fn(bool, bool) -> bool) -> MaskImage {
        assert!(other.same_size(self.width, self.height), "mask size mismatch");
        MaskImage {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().zip(&other.bits).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    /// Nonzero pixels of an 8-bit grayscale image are masked.
    pub fn from_luma8(img: &image::GrayImage) -> Self {
        Self {
            width: img.width() as usize,
            height: img.height() as usize,
            bits: img.as_raw().iter().map(|&b| b != 0).collect(),
        }
    }

    pub fn to_luma8(&self) -> image::GrayImage {
        let bytes = self.bits.iter().map(|&b| if b { 255 } else { 0 }).collect();
        image::GrayImage::from_raw(self.width as u32, self.height as u32, bytes)
            .expect("buffer matches dimensions")
    }

    pub fn load_png(path: &Path) -> Result<Self> {
        Ok(Self::from_luma8(&image::open(path)?.to_luma8()))
    }

    pub fn decode_png(bytes: &[u8]) -> Result<Self> {
        Ok(Self::from_luma8(&image::load_from_memory(bytes)?.to_luma8()))
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        self.to_luma8().save(path)?;
        Ok(())
    }

    pub fn encode_png(&self) -> Vec<u8> {
        encode_png(&image::DynamicImage::ImageLuma8(self.to_luma8()))
    }

    /// Area-average downsample by an integer factor into soft coverage in `[0, 1]`.
    ///
    /// Dimensions must be divisible by `factor`.
    pub fn downsample_area(&self, factor: usize) -> Vec<f64> {
        let (w, h) = (self.width / factor, self.height / factor);
        let norm = 1.0 / (factor * factor) as f64;
        let mut out = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                let mut n = 0usize;
                for dy in 0..factor {
                    for dx in 0..factor {
                        n += self.get(x * factor + dx, y * factor + dy) as usize;
                    }
                }
                out[y * w + x] = n as f64 * norm;
            }
        }
        out
    }

    pub fn resize_nearest(&self, width: usize, height: usize) -> MaskImage {
        MaskImage::from_fn(width, height, |x, y| {
            let (sx, sy) = source_coord(x, y, (self.width, self.height), (width, height));
            let sx = (sx.round().max(0.0) as usize).min(self.width - 1);
            let sy = (sy.round().max(0.0) as usize).min(self.height - 1);
            self.get(sx, sy)
        })
    }
}

/// Square (Chebyshev) dilation: a pixel becomes true when any true pixel lies
/// within `radius` along both axes. Runs as two separable 1-D passes.
pub fn dilate_mask(mask: &MaskImage, radius: usize) -> MaskImage {
    if radius == 0 {
        return mask.clone();
    }
    let (w, h) = (mask.width, mask.height);
    let mut horizontal = vec![false; w * h];
    for y in 0..h {
        let row = &mask.bits[y * w..(y + 1) * w];
        dilate_line(row, radius, &mut horizontal[y * w..(y + 1) * w]);
    }
    let mut out = MaskImage::new(w, h);
    let mut column = vec![false; h];
    let mut dilated = vec![false; h];
    for x in 0..w {
        for y in 0..h {
            column[y] = horizontal[y * w + x];
        }
        dilate_line(&column, radius, &mut dilated);
        for y in 0..h {
            out.bits[y * w + x] = dilated[y];
        }
    }
    out
}

// Sliding count of true samples in the window [i - r, i + r].
fn dilate_line(line: &[bool], radius: usize, out: &mut [bool]) {
    let n = line.len();
    let mut count = line[..radius.min(n)].iter().filter(|&&b| b).count();
    for i in 0..n {
        if i + radius < n && line[i + radius] {
            count += 1;
        }
        if i > radius && line[i - radius - 1] {
            count -= 1;
        }
        out[i] = count > 0;
    }
}
