use crate::error::{Error, Result};
use crate::imaging::ColorImage;

/// Channel-major `C × H × W` array of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width],
        }
    }

    pub fn from_vec(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != channels * height * width {
            return Err(Error::InvalidArgument(format!(
                "{} values do not fill a {channels}x{height}x{width} tensor",
                data.len()
            )));
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn shape(&self) -> [usize; 3] {
        [self.channels, self.height, self.width]
    }

    pub fn plane(&self, c: usize) -> &[f64] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn plane_mut(&mut self, c: usize) -> &mut [f64] {
        let n = self.height * self.width;
        &mut self.data[c * n..(c + 1) * n]
    }

    #[inline]
    pub fn at(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[(c * self.height + y) * self.width + x]
    }

    /// Color image mapped from `[0, 1]` to the codec range `[-1, 1]`.
    pub fn from_image(img: &ColorImage) -> Self {
        let mut t = Self::zeros(3, img.height, img.width);
        let n = img.width * img.height;
        for i in 0..n {
            for c in 0..3 {
                t.data[c * n + i] = img.data[i * 3 + c] * 2.0 - 1.0;
            }
        }
        t
    }

    /// Single plane replicated into three channels.
    pub fn replicate3(plane: &[f64], height: usize, width: usize) -> Self {
        let mut data = Vec::with_capacity(plane.len() * 3);
        for _ in 0..3 {
            data.extend_from_slice(plane);
        }
        Self {
            channels: 3,
            height,
            width,
            data,
        }
    }

    /// Per-pixel mean over channels.
    pub fn channel_mean(&self) -> Vec<f64> {
        let n = self.height * self.width;
        let mut out = vec![0.0; n];
        for c in 0..self.channels {
            for (o, v) in out.iter_mut().zip(self.plane(c)) {
                *o += v;
            }
        }
        let k = self.channels as f64;
        out.iter_mut().for_each(|v| *v /= k);
        out
    }

    pub fn ensure_shape(&self, shape: [usize; 3], what: &str) -> Result<()> {
        if self.shape() != shape {
            return Err(Error::InvalidArgument(format!(
                "{what} has shape {:?}, expected {shape:?}",
                self.shape()
            )));
        }
        Ok(())
    }
}
