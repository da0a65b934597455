//! Latent codec interface and an exactly invertible test codec.

use super::tensor::Tensor3;
use crate::error::{Error, Result};

pub const LATENT_CHANNELS: usize = 4;

/// Maps 3-channel images to 4-channel latents at reduced resolution.
///
/// Methods take `&mut self` because remote implementations hold a session.
pub trait LatentCodec {
    fn downsample_factor(&self) -> usize;
    fn encode(&mut self, image: &Tensor3) -> Result<Tensor3>;
    fn decode(&mut self, latent: &Tensor3) -> Result<Tensor3>;
}

/// Orthonormal 2×2 Haar transform of the channel mean.
///
/// Each 2×2 block of the per-pixel channel average becomes one latent pixel
/// with four coefficients (average, horizontal, vertical, diagonal detail).
/// Decoding replicates the reconstructed plane into three channels, so
/// `decode(encode(x)) == x` exactly whenever the channels of `x` are equal,
/// which is the case for replicated depth.
#[derive(Debug, Clone, Copy, Default)]
pub struct HaarCodec;

const HAAR: [[f64; 4]; 4] = [
    [0.5, 0.5, 0.5, 0.5],
    [0.5, -0.5, 0.5, -0.5],
    [0.5, 0.5, -0.5, -0.5],
    [0.5, -0.5, -0.5, 0.5],
];

impl LatentCodec for HaarCodec {
    fn downsample_factor(&self) -> usize {
        2
    }

    fn encode(&mut self, image: &Tensor3) -> Result<Tensor3> {
        if image.channels != 3 || image.height % 2 != 0 || image.width % 2 != 0 {
            return Err(Error::InvalidArgument(format!(
                "haar codec needs a 3-channel image with even sides, got {:?}",
                image.shape()
            )));
        }
        let mean = image.channel_mean();
        let (h, w) = (image.height / 2, image.width / 2);
        let mut out = Tensor3::zeros(LATENT_CHANNELS, h, w);
        for y in 0..h {
            for x in 0..w {
                let v = [
                    mean[(2 * y) * image.width + 2 * x],
                    mean[(2 * y) * image.width + 2 * x + 1],
                    mean[(2 * y + 1) * image.width + 2 * x],
                    mean[(2 * y + 1) * image.width + 2 * x + 1],
                ];
                for (k, row) in HAAR.iter().enumerate() {
                    out.data[(k * h + y) * w + x] = (0..4).map(|j| row[j] * v[j]).sum();
                }
            }
        }
        Ok(out)
    }

    fn decode(&mut self, latent: &Tensor3) -> Result<Tensor3> {
        if latent.channels != LATENT_CHANNELS {
            return Err(Error::InvalidArgument(format!(
                "haar codec decodes 4-channel latents, got {:?}",
                latent.shape()
            )));
        }
        let (h, w) = (latent.height, latent.width);
        let (oh, ow) = (h * 2, w * 2);
        let mut plane = vec![0.0; oh * ow];
        for y in 0..h {
            for x in 0..w {
                let l: Vec<f64> = (0..4).map(|k| latent.at(k, y, x)).collect();
                // the transform is symmetric and orthonormal, so it is its own inverse
                let v: Vec<f64> = HAAR.iter().map(|row| (0..4).map(|j| row[j] * l[j]).sum()).collect();
                plane[(2 * y) * ow + 2 * x] = v[0];
                plane[(2 * y) * ow + 2 * x + 1] = v[1];
                plane[(2 * y + 1) * ow + 2 * x] = v[2];
                plane[(2 * y + 1) * ow + 2 * x + 1] = v[3];
            }
        }
        Ok(Tensor3::replicate3(&plane, oh, ow))
    }
}
