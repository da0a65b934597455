//! Depth completion entry point: resize, normalize, sample, restore, composite.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::codec::LatentCodec;
use super::ddim::ddim_sample;
use super::denoiser::Denoiser;
use super::harmonic::{check_sizes, harmonic_complete};
use super::latent::downsample_mask;
use super::normalize::{denormalize_depth, normalize_depth};
use super::resize::{fit_longest_side, resize_depth};
use super::schedule::DiffusionSchedule;
use super::tensor::Tensor3;
use crate::error::{Error, Result};
use crate::imaging::{ColorImage, DepthMap};
use crate::mask::MaskImage;

/// Longest side used for diffusion inference.
pub const MAX_INFERENCE_SIDE: usize = 768;

pub struct DiffusionBackend {
    pub codec: Box<dyn LatentCodec + Send>,
    pub denoiser: Box<dyn Denoiser + Send>,
    pub schedule: DiffusionSchedule,
    pub steps: usize,
    pub seed: u64,
}

pub enum CompletionBackend {
    Harmonic,
    Diffusion(DiffusionBackend),
}

impl std::fmt::Debug for CompletionBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Harmonic => f.write_str("Harmonic"),
            Self::Diffusion(b) => f
                .debug_struct("Diffusion")
                .field("steps", &b.steps)
                .field("seed", &b.seed)
                .finish_non_exhaustive(),
        }
    }
}

/// Fills the masked region of `d`, guided by the inpainted image.
///
/// Unmasked pixels are returned bit-for-bit; masked pixels come back valid.
pub fn complete_depth(
    d: &DepthMap,
    image: &ColorImage,
    mask: &MaskImage,
    backend: &mut CompletionBackend,
) -> Result<DepthMap> {
    check_sizes(d, mask)?;
    if !image.same_size(d.width, d.height) {
        return Err(Error::InvalidArgument(format!(
            "image is {}x{}, depth is {}x{}",
            image.width, image.height, d.width, d.height
        )));
    }
    if mask.is_empty() {
        return Ok(d.clone());
    }
    let known = known_depth(d, mask);
    if known.valid_count() == 0 {
        return Err(Error::DegenerateDepth("mask covers every valid depth pixel".into()));
    }
    let filled = match backend {
        CompletionBackend::Harmonic => harmonic_complete(d, mask)?,
        CompletionBackend::Diffusion(b) => diffusion_fill(&known, image, mask, b)?,
    };
    Ok(composite(d, &filled, mask))
}

/// Depth with masked pixels marked invalid.
fn known_depth(d: &DepthMap, mask: &MaskImage) -> DepthMap {
    let mut k = d.clone();
    for (i, &m) in mask.bits.iter().enumerate() {
        if m {
            k.valid[i] = false;
            k.depth[i] = 0.0;
        }
    }
    k
}

fn composite(d: &DepthMap, filled: &DepthMap, mask: &MaskImage) -> DepthMap {
    let mut out = d.clone();
    for (i, &m) in mask.bits.iter().enumerate() {
        if m {
            out.depth[i] = filled.depth[i];
            out.valid[i] = true;
        }
    }
    out
}

fn diffusion_fill(
    known: &DepthMap,
    image: &ColorImage,
    mask: &MaskImage,
    b: &mut DiffusionBackend,
) -> Result<DepthMap> {
    let factor = b.codec.downsample_factor();
    let (w, h) = fit_longest_side(known.width, known.height, MAX_INFERENCE_SIDE, factor);
    let depth_r = resize_depth(known, w, h);
    let image_r = if (w, h) == (image.width, image.height) {
        image.clone()
    } else {
        image.resize_bilinear(w, h)
    };
    let mask_r = if (w, h) == (mask.width, mask.height) {
        mask.clone()
    } else {
        mask.resize_nearest(w, h)
    };

    let (d_norm, params) = normalize_depth(&depth_r)?;
    let z_d = b.codec.encode(&d_norm)?;
    let z_img = b.codec.encode(&Tensor3::from_image(&image_r))?;
    let m_small = downsample_mask(&mask_r, factor)?;
    z_d.ensure_shape(z_img.shape(), "depth latent")?;
    let mut z_d_masked = z_d;
    let n = m_small.len();
    for (i, v) in z_d_masked.data.iter_mut().enumerate() {
        *v *= m_small[i % n];
    }

    let mut rng = ChaCha8Rng::seed_from_u64(b.seed);
    let z0 = ddim_sample(
        b.denoiser.as_mut(),
        &z_img,
        &z_d_masked,
        &m_small,
        &b.schedule,
        b.steps,
        &mut rng,
    )?;
    let decoded = b.codec.decode(&z0)?;
    decoded.ensure_shape([3, h, w], "decoded depth")?;
    let filled = denormalize_depth(&decoded, params);
    Ok(resize_depth(&filled, known.width, known.height))
}
