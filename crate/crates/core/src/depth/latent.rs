use super::codec::{LatentCodec, LATENT_CHANNELS};
use super::schedule::DiffusionSchedule;
use super::tensor::Tensor3;
use crate::error::{Error, Result};
use crate::mask::MaskImage;

/// Channels the denoiser sees beyond the noisy depth latent:
/// masked depth (4), image (4) and mask (1).
pub const CONDITIONING_CHANNELS: usize = 2 * LATENT_CHANNELS + 1;
pub const STACK_CHANNELS: usize = LATENT_CHANNELS + CONDITIONING_CHANNELS;

/// Denoiser input: noisy depth latent plus conditioning, 13 channels in total.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentStack {
    pub z_t_d: Tensor3,
    pub z_d_masked: Tensor3,
    pub z_img: Tensor3,
    /// Downsampled mask, `height * width` values in `[0, 1]`.
    pub m_small: Vec<f64>,
}

impl LatentStack {
    pub fn height(&self) -> usize {
        self.z_t_d.height
    }

    pub fn width(&self) -> usize {
        self.z_t_d.width
    }

    /// Concatenation along channels: `[z_t_d, z_d_masked, z_img, m_small]`.
    pub fn concat(&self) -> Tensor3 {
        let mut data = Vec::with_capacity(STACK_CHANNELS * self.m_small.len());
        data.extend_from_slice(&self.z_t_d.data);
        data.extend_from_slice(&self.z_d_masked.data);
        data.extend_from_slice(&self.z_img.data);
        data.extend_from_slice(&self.m_small);
        Tensor3 {
            channels: STACK_CHANNELS,
            height: self.height(),
            width: self.width(),
            data,
        }
    }

    /// Inverse of [`LatentStack::concat`].
    pub fn split(t: &Tensor3) -> Result<Self> {
        if t.channels != STACK_CHANNELS {
            return Err(Error::InvalidArgument(format!(
                "stack needs {STACK_CHANNELS} channels, got {}",
                t.channels
            )));
        }
        let n = t.height * t.width;
        let part = |c0: usize, c: usize| Tensor3 {
            channels: c,
            height: t.height,
            width: t.width,
            data: t.data[c0 * n..(c0 + c) * n].to_vec(),
        };
        Ok(Self {
            z_t_d: part(0, LATENT_CHANNELS),
            z_d_masked: part(LATENT_CHANNELS, LATENT_CHANNELS),
            z_img: part(2 * LATENT_CHANNELS, LATENT_CHANNELS),
            m_small: t.data[3 * LATENT_CHANNELS * n..].to_vec(),
        })
    }

    pub(crate) fn with_noisy(&self, z_t_d: Tensor3) -> Self {
        Self {
            z_t_d,
            z_d_masked: self.z_d_masked.clone(),
            z_img: self.z_img.clone(),
            m_small: self.m_small.clone(),
        }
    }
}

/// Mask at latent resolution, by area averaging.
pub fn downsample_mask(mask: &MaskImage, factor: usize) -> Result<Vec<f64>> {
    if factor == 0 || mask.width % factor != 0 || mask.height % factor != 0 {
        return Err(Error::InvalidArgument(format!(
            "mask {}x{} is not divisible by factor {factor}",
            mask.width, mask.height
        )));
    }
    Ok(mask.downsample_area(factor))
}

/// Builds the conditioned stack for timestep `t`:
/// `z_t_d = √ᾱ_t z + √(1-ᾱ_t) ε`, `z_d_masked = z ⊙ m'`.
pub fn assemble_latent(
    z_d_clean: &Tensor3,
    z_img: &Tensor3,
    mask: &MaskImage,
    codec: &dyn LatentCodec,
    schedule: &DiffusionSchedule,
    t: usize,
    noise: &Tensor3,
) -> Result<LatentStack> {
    let factor = codec.downsample_factor();
    let shape = [LATENT_CHANNELS, mask.height / factor.max(1), mask.width / factor.max(1)];
    z_d_clean.ensure_shape(shape, "depth latent")?;
    z_img.ensure_shape(shape, "image latent")?;
    noise.ensure_shape(shape, "noise")?;
    if t >= schedule.steps() {
        return Err(Error::InvalidArgument(format!(
            "timestep {t} outside schedule of {} steps",
            schedule.steps()
        )));
    }
    let m_small = downsample_mask(mask, factor)?;
    Ok(masked_stack(z_d_clean, z_img, m_small, schedule, t, noise))
}

pub(crate) fn masked_stack(
    z_d_clean: &Tensor3,
    z_img: &Tensor3,
    m_small: Vec<f64>,
    schedule: &DiffusionSchedule,
    t: usize,
    noise: &Tensor3,
) -> LatentStack {
    let (a, s) = (schedule.signal(t), schedule.noise(t));
    let mut z_t_d = z_d_clean.clone();
    for (v, e) in z_t_d.data.iter_mut().zip(&noise.data) {
        *v = a * *v + s * e;
    }
    let mut z_d_masked = z_d_clean.clone();
    let n = m_small.len();
    for (i, v) in z_d_masked.data.iter_mut().enumerate() {
        *v *= m_small[i % n];
    }
    LatentStack {
        z_t_d,
        z_d_masked,
        z_img: z_img.clone(),
        m_small,
    }
}
