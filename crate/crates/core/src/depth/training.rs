//! Toy-scale training path: the denoising objective, synthetic training
//! masks, and a small trainable linear denoiser.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::codec::{LatentCodec, LATENT_CHANNELS};
use super::ddim::standard_normal;
use super::denoiser::Denoiser;
use super::latent::{assemble_latent, LatentStack, CONDITIONING_CHANNELS, STACK_CHANNELS};
use super::normalize::normalize_depth;
use super::resize::fit_longest_side;
use super::schedule::DiffusionSchedule;
use super::tensor::Tensor3;
use crate::error::{Error, Result};
use crate::imaging::{ColorImage, DepthMap};
use crate::mask::MaskImage;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    /// Probability that a training mask covers the whole image.
    pub full_mask_probability: f64,
    /// Longest image side after resizing, aspect ratio preserved.
    pub max_side: usize,
    /// Input channels added to the denoiser beyond the noisy latent.
    pub extra_input_channels: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            full_mask_probability: 0.3,
            max_side: 768,
            extra_input_channels: CONDITIONING_CHANNELS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainingMaskKind {
    Full,
    Square,
    Strokes,
    SquareAndStrokes,
}

pub fn generate_training_mask(rng: &mut impl Rng, width: usize, height: usize) -> MaskImage {
    generate_training_mask_with(rng, width, height, TrainingConfig::default().full_mask_probability).0
}

/// Draws a mask and reports which branch produced it: the full mask with
/// probability `full_probability`, otherwise a square, random strokes, or
/// their union with equal odds.
pub fn generate_training_mask_with(
    rng: &mut impl Rng,
    width: usize,
    height: usize,
    full_probability: f64,
) -> (MaskImage, TrainingMaskKind) {
    if rng.random_bool(full_probability) {
        return (MaskImage::filled(width, height, true), TrainingMaskKind::Full);
    }
    match rng.random_range(0..3) {
        0 => (square(rng, width, height), TrainingMaskKind::Square),
        1 => (strokes(rng, width, height), TrainingMaskKind::Strokes),
        _ => {
            let s = square(rng, width, height);
            (s.or(&strokes(rng, width, height)), TrainingMaskKind::SquareAndStrokes)
        }
    }
}

fn square(rng: &mut impl Rng, width: usize, height: usize) -> MaskImage {
    let min_side = width.min(height);
    let side = rng.random_range((min_side / 8).max(1)..=(min_side / 2).max(1));
    let x0 = rng.random_range(0..=width - side);
    let y0 = rng.random_range(0..=height - side);
    MaskImage::from_fn(width, height, |x, y| {
        (x0..x0 + side).contains(&x) && (y0..y0 + side).contains(&y)
    })
}

fn strokes(rng: &mut impl Rng, width: usize, height: usize) -> MaskImage {
    let mut mask = MaskImage::new(width, height);
    let n_strokes = rng.random_range(1..=4);
    let max_radius = (width.min(height) as f64 / 16.0).max(1.0);
    for _ in 0..n_strokes {
        let radius = rng.random_range(1.0..=max_radius);
        let mut p = (
            rng.random_range(0.0..width as f64),
            rng.random_range(0.0..height as f64),
        );
        for _ in 0..rng.random_range(2..=6) {
            let angle = rng.random_range(0.0..std::f64::consts::TAU);
            let len = rng.random_range(0.1..0.4) * width.max(height) as f64;
            let q = (
                (p.0 + len * angle.cos()).clamp(0.0, (width - 1) as f64),
                (p.1 + len * angle.sin()).clamp(0.0, (height - 1) as f64),
            );
            stamp_segment(&mut mask, p, q, radius);
            p = q;
        }
    }
    mask
}

fn stamp_segment(mask: &mut MaskImage, a: (f64, f64), b: (f64, f64), radius: f64) {
    let r = radius.ceil() as i64;
    let (x0, x1) = (a.0.min(b.0) as i64 - r, a.0.max(b.0) as i64 + r);
    let (y0, y1) = (a.1.min(b.1) as i64 - r, a.1.max(b.1) as i64 + r);
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    for y in y0.max(0)..=y1.min(mask.height as i64 - 1) {
        for x in x0.max(0)..=x1.min(mask.width as i64 - 1) {
            let (px, py) = (x as f64 - a.0, y as f64 - a.1);
            let s = if len2 > 0.0 { ((px * dx + py * dy) / len2).clamp(0.0, 1.0) } else { 0.0 };
            let (ex, ey) = (px - s * dx, py - s * dy);
            if ex * ex + ey * ey <= radius * radius {
                mask.set(x as usize, y as usize, true);
            }
        }
    }
}

/// One training example: conditioning image, ground-truth depth, mask.
#[derive(Debug, Clone)]
pub struct TrainingSample {
    pub image: ColorImage,
    pub depth: DepthMap,
    pub mask: MaskImage,
}

impl TrainingSample {
    /// Resizes so the longest side is at most `cfg.max_side` and both sides
    /// divide by `factor`.
    pub fn prepared(&self, cfg: &TrainingConfig, factor: usize) -> TrainingSample {
        let (w, h) = fit_longest_side(self.image.width, self.image.height, cfg.max_side, factor);
        if (w, h) == (self.image.width, self.image.height) {
            return self.clone();
        }
        TrainingSample {
            image: self.image.resize_bilinear(w, h),
            depth: super::resize::resize_depth(&self.depth, w, h),
            mask: self.mask.resize_nearest(w, h),
        }
    }
}

/// Encoded latents of one sample, reusable across noise draws.
pub struct EncodedSample {
    pub z_depth: Tensor3,
    pub z_image: Tensor3,
    pub mask: MaskImage,
}

pub fn encode_sample(sample: &TrainingSample, codec: &mut dyn LatentCodec) -> Result<EncodedSample> {
    let (d_norm, _) = normalize_depth(&sample.depth)?;
    Ok(EncodedSample {
        z_depth: codec.encode(&d_norm)?,
        z_image: codec.encode(&Tensor3::from_image(&sample.image))?,
        mask: sample.mask.clone(),
    })
}

/// Draws `t` and `ε`, builds the noisy stack, returns `(stack, ε, t)`.
pub fn draw_noisy_stack(
    enc: &EncodedSample,
    codec: &dyn LatentCodec,
    schedule: &DiffusionSchedule,
    rng: &mut impl Rng,
) -> Result<(LatentStack, Tensor3, usize)> {
    let t = rng.random_range(0..schedule.steps());
    let [c, h, w] = enc.z_depth.shape();
    let eps = standard_normal(rng, c, h, w);
    let stack = assemble_latent(&enc.z_depth, &enc.z_image, &enc.mask, codec, schedule, t, &eps)?;
    Ok((stack, eps, t))
}

/// Single-draw estimate of `E‖ε - ε_θ(z_t, t)‖²` (mean over elements).
pub fn diffusion_loss(
    denoiser: &mut dyn Denoiser,
    sample: &TrainingSample,
    codec: &mut dyn LatentCodec,
    schedule: &DiffusionSchedule,
    rng: &mut impl Rng,
) -> Result<f64> {
    let enc = encode_sample(sample, codec)?;
    let (stack, eps, t) = draw_noisy_stack(&enc, codec, schedule, rng)?;
    let pred = denoiser.predict_noise(&stack, t)?;
    pred.ensure_shape(eps.shape(), "denoiser output")?;
    Ok(mse(&eps, &pred))
}

fn mse(a: &Tensor3, b: &Tensor3) -> f64 {
    a.data.iter().zip(&b.data).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.data.len() as f64
}

/// Per-pixel linear map from the 13 stack channels, the noise level and a
/// bias to the 4 noise channels (a 1×1 convolution).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearDenoiser {
    /// `LATENT_CHANNELS` rows of `STACK_CHANNELS + 2` weights.
    pub weights: Vec<Vec<f64>>,
    pub alpha_bar: Vec<f64>,
}

const FEATURES: usize = STACK_CHANNELS + 2;

impl LinearDenoiser {
    pub fn new(schedule: &DiffusionSchedule) -> Self {
        Self {
            weights: vec![vec![0.0; FEATURES]; LATENT_CHANNELS],
            alpha_bar: schedule.alpha_bar().to_vec(),
        }
    }

    fn features(&self, stack: &Tensor3, t: usize, pixel: usize) -> [f64; FEATURES] {
        let n = stack.height * stack.width;
        let mut f = [0.0; FEATURES];
        for (c, v) in f.iter_mut().take(STACK_CHANNELS).enumerate() {
            *v = stack.data[c * n + pixel];
        }
        f[STACK_CHANNELS] = (1.0 - self.alpha_bar[t]).sqrt();
        f[STACK_CHANNELS + 1] = 1.0;
        f
    }

    /// One gradient step on the squared error; returns the loss before the step.
    pub fn train_step(&mut self, stack: &LatentStack, eps: &Tensor3, t: usize, lr: f64) -> f64 {
        let flat = stack.concat();
        let n = flat.height * flat.width;
        let total = (n * LATENT_CHANNELS) as f64;
        let mut grad = vec![vec![0.0; FEATURES]; LATENT_CHANNELS];
        let mut loss = 0.0;
        for p in 0..n {
            let f = self.features(&flat, t, p);
            for c in 0..LATENT_CHANNELS {
                let pred: f64 = self.weights[c].iter().zip(&f).map(|(w, x)| w * x).sum();
                let r = pred - eps.data[c * n + p];
                loss += r * r;
                for k in 0..FEATURES {
                    grad[c][k] += 2.0 * r * f[k] / total;
                }
            }
        }
        for c in 0..LATENT_CHANNELS {
            for k in 0..FEATURES {
                self.weights[c][k] -= lr * grad[c][k];
            }
        }
        loss / total
    }
}

impl Denoiser for LinearDenoiser {
    fn predict_noise(&mut self, stack: &LatentStack, t: usize) -> Result<Tensor3> {
        if t >= self.alpha_bar.len() {
            return Err(Error::InvalidArgument(format!("timestep {t} outside schedule")));
        }
        let flat = stack.concat();
        let n = flat.height * flat.width;
        let mut out = Tensor3::zeros(LATENT_CHANNELS, flat.height, flat.width);
        for p in 0..n {
            let f = self.features(&flat, t, p);
            for c in 0..LATENT_CHANNELS {
                out.data[c * n + p] = self.weights[c].iter().zip(&f).map(|(w, x)| w * x).sum();
            }
        }
        Ok(out)
    }
}

/// Fits a [`LinearDenoiser`] by SGD on fresh noise draws; returns the model
/// and the per-step loss curve.
pub fn train_linear_denoiser(
    samples: &[TrainingSample],
    codec: &mut dyn LatentCodec,
    schedule: &DiffusionSchedule,
    cfg: &TrainingConfig,
    steps: usize,
    lr: f64,
    rng: &mut impl Rng,
) -> Result<(LinearDenoiser, Vec<f64>)> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("no training samples".into()));
    }
    let factor = codec.downsample_factor();
    let encoded = samples
        .iter()
        .map(|s| encode_sample(&s.prepared(cfg, factor), codec))
        .collect::<Result<Vec<_>>>()?;
    let mut model = LinearDenoiser::new(schedule);
    let mut curve = Vec::with_capacity(steps);
    for _ in 0..steps {
        let enc = &encoded[rng.random_range(0..encoded.len())];
        let (stack, eps, t) = draw_noisy_stack(enc, codec, schedule, rng)?;
        curve.push(model.train_step(&stack, &eps, t, lr));
    }
    Ok((model, curve))
}
