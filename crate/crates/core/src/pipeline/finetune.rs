//! Adam fine-tuning of Gaussian parameters against one reference view.

use crate::camera::CameraPose;
use crate::error::{Error, Result};
use crate::imaging::ColorImage;
use crate::render::{loss_and_gradients_with, GaussianGrad, RenderOptions};
use crate::scene::{Gaussian3D, GaussianScene};

use super::config::LearningRates;

pub const ADAM_BETAS: (f64, f64) = (0.9, 0.999);
pub const ADAM_EPS: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq)]
pub struct FinetuneOptions {
    pub iterations: usize,
    pub lambda: f64,
    pub learning_rates: LearningRates,
    /// Gaussians with index below this are held fixed.
    pub frozen_prefix: usize,
    pub render: RenderOptions,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FinetuneResult {
    pub scene: GaussianScene,
    /// Loss before each update, then the loss of the final state.
    pub losses: Vec<f64>,
}

fn flatten(g: &Gaussian3D, out: &mut Vec<f64>) {
    out.extend_from_slice(&g.position);
    out.extend_from_slice(&g.rotation);
    out.extend_from_slice(&g.log_scale);
    out.push(g.opacity_logit);
    out.extend(g.sh.iter().flatten());
}

fn flatten_grad(g: &GaussianGrad, out: &mut Vec<f64>) {
    out.extend_from_slice(&g.position);
    out.extend_from_slice(&g.rotation);
    out.extend_from_slice(&g.log_scale);
    out.push(g.opacity_logit);
    out.extend(g.sh.iter().flatten());
}

fn unflatten(v: &[f64], g: &mut Gaussian3D) {
    g.position.copy_from_slice(&v[0..3]);
    g.rotation.copy_from_slice(&v[3..7]);
    g.log_scale.copy_from_slice(&v[7..10]);
    g.opacity_logit = v[10];
    for (k, c) in g.sh.iter_mut().enumerate() {
        c.copy_from_slice(&v[11 + 3 * k..14 + 3 * k]);
    }
}

fn per_value_rates(sh_len: usize, lr: &LearningRates, extent: f64) -> Vec<f64> {
    let mut r = vec![lr.position * extent; 3];
    r.extend([lr.rotation; 4]);
    r.extend([lr.scale; 3]);
    r.push(lr.opacity);
    r.extend([lr.sh; 3]);
    r.extend(std::iter::repeat_n(lr.sh / 20.0, 3 * sh_len.saturating_sub(1)));
    r
}

fn position_decay(lr: &LearningRates, it: usize, iterations: usize) -> f64 {
    if iterations <= 1 {
        return 1.0;
    }
    lr.position_final_ratio.powf(it as f64 / (iterations - 1) as f64)
}

/// Runs `opts.iterations` Adam steps. The number of Gaussians never changes.
pub fn finetune(
    scene: &GaussianScene,
    target: &ColorImage,
    pose: &CameraPose,
    opts: &FinetuneOptions,
) -> Result<FinetuneResult> {
    let mut scene = scene.clone();
    let n = scene.len();
    let sh_len = crate::scene::sh_coeff_count(scene.sh_degree());
    let stride = 11 + 3 * sh_len;
    let extent = scene.bounds().diagonal().max(1e-6);
    let rates = per_value_rates(sh_len, &opts.learning_rates, extent);
    let mut params = Vec::with_capacity(n * stride);
    for g in scene.gaussians() {
        flatten(g, &mut params);
    }
    let mut m = vec![0.0; params.len()];
    let mut v = vec![0.0; params.len()];
    let (b1, b2) = ADAM_BETAS;
    let mut losses = Vec::with_capacity(opts.iterations + 1);
    let mut grad = Vec::with_capacity(params.len());
    for it in 0..opts.iterations {
        let (loss, grads) = loss_and_gradients_with(&scene, pose, target, opts.lambda, &opts.render)?;
        if !loss.total.is_finite() || !grads.gaussians.iter().all(GaussianGrad::is_finite) {
            return Err(Error::OptimizationDiverged { iteration: it });
        }
        losses.push(loss.total);
        grad.clear();
        for g in &grads.gaussians {
            flatten_grad(g, &mut grad);
        }
        let decay = position_decay(&opts.learning_rates, it, opts.iterations);
        let bc1 = 1.0 - b1.powi(it as i32 + 1);
        let bc2 = 1.0 - b2.powi(it as i32 + 1);
        for i in opts.frozen_prefix.min(n) * stride..params.len() {
            let gi = grad[i];
            m[i] = b1 * m[i] + (1.0 - b1) * gi;
            v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
            let k = i % stride;
            let lr = if k < 3 { rates[k] * decay } else { rates[k] };
            let step = lr * (m[i] / bc1) / ((v[i] / bc2).sqrt() + ADAM_EPS);
            params[i] -= step;
        }
        for (k, g) in scene.gaussians_mut().iter_mut().enumerate() {
            unflatten(&params[k * stride..(k + 1) * stride], g);
        }
    }
    let last = crate::render::loss(&scene, pose, target, opts.lambda, &opts.render)?;
    if !last.total.is_finite() {
        return Err(Error::OptimizationDiverged { iteration: opts.iterations });
    }
    losses.push(last.total);
    Ok(FinetuneResult { scene, losses })
}
