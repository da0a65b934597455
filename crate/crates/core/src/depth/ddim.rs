//! Deterministic (η = 0) DDIM sampling over a re-spaced timestep grid.

use rand::Rng;
use rand_distr::StandardNormal;

use super::denoiser::Denoiser;
use super::latent::LatentStack;
use super::schedule::DiffusionSchedule;
use super::tensor::Tensor3;
use crate::error::{Error, Result};

/// Evenly spaced zero-based timesteps, descending, always containing `T - 1`.
/// With two or more steps the grid also ends at 0.
pub fn respaced_timesteps(total: usize, num_steps: usize) -> Result<Vec<usize>> {
    if num_steps < 1 {
        return Err(Error::InvalidArgument("ddim needs at least one step".into()));
    }
    if num_steps > total {
        return Err(Error::InvalidArgument(format!(
            "{num_steps} sampling steps exceed the {total}-step schedule"
        )));
    }
    if num_steps == 1 {
        return Ok(vec![total - 1]);
    }
    Ok((0..num_steps)
        .rev()
        .map(|k| k * (total - 1) / (num_steps - 1))
        .collect())
}

pub fn standard_normal(rng: &mut impl Rng, channels: usize, height: usize, width: usize) -> Tensor3 {
    let mut t = Tensor3::zeros(channels, height, width);
    for v in &mut t.data {
        *v = rng.sample(StandardNormal);
    }
    t
}

/// Samples a clean depth latent from standard-normal noise, holding the
/// conditioning channels fixed.
pub fn ddim_sample(
    denoiser: &mut dyn Denoiser,
    z_img: &Tensor3,
    z_d_masked: &Tensor3,
    m_small: &[f64],
    schedule: &DiffusionSchedule,
    num_steps: usize,
    rng: &mut impl Rng,
) -> Result<Tensor3> {
    let [c, h, w] = z_d_masked.shape();
    let x_t = standard_normal(rng, c, h, w);
    ddim_from(denoiser, x_t, z_img, z_d_masked, m_small, schedule, num_steps)
}

/// DDIM trajectory from a given starting latent `x_T`.
pub fn ddim_from(
    denoiser: &mut dyn Denoiser,
    x_t: Tensor3,
    z_img: &Tensor3,
    z_d_masked: &Tensor3,
    m_small: &[f64],
    schedule: &DiffusionSchedule,
    num_steps: usize,
) -> Result<Tensor3> {
    let timesteps = respaced_timesteps(schedule.steps(), num_steps)?;
    z_img.ensure_shape(z_d_masked.shape(), "image latent")?;
    if m_small.len() != z_d_masked.height * z_d_masked.width {
        return Err(Error::InvalidArgument("mask does not match latent size".into()));
    }
    let mut stack = LatentStack {
        z_t_d: x_t,
        z_d_masked: z_d_masked.clone(),
        z_img: z_img.clone(),
        m_small: m_small.to_vec(),
    };
    for (i, &t) in timesteps.iter().enumerate() {
        let eps = denoiser.predict_noise(&stack, t)?;
        eps.ensure_shape(stack.z_t_d.shape(), "denoiser output")?;
        let ab = schedule.alpha_bar()[t];
        let ab_prev = timesteps.get(i + 1).map_or(1.0, |&p| schedule.alpha_bar()[p]);
        let (sa, sn) = (ab.sqrt(), (1.0 - ab).sqrt());
        let (sa_prev, sn_prev) = (ab_prev.sqrt(), (1.0 - ab_prev).sqrt());
        let mut next = stack.z_t_d.clone();
        for (x, e) in next.data.iter_mut().zip(&eps.data) {
            let x0 = (*x - sn * e) / sa;
            *x = sa_prev * x0 + sn_prev * e;
        }
        stack = stack.with_noisy(next);
    }
    Ok(stack.z_t_d)
}
