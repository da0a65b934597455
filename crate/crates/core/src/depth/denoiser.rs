use super::latent::LatentStack;
use super::tensor::Tensor3;
use crate::error::Result;

/// Noise predictor `ε_θ(z_t, t)` over the 13-channel stack.
pub trait Denoiser {
    /// Returns a tensor shaped like `stack.z_t_d`.
    fn predict_noise(&mut self, stack: &LatentStack, t: usize) -> Result<Tensor3>;
}

/// Predicts zero noise everywhere.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroDenoiser;

impl Denoiser for ZeroDenoiser {
    fn predict_noise(&mut self, stack: &LatentStack, _t: usize) -> Result<Tensor3> {
        let z = &stack.z_t_d;
        Ok(Tensor3::zeros(z.channels, z.height, z.width))
    }
}

/// Adapts a closure into a [`Denoiser`].
pub struct FnDenoiser<F>(pub F);

impl<F> Denoiser for FnDenoiser<F>
where
    F: FnMut(&LatentStack, usize) -> Result<Tensor3>,
{
    fn predict_noise(&mut self, stack: &LatentStack, t: usize) -> Result<Tensor3> {
        (self.0)(stack, t)
    }
}

/// Denoiser that knows the clean latent and inverts the forward noising
/// exactly: `ε̂ = (z_t - √ᾱ_t x₀) / √(1 - ᾱ_t)`.
#[derive(Debug, Clone)]
pub struct TargetDenoiser {
    pub target: Tensor3,
    pub alpha_bar: Vec<f64>,
}

impl Denoiser for TargetDenoiser {
    fn predict_noise(&mut self, stack: &LatentStack, t: usize) -> Result<Tensor3> {
        stack.z_t_d.ensure_shape(self.target.shape(), "noisy latent")?;
        let ab = self.alpha_bar[t];
        let (a, s) = (ab.sqrt(), (1.0 - ab).sqrt());
        let mut out = stack.z_t_d.clone();
        for (v, x0) in out.data.iter_mut().zip(&self.target.data) {
            *v = (*v - a * x0) / s;
        }
        Ok(out)
    }
}
