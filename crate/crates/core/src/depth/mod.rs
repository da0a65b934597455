//! Affine-invariant depth completion.
//!
//! Depth is normalized by its 2nd/98th percentiles, encoded to a latent
//! together with the inpainted image, and completed by a conditioned DDIM
//! sampler. Codec and denoiser are pluggable; the crate ships an exactly
//! invertible Haar codec, toy denoisers, a subprocess backend, and a
//! harmonic (Laplace) fill that needs no model at all.

pub mod backend;
pub mod codec;
pub mod complete;
pub mod ddim;
pub mod denoiser;
pub mod harmonic;
pub mod latent;
pub mod normalize;
pub mod resize;
pub mod schedule;
pub mod tensor;
pub mod training;

pub use backend::{serve_backend, ProcessBackend, Role};
pub use codec::{HaarCodec, LatentCodec, LATENT_CHANNELS};
pub use complete::{complete_depth, CompletionBackend, DiffusionBackend, MAX_INFERENCE_SIDE};
pub use ddim::{ddim_from, ddim_sample, respaced_timesteps};
pub use denoiser::{Denoiser, FnDenoiser, TargetDenoiser, ZeroDenoiser};
pub use harmonic::harmonic_complete;
pub use latent::{assemble_latent, downsample_mask, LatentStack, CONDITIONING_CHANNELS, STACK_CHANNELS};
pub use normalize::{denormalize_depth, norm_params, normalize_depth, percentile, NormParams};
pub use schedule::{make_schedule, DiffusionSchedule};
pub use tensor::Tensor3;
pub use training::{
    diffusion_loss, generate_training_mask, generate_training_mask_with, LinearDenoiser, TrainingConfig,
    TrainingMaskKind, TrainingSample,
};
