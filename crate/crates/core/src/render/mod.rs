//! Forward rendering of color, depth and opacity, D-SSIM, and analytic
//! gradients of the photometric loss.

mod grad;
mod project;
mod raster;
pub mod sh;
pub mod ssim;

pub use grad::{
    loss, loss_and_gradients, loss_and_gradients_with, photometric_loss, GaussianGrad,
    LossBreakdown, SceneGradients,
};
pub use project::{project_gaussian, raw_cov2d, Splat2D, ALPHA_MIN, COV2D_FLOOR};
pub use raster::{
    project_scene, render, render_with, RenderOptions, RenderOutput, ALPHA_MAX, TILE_SIZE,
    TRANSMITTANCE_MIN, VALID_ALPHA,
};
pub use ssim::{dssim, ssim};
