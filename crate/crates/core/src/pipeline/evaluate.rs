use serde::Serialize;

use crate::camera::CameraPose;
use crate::error::{Error, Result};
use crate::imaging::ColorImage;
use crate::mask::MaskImage;
use crate::metrics::{masked_psnr, masked_ssim};
use crate::render::render;
use crate::scene::GaussianScene;

#[derive(Debug, Clone)]
pub struct HeldOutView {
    pub pose: CameraPose,
    pub image: ColorImage,
    pub mask: MaskImage,
}

#[derive(Debug, Clone, Serialize)]
pub struct ViewMetrics {
    pub view: String,
    pub psnr: f64,
    pub ssim: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalTable {
    pub views: Vec<ViewMetrics>,
    pub mean_psnr: f64,
    pub mean_ssim: f64,
}

/// Masked PSNR/SSIM of the scene's renders against held-out images.
pub fn evaluate_views(scene: &GaussianScene, held_out: &[HeldOutView]) -> Result<EvalTable> {
    if held_out.is_empty() {
        return Err(Error::InvalidArgument("no held-out views".into()));
    }
    let rows = crate::par::map_indexed(held_out.len(), |i| -> Result<ViewMetrics> {
        let v = &held_out[i];
        let r = render(scene, &v.pose).color;
        Ok(ViewMetrics {
            view: v.pose.name.clone(),
            psnr: masked_psnr(&r, &v.image, &v.mask)?,
            ssim: masked_ssim(&r, &v.image, &v.mask)?,
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let n = rows.len() as f64;
    Ok(EvalTable {
        mean_psnr: rows.iter().map(|r| r.psnr).sum::<f64>() / n,
        mean_ssim: rows.iter().map(|r| r.ssim).sum::<f64>() / n,
        views: rows,
    })
}
