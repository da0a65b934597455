//! Masked image-quality metrics.

use crate::error::{Error, Result};
use crate::imaging::ColorImage;
use crate::mask::MaskImage;
use crate::render::ssim::ssim_map;

/// Reported in place of an infinite PSNR.
pub const PSNR_CAP: f64 = 99.0;

fn check(a: &ColorImage, b: &ColorImage, mask: &MaskImage) -> Result<()> {
    if !b.same_size(a.width, a.height) || !mask.same_size(a.width, a.height) {
        return Err(Error::InvalidArgument("images and mask must share dimensions".into()));
    }
    if mask.is_empty() {
        return Err(Error::InvalidArgument("metric mask is empty".into()));
    }
    Ok(())
}

/// Mean squared error over masked pixels and all channels.
pub fn masked_mse(a: &ColorImage, b: &ColorImage, mask: &MaskImage) -> Result<f64> {
    check(a, b, mask)?;
    let mut sum = 0.0;
    for (i, _) in mask.bits.iter().enumerate().filter(|(_, &m)| m) {
        for c in 0..3 {
            let d = a.data[i * 3 + c] - b.data[i * 3 + c];
            sum += d * d;
        }
    }
    Ok(sum / (mask.count() * 3) as f64)
}

/// PSNR for a peak value of 1, capped at [`PSNR_CAP`].
pub fn masked_psnr(a: &ColorImage, b: &ColorImage, mask: &MaskImage) -> Result<f64> {
    let mse = masked_mse(a, b, mask)?;
    Ok(psnr_from_mse(mse))
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse <= 0.0 {
        PSNR_CAP
    } else {
        (-10.0 * mse.log10()).min(PSNR_CAP)
    }
}

/// Mean of the SSIM map over masked pixels and all channels.
pub fn masked_ssim(a: &ColorImage, b: &ColorImage, mask: &MaskImage) -> Result<f64> {
    check(a, b, mask)?;
    let maps = ssim_map(a, b)?;
    let sum: f64 = maps
        .iter()
        .map(|m| m.iter().zip(&mask.bits).filter(|(_, &k)| k).map(|(v, _)| v).sum::<f64>())
        .sum();
    Ok(sum / (mask.count() * 3) as f64)
}
