//! Affine depth normalization onto `[-1, 1]` from the 2nd/98th percentiles.

use super::tensor::Tensor3;
use crate::error::{Error, Result};
use crate::imaging::DepthMap;

pub const LOW_PERCENTILE: f64 = 2.0;
pub const HIGH_PERCENTILE: f64 = 98.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormParams {
    pub d2: f64,
    pub d98: f64,
}

impl NormParams {
    pub fn forward(&self, d: f64) -> f64 {
        (d - self.d2) / (self.d98 - self.d2) * 2.0 - 1.0
    }

    pub fn inverse(&self, v: f64) -> f64 {
        (v + 1.0) / 2.0 * (self.d98 - self.d2) + self.d2
    }
}

/// Linear-interpolation percentile (`p` in `[0, 100]`) of unsorted values.
///
/// Uses the rank `p / 100 · (n - 1)` between the two bracketing order
/// statistics.
pub fn percentile(values: &mut [f64], p: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let rank = p / 100.0 * (values.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let (_, &mut lo_v, upper) = values.select_nth_unstable_by(lo, f64::total_cmp);
    let hi_v = if hi == lo {
        lo_v
    } else {
        // smallest element of the upper partition is order statistic `lo + 1`
        upper.iter().copied().fold(f64::INFINITY, f64::min)
    };
    Some(lo_v + (hi_v - lo_v) * (rank - lo as f64))
}

/// Percentile parameters over the valid pixels of a depth map.
pub fn norm_params(d: &DepthMap) -> Result<NormParams> {
    let mut values: Vec<f64> = d
        .depth
        .iter()
        .zip(&d.valid)
        .filter(|(_, &v)| v)
        .map(|(&x, _)| x)
        .collect();
    if values.len() < 2 {
        return Err(Error::DegenerateDepth(format!(
            "{} valid depth values, need at least 2",
            values.len()
        )));
    }
    let d2 = percentile(&mut values, LOW_PERCENTILE).unwrap();
    let d98 = percentile(&mut values, HIGH_PERCENTILE).unwrap();
    if !(d98 > d2) {
        return Err(Error::DegenerateDepth(format!(
            "98th percentile {d98} does not exceed 2nd percentile {d2}"
        )));
    }
    Ok(NormParams { d2, d98 })
}

/// Normalizes valid pixels and replicates them into three channels. Invalid
/// pixels map to 0, the middle of the range.
pub fn normalize_depth(d: &DepthMap) -> Result<(Tensor3, NormParams)> {
    let params = norm_params(d)?;
    let plane: Vec<f64> = d
        .depth
        .iter()
        .zip(&d.valid)
        .map(|(&x, &v)| if v { params.forward(x) } else { 0.0 })
        .collect();
    Ok((Tensor3::replicate3(&plane, d.height, d.width), params))
}

/// Averages channels, then inverts the affine map. Every pixel comes back valid.
pub fn denormalize_depth(d_norm: &Tensor3, params: NormParams) -> DepthMap {
    let depth: Vec<f64> = d_norm.channel_mean().into_iter().map(|v| params.inverse(v)).collect();
    DepthMap {
        width: d_norm.width,
        height: d_norm.height,
        valid: vec![true; depth.len()],
        depth,
    }
}
