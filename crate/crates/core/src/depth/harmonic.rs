//! Laplace fill of masked depth, the deterministic completion baseline.
//!
//! Known pixels (valid and unmasked) are Dirichlet boundary values. Image
//! borders and unmasked invalid pixels are treated as reflecting (they are
//! simply left out of the neighbor average). Solved by successive
//! over-relaxation.

use crate::error::{Error, Result};
use crate::imaging::DepthMap;
use crate::mask::MaskImage;

pub const MAX_SWEEPS: usize = 200_000;
/// Residual tolerance relative to `max(1, max |known depth|)`.
pub const RESIDUAL_TOLERANCE: f64 = 1e-6;

pub fn harmonic_complete(d: &DepthMap, mask: &MaskImage) -> Result<DepthMap> {
    check_sizes(d, mask)?;
    let (w, h) = (d.width, d.height);
    let known = |i: usize| d.valid[i] && !mask.bits[i];
    let known_vals: Vec<f64> = (0..w * h).filter(|&i| known(i)).map(|i| d.depth[i]).collect();
    if known_vals.is_empty() {
        return Err(Error::DegenerateDepth("no valid depth outside the mask".into()));
    }
    let mut out = d.clone();
    if mask.is_empty() {
        return Ok(out);
    }
    let mean = known_vals.iter().sum::<f64>() / known_vals.len() as f64;
    let scale = known_vals.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let tol = RESIDUAL_TOLERANCE * scale;

    // participating neighbors per unknown pixel
    let unknowns: Vec<usize> = (0..w * h).filter(|&i| mask.bits[i]).collect();
    let takes_part = |i: usize| mask.bits[i] || d.valid[i];
    let neighbors: Vec<Vec<usize>> = unknowns
        .iter()
        .map(|&i| {
            let (x, y) = (i % w, i / w);
            let mut n = Vec::with_capacity(4);
            if x > 0 {
                n.push(i - 1);
            }
            if x + 1 < w {
                n.push(i + 1);
            }
            if y > 0 {
                n.push(i - w);
            }
            if y + 1 < h {
                n.push(i + w);
            }
            n.retain(|&j| takes_part(j));
            n
        })
        .collect();

    let mut v: Vec<f64> = (0..w * h).map(|i| if known(i) { d.depth[i] } else { mean }).collect();
    let side = w.max(h) as f64;
    let omega = 2.0 / (1.0 + (std::f64::consts::PI / (side + 1.0)).sin());
    for _ in 0..MAX_SWEEPS {
        for (k, &i) in unknowns.iter().enumerate() {
            let nb = &neighbors[k];
            if nb.is_empty() {
                continue;
            }
            let avg = nb.iter().map(|&j| v[j]).sum::<f64>() / nb.len() as f64;
            v[i] += omega * (avg - v[i]);
        }
        if max_residual(&v, &unknowns, &neighbors) < tol {
            break;
        }
    }
    for &i in &unknowns {
        out.depth[i] = v[i];
        out.valid[i] = true;
    }
    Ok(out)
}

fn max_residual(v: &[f64], unknowns: &[usize], neighbors: &[Vec<usize>]) -> f64 {
    unknowns
        .iter()
        .zip(neighbors)
        .filter(|(_, nb)| !nb.is_empty())
        .map(|(&i, nb)| (nb.iter().map(|&j| v[j]).sum::<f64>() / nb.len() as f64 - v[i]).abs())
        .fold(0.0, f64::max)
}

pub(crate) fn check_sizes(d: &DepthMap, mask: &MaskImage) -> Result<()> {
    if !mask.same_size(d.width, d.height) {
        return Err(Error::InvalidArgument(format!(
            "mask is {}x{}, depth is {}x{}",
            mask.width, mask.height, d.width, d.height
        )));
    }
    Ok(())
}
