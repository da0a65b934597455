//! Resizing helpers for the inference resolution limit.

use crate::imaging::{bilinear, source_coord, DepthMap};

/// Output size with the longest side at most `max_side` and both sides
/// multiples of `factor`. Aspect ratio is kept up to that rounding.
pub fn fit_longest_side(width: usize, height: usize, max_side: usize, factor: usize) -> (usize, usize) {
    let factor = factor.max(1);
    let longest = width.max(height) as f64;
    let scale = (max_side as f64 / longest).min(1.0);
    let snap = |v: usize| {
        let scaled = (v as f64 * scale).round() as usize;
        (scaled / factor).max(1) * factor
    };
    (snap(width), snap(height))
}

/// Bilinear resize that only blends valid samples. A destination pixel is
/// valid when at least one of its source taps is.
pub fn resize_depth(d: &DepthMap, width: usize, height: usize) -> DepthMap {
    if (width, height) == (d.width, d.height) {
        return d.clone();
    }
    let mut out = DepthMap::invalid(width, height);
    let weight = |xx: usize, yy: usize| d.valid[yy * d.width + xx] as u8 as f64;
    let value = |xx: usize, yy: usize| {
        let i = yy * d.width + xx;
        if d.valid[i] {
            d.depth[i]
        } else {
            0.0
        }
    };
    for y in 0..height {
        for x in 0..width {
            let (sx, sy) = source_coord(x, y, (d.width, d.height), (width, height));
            let w = bilinear(sx, sy, d.width, d.height, weight);
            if w > 1e-12 {
                let i = y * width + x;
                out.depth[i] = bilinear(sx, sy, d.width, d.height, value) / w;
                out.valid[i] = true;
            }
        }
    }
    out
}
