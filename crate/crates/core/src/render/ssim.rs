//! Windowed SSIM with an 11×11 Gaussian window (σ = 1.5), zero-padded at the
//! borders, averaged over all pixels and channels. Includes the analytic
//! gradient with respect to the first image.

use crate::error::{Error, Result};
use crate::imaging::ColorImage;

pub const WINDOW: usize = 11;
pub const SIGMA: f64 = 1.5;
pub const C1: f64 = 0.01 * 0.01;
pub const C2: f64 = 0.03 * 0.03;

/// Normalized 1-D Gaussian weights; the 2-D window is their outer product.
pub fn window_1d() -> [f64; WINDOW] {
    let mut w = [0.0; WINDOW];
    let half = (WINDOW / 2) as f64;
    for (i, v) in w.iter_mut().enumerate() {
        let d = i as f64 - half;
        *v = (-d * d / (2.0 * SIGMA * SIGMA)).exp();
    }
    let sum: f64 = w.iter().sum();
    w.map(|v| v / sum)
}

/// Separable "same" convolution of a plane with zero padding.
fn blur(plane: &[f64], width: usize, height: usize, w: &[f64; WINDOW]) -> Vec<f64> {
    let half = WINDOW / 2;
    let mut tmp = vec![0.0; plane.len()];
    for y in 0..height {
        let row = &plane[y * width..(y + 1) * width];
        for x in 0..width {
            let mut acc = 0.0;
            let lo = x.saturating_sub(half);
            let hi = (x + half).min(width - 1);
            for xx in lo..=hi {
                acc += w[xx + half - x] * row[xx];
            }
            tmp[y * width + x] = acc;
        }
    }
    let mut out = vec![0.0; plane.len()];
    for y in 0..height {
        let lo = y.saturating_sub(half);
        let hi = (y + half).min(height - 1);
        for x in 0..width {
            let mut acc = 0.0;
            for yy in lo..=hi {
                acc += w[yy + half - y] * tmp[yy * width + x];
            }
            out[y * width + x] = acc;
        }
    }
    out
}

fn channel(img: &ColorImage, c: usize) -> Vec<f64> {
    img.data.iter().skip(c).step_by(3).copied().collect()
}

struct Moments {
    mu_x: Vec<f64>,
    mu_y: Vec<f64>,
    sxx: Vec<f64>,
    syy: Vec<f64>,
    sxy: Vec<f64>,
}

fn moments(x: &[f64], y: &[f64], width: usize, height: usize, w: &[f64; WINDOW]) -> Moments {
    let mu_x = blur(x, width, height, w);
    let mu_y = blur(y, width, height, w);
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(y).map(|(a, b)| a * b).collect();
    Moments {
        mu_x,
        mu_y,
        sxx: blur(&xx, width, height, w),
        syy: blur(&yy, width, height, w),
        sxy: blur(&xy, width, height, w),
    }
}

fn check_dims(a: &ColorImage, b: &ColorImage) -> Result<()> {
    if a.width != b.width || a.height != b.height {
        return Err(Error::InvalidArgument(format!(
            "image sizes differ: {}x{} vs {}x{}",
            a.width, a.height, b.width, b.height
        )));
    }
    Ok(())
}

/// Per-pixel SSIM for each channel, `[channel][pixel]`.
pub fn ssim_map(a: &ColorImage, b: &ColorImage) -> Result<[Vec<f64>; 3]> {
    check_dims(a, b)?;
    let w = window_1d();
    Ok([0, 1, 2].map(|c| {
        let m = moments(&channel(a, c), &channel(b, c), a.width, a.height, &w);
        (0..m.mu_x.len())
            .map(|i| {
                let (mx, my) = (m.mu_x[i], m.mu_y[i]);
                let vx = m.sxx[i] - mx * mx;
                let vy = m.syy[i] - my * my;
                let cov = m.sxy[i] - mx * my;
                ((2.0 * mx * my + C1) * (2.0 * cov + C2))
                    / ((mx * mx + my * my + C1) * (vx + vy + C2))
            })
            .collect()
    }))
}

pub fn ssim(a: &ColorImage, b: &ColorImage) -> Result<f64> {
    let maps = ssim_map(a, b)?;
    let n = (a.width * a.height * 3) as f64;
    Ok(maps.iter().flatten().sum::<f64>() / n)
}

/// Structural dissimilarity `(1 - SSIM) / 2`.
pub fn dssim(a: &ColorImage, b: &ColorImage) -> Result<f64> {
    Ok((1.0 - ssim(a, b)?) / 2.0)
}

/// D-SSIM and its gradient with respect to every value of `a`.
pub fn dssim_with_grad(a: &ColorImage, b: &ColorImage) -> Result<(f64, Vec<f64>)> {
    check_dims(a, b)?;
    let (width, height) = (a.width, a.height);
    let n_px = width * height;
    let w = window_1d();
    // d(dssim)/d(ssim_p) for every pixel/channel
    let upstream = -0.5 / (n_px * 3) as f64;
    let mut total = 0.0;
    let mut grad = vec![0.0; n_px * 3];
    for c in 0..3 {
        let x = channel(a, c);
        let y = channel(b, c);
        let m = moments(&x, &y, width, height, &w);
        let mut g_mu = vec![0.0; n_px];
        let mut g_var = vec![0.0; n_px];
        let mut g_sxy = vec![0.0; n_px];
        for i in 0..n_px {
            let (mx, my) = (m.mu_x[i], m.mu_y[i]);
            let a1 = 2.0 * mx * my + C1;
            let a2 = 2.0 * (m.sxy[i] - mx * my) + C2;
            let b1 = mx * mx + my * my + C1;
            let b2 = (m.sxx[i] - mx * mx) + (m.syy[i] - my * my) + C2;
            let s = a1 * a2 / (b1 * b2);
            total += s;
            // grouped so that every term vanishes exactly when a == b
            let d_mu = 2.0 * (my * (a2 - a1) - mx * s * (b2 - b1)) / (b1 * b2);
            // d_sxx + d_sxy / 2
            let d_var = a1 * (b2 - a2) / (b1 * b2 * b2);
            let d_sxy = 2.0 * a1 / (b1 * b2);
            g_mu[i] = upstream * d_mu;
            g_var[i] = upstream * d_var;
            g_sxy[i] = upstream * d_sxy;
        }
        // the window is symmetric, so the adjoint of `blur` is `blur`
        let t_mu = blur(&g_mu, width, height, &w);
        let t_var = blur(&g_var, width, height, &w);
        let t_sxy = blur(&g_sxy, width, height, &w);
        for i in 0..n_px {
            // 2x·t_sxx + y·t_sxy rewritten as 2x·t_var + (y - x)·t_sxy
            grad[i * 3 + c] = t_mu[i] + 2.0 * x[i] * t_var[i] + (y[i] - x[i]) * t_sxy[i];
        }
    }
    let value = (1.0 - total / (n_px * 3) as f64) / 2.0;
    Ok((value, grad))
}
