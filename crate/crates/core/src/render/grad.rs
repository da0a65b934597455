//! Photometric loss `(1 - λ)·L1 + λ·D-SSIM` and its analytic gradient with
//! respect to every Gaussian parameter.
//!
//! The backward pass re-composites each pixel to recover the per-splat
//! opacities and transmittances, walks them back to front, and then chains
//! the screen-space partials through the EWA projection, the SH color, the
//! sigmoid/exp activations and quaternion normalization.

use nalgebra::{Matrix2, Matrix3, Vector3};

use super::project::{projection_jacobian, Splat2D};
use super::raster::{Frame, RenderOptions};
use super::{sh, ssim};
use crate::camera::CameraPose;
use crate::error::{Error, Result};
use crate::imaging::ColorImage;
use crate::par;
use crate::scene::{quat_to_matrix, Gaussian3D, GaussianScene};

/// Loss gradient for one Gaussian, shaped like its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianGrad {
    pub position: [f64; 3],
    pub rotation: [f64; 4],
    pub log_scale: [f64; 3],
    pub opacity_logit: f64,
    pub sh: Vec<[f64; 3]>,
}

impl GaussianGrad {
    pub fn zeros(sh_len: usize) -> Self {
        Self {
            position: [0.0; 3],
            rotation: [0.0; 4],
            log_scale: [0.0; 3],
            opacity_logit: 0.0,
            sh: vec![[0.0; 3]; sh_len],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.position
            .iter()
            .chain(&self.rotation)
            .chain(&self.log_scale)
            .chain(std::iter::once(&self.opacity_logit))
            .chain(self.sh.iter().flatten())
            .all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneGradients {
    pub gaussians: Vec<GaussianGrad>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub total: f64,
    pub l1: f64,
    pub dssim: f64,
}

/// Screen-space partials accumulated per splat.
#[derive(Debug, Clone, Copy, Default)]
struct SplatGrad {
    mean: [f64; 2],
    /// Gradient w.r.t. the symmetric conic matrix entries `[xx, xy, yy]`
    /// (the off-diagonal counted once per matrix entry).
    conic: [f64; 3],
    base_alpha: f64,
    color: [f64; 3],
}

impl SplatGrad {
    fn add(&mut self, o: &SplatGrad) {
        for i in 0..2 {
            self.mean[i] += o.mean[i];
        }
        for i in 0..3 {
            self.conic[i] += o.conic[i];
            self.color[i] += o.color[i];
        }
        self.base_alpha += o.base_alpha;
    }
}

/// Loss of a rendered image against a target, with the per-value gradient.
pub fn photometric_loss(
    rendered: &ColorImage,
    target: &ColorImage,
    lambda: f64,
) -> Result<(LossBreakdown, Vec<f64>)> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidArgument(format!("lambda {lambda} outside [0, 1]")));
    }
    if rendered.width != target.width || rendered.height != target.height {
        return Err(Error::InvalidArgument("target size does not match the view".into()));
    }
    let n = rendered.data.len() as f64;
    let mut l1 = 0.0;
    let mut grad = vec![0.0; rendered.data.len()];
    for ((g, &r), &t) in grad.iter_mut().zip(&rendered.data).zip(&target.data) {
        let d = r - t;
        l1 += d.abs();
        *g = (1.0 - lambda) * sign(d) / n;
    }
    l1 /= n;
    let dssim = if lambda > 0.0 {
        let (value, g_ssim) = ssim::dssim_with_grad(rendered, target)?;
        for (g, gs) in grad.iter_mut().zip(g_ssim) {
            *g += lambda * gs;
        }
        value
    } else {
        ssim::dssim(rendered, target)?
    };
    Ok((
        LossBreakdown {
            total: (1.0 - lambda) * l1 + lambda * dssim,
            l1,
            dssim,
        },
        grad,
    ))
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Loss only, without gradients.
pub fn loss(
    scene: &GaussianScene,
    pose: &CameraPose,
    target: &ColorImage,
    lambda: f64,
    opts: &RenderOptions,
) -> Result<LossBreakdown> {
    let out = super::raster::render_with(scene, pose, opts);
    Ok(photometric_loss(&out.color, target, lambda)?.0)
}

pub fn loss_and_gradients(
    scene: &GaussianScene,
    pose: &CameraPose,
    target: &ColorImage,
    lambda: f64,
) -> Result<(LossBreakdown, SceneGradients)> {
    loss_and_gradients_with(scene, pose, target, lambda, &RenderOptions::default())
}

pub fn loss_and_gradients_with(
    scene: &GaussianScene,
    pose: &CameraPose,
    target: &ColorImage,
    lambda: f64,
    opts: &RenderOptions,
) -> Result<(LossBreakdown, SceneGradients)> {
    if !target.same_size(pose.width, pose.height) {
        return Err(Error::InvalidArgument(format!(
            "target is {}x{}, view is {}x{}",
            target.width, target.height, pose.width, pose.height
        )));
    }
    let frame = Frame::build(scene, pose);
    let rendered = render_frame(&frame, opts.background);
    let (breakdown, d_image) = photometric_loss(&rendered, target, lambda)?;

    let sh_len = crate::scene::sh_coeff_count(scene.sh_degree());
    let mut grads = SceneGradients {
        gaussians: vec![GaussianGrad::zeros(sh_len); scene.len()],
    };
    if scene.is_empty() {
        grads.gaussians.clear();
        return Ok((breakdown, grads));
    }

    // per-tile partials, reduced in tile order
    let tile_grads = par::map_indexed(frame.tiles.len(), |tile| {
        backward_tile(&frame, tile, &d_image, opts.background)
    });
    let mut splat_grads = vec![SplatGrad::default(); frame.splats.len()];
    for (tile, partial) in tile_grads.into_iter().enumerate() {
        for (k, g) in partial.into_iter().enumerate() {
            splat_grads[frame.tiles[tile][k] as usize].add(&g);
        }
    }

    let eye = pose.center();
    let per_splat = par::map_indexed(frame.splats.len(), |slot| {
        let s = &frame.splats[slot];
        let g = &scene.gaussians()[s.index];
        chain_to_gaussian(g, s, &splat_grads[slot], pose, eye)
    });
    for (slot, g) in per_splat.into_iter().enumerate() {
        grads.gaussians[frame.splats[slot].index] = g;
    }
    Ok((breakdown, grads))
}

fn render_frame(frame: &Frame, background: [f64; 3]) -> ColorImage {
    let tiles = par::map_indexed(frame.tiles.len(), |tile| {
        let (x0, y0, x1, y1) = frame.tile_rect(tile);
        let mut px = Vec::with_capacity((x1 - x0) * (y1 - y0));
        for y in y0..y1 {
            for x in x0..x1 {
                px.push(frame.composite(x, y, &frame.tiles[tile], background, |_| {}).color);
            }
        }
        px
    });
    let mut img = ColorImage::new(frame.width, frame.height);
    for (tile, px) in tiles.into_iter().enumerate() {
        let (x0, y0, x1, _) = frame.tile_rect(tile);
        for (k, c) in px.into_iter().enumerate() {
            img.set(x0 + k % (x1 - x0), y0 + k / (x1 - x0), c);
        }
    }
    img
}

fn backward_tile(frame: &Frame, tile: usize, d_image: &[f64], background: [f64; 3]) -> Vec<SplatGrad> {
    let candidates = &frame.tiles[tile];
    let mut out = vec![SplatGrad::default(); candidates.len()];
    if candidates.is_empty() {
        return out;
    }
    let (x0, y0, x1, y1) = frame.tile_rect(tile);
    let mut contribs = Vec::new();
    for y in y0..y1 {
        for x in x0..x1 {
            contribs.clear();
            let px = frame.composite(x, y, candidates, background, |c| contribs.push(c));
            let i = (y * frame.width + x) * 3;
            let dc = [d_image[i], d_image[i + 1], d_image[i + 2]];
            if dc == [0.0; 3] || contribs.is_empty() {
                continue;
            }
            // color contributed behind the current splat, starting with background
            let mut behind = [0.0; 3];
            for c in 0..3 {
                behind[c] = px.transmittance * background[c];
            }
            for c in contribs.iter().rev() {
                let s = &frame.splats[c.slot];
                let g = &mut out[c.local];
                let w = c.alpha * c.transmittance;
                let mut d_alpha = 0.0;
                for ch in 0..3 {
                    g.color[ch] += dc[ch] * w;
                    d_alpha += dc[ch] * (s.color[ch] * c.transmittance - behind[ch] / (1.0 - c.alpha));
                    behind[ch] += s.color[ch] * w;
                }
                if c.clamped {
                    continue;
                }
                g.base_alpha += d_alpha * c.falloff;
                // alpha = base * exp(-q / 2)
                let d_q = -0.5 * c.alpha * d_alpha;
                let dx = x as f64 - s.mean2d[0];
                let dy = y as f64 - s.mean2d[1];
                let [ca, cb, cc] = s.conic;
                g.mean[0] -= d_q * 2.0 * (ca * dx + cb * dy);
                g.mean[1] -= d_q * 2.0 * (cb * dx + cc * dy);
                g.conic[0] += d_q * dx * dx;
                g.conic[1] += d_q * dx * dy;
                g.conic[2] += d_q * dy * dy;
            }
        }
    }
    out
}

fn chain_to_gaussian(
    g: &Gaussian3D,
    s: &Splat2D,
    sg: &SplatGrad,
    pose: &CameraPose,
    eye: [f64; 3],
) -> GaussianGrad {
    let mut out = GaussianGrad::zeros(g.sh.len());

    // opacity
    let a = s.base_alpha;
    out.opacity_logit = sg.base_alpha * a * (1.0 - a);

    // color → SH coefficients and view direction
    let mut d_pos_world = Vector3::zeros();
    let d = Vector3::from(g.position) - Vector3::from(eye);
    let dist = d.norm();
    let dir: [f64; 3] = if dist > 0.0 { (d / dist).into() } else { [0.0, 0.0, 1.0] };
    let basis = sh::basis(dir, g.sh.len());
    let basis_grad = sh::basis_grad(dir, g.sh.len());
    let mut d_dir = Vector3::zeros();
    for ch in 0..3 {
        if s.color_clamped[ch] {
            continue;
        }
        let dc = sg.color[ch];
        for (k, coeff) in g.sh.iter().enumerate() {
            out.sh[k][ch] = dc * basis[k];
            if k > 0 {
                d_dir += Vector3::from(basis_grad[k]) * (dc * coeff[ch]);
            }
        }
    }
    if g.sh.len() > 1 && dist > 0.0 {
        let dir_v = Vector3::from(dir);
        d_pos_world += (d_dir - dir_v * dir_v.dot(&d_dir)) / dist;
    }

    // screen-space mean and covariance → camera-space position
    let p = pose.to_camera(g.position);
    let iz = 1.0 / p.z;
    let (fx, fy) = (pose.fx, pose.fy);
    let mut d_pc = Vector3::new(
        sg.mean[0] * fx * iz,
        sg.mean[1] * fy * iz,
        -(sg.mean[0] * fx * p.x + sg.mean[1] * fy * p.y) * iz * iz,
    );

    let conic = Matrix2::new(s.conic[0], s.conic[1], s.conic[1], s.conic[2]);
    let g_conic = Matrix2::new(sg.conic[0], sg.conic[1], sg.conic[1], sg.conic[2]);
    let g_cov = -(conic * g_conic * conic);

    let w = pose.rotation;
    let j = projection_jacobian(pose, &p);
    let t = j * w;
    let sigma = g.covariance();
    let g_sigma: Matrix3<f64> = t.transpose() * g_cov * t;
    let g_t = 2.0 * g_cov * t * sigma;
    let g_j = g_t * w.transpose();
    d_pc.x += g_j[(0, 2)] * (-fx * iz * iz);
    d_pc.y += g_j[(1, 2)] * (-fy * iz * iz);
    d_pc.z += g_j[(0, 0)] * (-fx * iz * iz)
        + g_j[(0, 2)] * (2.0 * fx * p.x * iz * iz * iz)
        + g_j[(1, 1)] * (-fy * iz * iz)
        + g_j[(1, 2)] * (2.0 * fy * p.y * iz * iz * iz);
    d_pos_world += w.transpose() * d_pc;
    out.position = d_pos_world.into();

    // Σ = M Mᵀ with M = R · diag(scale)
    let r = quat_to_matrix(g.rotation);
    let scale = g.scale();
    let m = r * Matrix3::from_diagonal(&Vector3::from(scale));
    let g_m = 2.0 * g_sigma * m;
    let mut g_r = Matrix3::zeros();
    for col in 0..3 {
        let mut g_s = 0.0;
        for row in 0..3 {
            g_r[(row, col)] = g_m[(row, col)] * scale[col];
            g_s += g_m[(row, col)] * r[(row, col)];
        }
        out.log_scale[col] = g_s * scale[col];
    }
    out.rotation = quaternion_grad(g.rotation, &g_r);
    out
}

/// Pulls a rotation-matrix gradient back through `R(q / |q|)`.
fn quaternion_grad(q: [f64; 4], g_r: &Matrix3<f64>) -> [f64; 4] {
    let norm = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
    let [w, x, y, z] = q.map(|c| c / norm);
    let dw = Matrix3::new(0.0, -2.0 * z, 2.0 * y, 2.0 * z, 0.0, -2.0 * x, -2.0 * y, 2.0 * x, 0.0);
    let dx = Matrix3::new(0.0, 2.0 * y, 2.0 * z, 2.0 * y, -4.0 * x, -2.0 * w, 2.0 * z, 2.0 * w, -4.0 * x);
    let dy = Matrix3::new(-4.0 * y, 2.0 * x, 2.0 * w, 2.0 * x, 0.0, 2.0 * z, -2.0 * w, 2.0 * z, -4.0 * y);
    let dz = Matrix3::new(-4.0 * z, -2.0 * w, 2.0 * x, 2.0 * w, -4.0 * z, 2.0 * y, 2.0 * x, 2.0 * y, 0.0);
    let g_n = [dw, dx, dy, dz].map(|d| d.component_mul(g_r).sum());
    let n = [w, x, y, z];
    let dot: f64 = (0..4).map(|i| n[i] * g_n[i]).sum();
    [0, 1, 2, 3].map(|i| (g_n[i] - n[i] * dot) / norm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::render::raster::render;

    #[test]
    fn zero_loss_at_own_render() {
        let gs = vec![
            Gaussian3D::isotropic([0.0, 0.0, 2.0], 0.1, 0.7, [0.8, 0.3, 0.1], 1),
            Gaussian3D::isotropic([0.1, 0.05, 2.5], 0.15, 0.5, [0.2, 0.6, 0.9], 1),
        ];
        let scene = GaussianScene::new(gs, 1).unwrap();
        let pose = CameraPose::new("t", [30.0, 30.0, 12.0, 10.0], (24, 20), Matrix3::identity(), Vector3::zeros()).unwrap();
        let target = render(&scene, &pose).color;
        for lambda in [0.0, 0.2, 1.0] {
            let (l, g) = loss_and_gradients(&scene, &pose, &target, lambda).unwrap();
            assert!(l.total.abs() < 1e-12);
            for gg in &g.gaussians {
                assert!(gg.position.iter().chain(&gg.rotation).all(|v| v.abs() < 1e-10));
                assert!(gg.sh.iter().flatten().all(|v| v.abs() < 1e-10));
            }
        }
    }

    #[test]
    fn empty_scene_compares_against_background() {
        let pose = CameraPose::new("t", [30.0, 30.0, 4.0, 4.0], (8, 8), Matrix3::identity(), Vector3::zeros()).unwrap();
        let target = ColorImage::filled(8, 8, [0.5; 3]);
        let (l, g) = loss_and_gradients(&GaussianScene::empty(0), &pose, &target, 0.0).unwrap();
        assert!((l.total - 0.5).abs() < 1e-12);
        assert!(g.gaussians.is_empty());
    }

    #[test]
    fn rejects_bad_lambda_and_size() {
        let pose = CameraPose::new("t", [30.0, 30.0, 4.0, 4.0], (8, 8), Matrix3::identity(), Vector3::zeros()).unwrap();
        let target = ColorImage::new(8, 8);
        assert!(loss_and_gradients(&GaussianScene::empty(0), &pose, &target, 1.5).is_err());
        assert!(loss_and_gradients(&GaussianScene::empty(0), &pose, &ColorImage::new(4, 8), 0.2).is_err());
    }
}
