//! Independent reference implementations shared by the integration and
//! acceptance tests. Nothing here calls into the code paths it checks.

#![allow(dead_code)]

pub mod criteria;

use gsfill_core::camera::{CameraPose, ZNEAR};
use gsfill_core::imaging::DepthMap;
use gsfill_core::mask::MaskImage;
use gsfill_core::render::{loss, RenderOptions};
use gsfill_core::scene::GaussianScene;
use nalgebra::{DMatrix, DVector, Matrix2, Matrix2x3, Matrix3, Vector3};
use rand::Rng;

pub struct OracleImage {
    pub color: Vec<f64>,
    pub depth: Vec<f64>,
    pub alpha: Vec<f64>,
}

struct OracleSplat {
    index: usize,
    mean: [f64; 2],
    inv: Matrix2<f64>,
    z: f64,
    color: [f64; 3],
    opacity: f64,
}

fn quat_matrix(q: [f64; 4]) -> Matrix3<f64> {
    let n = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
    let (w, x, y, z) = (q[0] / n, q[1] / n, q[2] / n, q[3] / n);
    Matrix3::new(
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - w * z),
        2.0 * (x * z + w * y),
        2.0 * (x * y + w * z),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - w * x),
        2.0 * (x * z - w * y),
        2.0 * (y * z + w * x),
        1.0 - 2.0 * (x * x + y * y),
    )
}

/// Color from SH of degree at most 1.
fn sh_color(sh: &[[f64; 3]], dir: Vector3<f64>) -> [f64; 3] {
    const C0: f64 = 0.282_094_791_773_878_14;
    const C1: f64 = 0.488_602_511_902_919_9;
    assert!(sh.len() == 1 || sh.len() == 4, "oracle handles degree 0 and 1");
    let mut out = [0.0; 3];
    for c in 0..3 {
        let mut v = 0.5 + C0 * sh[0][c];
        if sh.len() == 4 {
            v += -C1 * dir.y * sh[1][c] + C1 * dir.z * sh[2][c] - C1 * dir.x * sh[3][c];
        }
        out[c] = v.clamp(0.0, 1.0);
    }
    out
}

fn oracle_project(scene: &GaussianScene, pose: &CameraPose) -> Vec<OracleSplat> {
    let eye = pose.center();
    let mut out = Vec::new();
    for (index, g) in scene.gaussians().iter().enumerate() {
        let p = pose.rotation * Vector3::from(g.position) + pose.translation;
        if p.z <= ZNEAR {
            continue;
        }
        let mean = [pose.fx * p.x / p.z + pose.cx, pose.fy * p.y / p.z + pose.cy];
        let j = Matrix2x3::new(
            pose.fx / p.z,
            0.0,
            -pose.fx * p.x / (p.z * p.z),
            0.0,
            pose.fy / p.z,
            -pose.fy * p.y / (p.z * p.z),
        );
        let r = quat_matrix(g.rotation);
        let s = Matrix3::from_diagonal(&Vector3::from(g.log_scale.map(f64::exp)));
        let m = r * s;
        let sigma = m * m.transpose();
        let t = j * pose.rotation;
        let cov = t * sigma * t.transpose() + Matrix2::identity() * 0.3;
        let cov = (cov + cov.transpose()) * 0.5;
        let eig = cov.symmetric_eigenvalues();
        let sd = eig.max().sqrt();
        let (w, h) = (pose.width as f64, pose.height as f64);
        if mean[0] < -3.0 * sd || mean[0] > w - 1.0 + 3.0 * sd || mean[1] < -3.0 * sd || mean[1] > h - 1.0 + 3.0 * sd {
            continue;
        }
        let dir = (Vector3::from(g.position) - Vector3::from(eye)).normalize();
        out.push(OracleSplat {
            index,
            mean,
            inv: cov.try_inverse().expect("positive definite"),
            z: p.z,
            color: sh_color(&g.sh, dir),
            opacity: 1.0 / (1.0 + (-g.opacity_logit).exp()),
        });
    }
    out.sort_by(|a, b| a.z.partial_cmp(&b.z).unwrap().then(a.index.cmp(&b.index)));
    out
}

/// Per-pixel front-to-back compositing over every projected splat, no tiles.
pub fn brute_force_render(scene: &GaussianScene, pose: &CameraPose) -> OracleImage {
    let splats = oracle_project(scene, pose);
    let (w, h) = (pose.width, pose.height);
    let mut img = OracleImage {
        color: vec![0.0; w * h * 3],
        depth: vec![0.0; w * h],
        alpha: vec![0.0; w * h],
    };
    for y in 0..h {
        for x in 0..w {
            let mut t = 1.0;
            let mut c = [0.0; 3];
            let mut d = 0.0;
            for s in &splats {
                let dv = nalgebra::Vector2::new(x as f64 - s.mean[0], y as f64 - s.mean[1]);
                let q = (dv.transpose() * s.inv * dv)[0];
                let a = s.opacity * (-0.5 * q).exp();
                if a < 1.0 / 255.0 {
                    continue;
                }
                let a = a.min(0.99);
                for k in 0..3 {
                    c[k] += s.color[k] * a * t;
                }
                d += s.z * a * t;
                t *= 1.0 - a;
                if t < 1e-4 {
                    break;
                }
            }
            let i = y * w + x;
            img.color[i * 3..i * 3 + 3].copy_from_slice(&c);
            img.depth[i] = d;
            img.alpha[i] = 1.0 - t;
        }
    }
    img
}

/// Central finite differences of the photometric loss, flattened per
/// Gaussian as `[position 3, rotation 4, log_scale 3, opacity 1, sh 3k]`.
pub fn finite_difference_gradients(
    scene: &GaussianScene,
    pose: &CameraPose,
    target: &gsfill_core::ColorImage,
    lambda: f64,
    h: f64,
) -> Vec<Vec<f64>> {
    let opts = RenderOptions::default();
    let eval = |s: &GaussianScene| loss(s, pose, target, lambda, &opts).unwrap().total;
    let mut out = Vec::new();
    for i in 0..scene.len() {
        let n = 11 + 3 * scene.gaussians()[i].sh.len();
        let mut grad = vec![0.0; n];
        for (k, gk) in grad.iter_mut().enumerate() {
            let mut plus = scene.clone();
            let mut minus = scene.clone();
            *param_mut(&mut plus.gaussians_mut()[i], k) += h;
            *param_mut(&mut minus.gaussians_mut()[i], k) -= h;
            *gk = (eval(&plus) - eval(&minus)) / (2.0 * h);
        }
        out.push(grad);
    }
    out
}

pub fn param_mut(g: &mut gsfill_core::Gaussian3D, k: usize) -> &mut f64 {
    match k {
        0..=2 => &mut g.position[k],
        3..=6 => &mut g.rotation[k - 3],
        7..=9 => &mut g.log_scale[k - 7],
        10 => &mut g.opacity_logit,
        _ => &mut g.sh[(k - 11) / 3][(k - 11) % 3],
    }
}

/// Percentile by full sort and linear interpolation between order statistics.
pub fn sorted_percentile(values: &[f64], p: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let rank = p / 100.0 * (v.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (rank - lo as f64)
}

fn d2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

/// Points with fewer than `k` others within `r`, by exhaustive pair scan.
pub fn brute_radius_outliers(points: &[[f64; 3]], r: f64, k: usize) -> Vec<usize> {
    (0..points.len())
        .filter(|&i| {
            let n = (0..points.len())
                .filter(|&j| j != i && d2(&points[i], &points[j]) <= r * r)
                .count();
            n < k
        })
        .collect()
}

/// Original points within `dist` of any new point, by exhaustive scan.
pub fn brute_near(new: &[[f64; 3]], original: &[[f64; 3]], dist: f64) -> Vec<usize> {
    (0..original.len())
        .filter(|&i| new.iter().any(|p| d2(p, &original[i]) <= dist * dist))
        .collect()
}

/// Laplace fill by assembling and LU-solving the full linear system.
pub fn dense_harmonic(d: &DepthMap, mask: &MaskImage) -> Vec<f64> {
    let (w, h) = (d.width, d.height);
    let unknown: Vec<usize> = (0..w * h).filter(|&i| mask.bits[i]).collect();
    let mut slot = vec![usize::MAX; w * h];
    for (k, &i) in unknown.iter().enumerate() {
        slot[i] = k;
    }
    let n = unknown.len();
    let mut a = DMatrix::<f64>::zeros(n, n);
    let mut b = DVector::<f64>::zeros(n);
    for (k, &i) in unknown.iter().enumerate() {
        let (x, y) = ((i % w) as i64, (i / w) as i64);
        for (dx, dy) in [(-1, 0), (1, 0), (0, -1), (0, 1)] {
            let (nx, ny) = (x + dx, y + dy);
            if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                continue;
            }
            let j = ny as usize * w + nx as usize;
            if mask.bits[j] {
                a[(k, k)] += 1.0;
                a[(k, slot[j])] -= 1.0;
            } else if d.valid[j] {
                a[(k, k)] += 1.0;
                b[k] += d.depth[j];
            }
        }
    }
    let x = a.lu().solve(&b).expect("nonsingular system");
    let mut out = d.depth.clone();
    for (k, &i) in unknown.iter().enumerate() {
        out[i] = x[k];
    }
    out
}

pub fn random_points(rng: &mut impl Rng, n: usize, spread: f64) -> Vec<[f64; 3]> {
    (0..n)
        .map(|_| [0, 1, 2].map(|_| rng.random_range(-spread..spread)))
        .collect()
}

/// Relative error `‖a - b‖ / ‖b‖` for one parameter class across a scene.
pub fn class_relative_error(analytic: &[Vec<f64>], numeric: &[Vec<f64>], range: std::ops::Range<usize>) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (a, n) in analytic.iter().zip(numeric) {
        let hi = range.end.min(a.len());
        for k in range.start..hi {
            num += (a[k] - n[k]).powi(2);
            den += n[k].powi(2);
        }
    }
    if den < 1e-24 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}
