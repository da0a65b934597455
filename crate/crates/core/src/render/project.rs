//! EWA projection of 3D Gaussians to screen-space splats.

use nalgebra::{Matrix2, Matrix2x3, Vector3};

use super::sh;
use crate::camera::{CameraPose, ZNEAR};
use crate::scene::{sigmoid, Gaussian3D};

/// Isotropic low-pass term added to every screen-space covariance (pixels²).
pub const COV2D_FLOOR: f64 = 0.3;
/// Contributions below this opacity are skipped by the compositor.
pub const ALPHA_MIN: f64 = 1.0 / 255.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Splat2D {
    /// Index of the source Gaussian in the scene.
    pub index: usize,
    pub mean2d: [f64; 2],
    /// Symmetric covariance `[xx, xy, yy]` including the floor.
    pub cov2d: [f64; 3],
    /// Inverse covariance `[xx, xy, yy]`.
    pub conic: [f64; 3],
    pub view_z: f64,
    pub color: [f64; 3],
    /// Per-channel flag: color was clamped into `[0, 1]`.
    pub color_clamped: [bool; 3],
    pub base_alpha: f64,
    /// Half-extents of the box outside which the opacity drops below `ALPHA_MIN`.
    pub extent: [f64; 2],
    /// Mahalanobis distance² beyond which the opacity drops below `ALPHA_MIN`.
    pub q_max: f64,
}

impl Splat2D {
    /// Unclamped Gaussian falloff and opacity at pixel `(x, y)`.
    #[inline]
    pub fn falloff(&self, x: f64, y: f64) -> (f64, f64) {
        let g = (-0.5 * self.mahalanobis2(x, y)).exp();
        (g, self.base_alpha * g)
    }

    #[inline]
    pub fn mahalanobis2(&self, x: f64, y: f64) -> f64 {
        let dx = x - self.mean2d[0];
        let dy = y - self.mean2d[1];
        self.conic[0] * dx * dx + 2.0 * self.conic[1] * dx * dy + self.conic[2] * dy * dy
    }

    pub fn bbox(&self) -> [f64; 4] {
        [
            self.mean2d[0] - self.extent[0],
            self.mean2d[1] - self.extent[1],
            self.mean2d[0] + self.extent[0],
            self.mean2d[1] + self.extent[1],
        ]
    }
}

/// Perspective Jacobian of `(fx x / z, fy y / z)` at camera-space point `p`.
pub(crate) fn projection_jacobian(pose: &CameraPose, p: &Vector3<f64>) -> Matrix2x3<f64> {
    let iz = 1.0 / p.z;
    Matrix2x3::new(
        pose.fx * iz,
        0.0,
        -pose.fx * p.x * iz * iz,
        0.0,
        pose.fy * iz,
        -pose.fy * p.y * iz * iz,
    )
}

/// Screen-space covariance `J W Σ Wᵀ Jᵀ` before the low-pass floor.
pub fn raw_cov2d(g: &Gaussian3D, pose: &CameraPose) -> Option<Matrix2<f64>> {
    let p = pose.to_camera(g.position);
    if p.z <= ZNEAR {
        return None;
    }
    let t = projection_jacobian(pose, &p) * pose.rotation;
    Some(t * g.covariance() * t.transpose())
}

/// Evaluates view-dependent color at world position `pos` seen from `eye`.
/// Returns the clamped color, the clamp flags, and the unit view direction.
pub(crate) fn eval_color(
    g: &Gaussian3D,
    eye: [f64; 3],
) -> ([f64; 3], [bool; 3], [f64; 3]) {
    let d = Vector3::from(g.position) - Vector3::from(eye);
    let n = d.norm();
    let dir = if n > 0.0 { (d / n).into() } else { [0.0, 0.0, 1.0] };
    let b = sh::basis(dir, g.sh.len());
    let mut color = [0.5; 3];
    for (k, coeff) in g.sh.iter().enumerate() {
        for c in 0..3 {
            color[c] += b[k] * coeff[c];
        }
    }
    let mut clamped = [false; 3];
    for c in 0..3 {
        if !(0.0..=1.0).contains(&color[c]) {
            clamped[c] = true;
            color[c] = color[c].clamp(0.0, 1.0);
        }
    }
    (color, clamped, dir)
}

/// Projects one Gaussian; `None` when it lies behind the near plane or its
/// center falls more than 3σ outside the image.
pub fn project_gaussian(g: &Gaussian3D, pose: &CameraPose) -> Option<Splat2D> {
    project_indexed(0, g, pose)
}

pub(crate) fn project_indexed(index: usize, g: &Gaussian3D, pose: &CameraPose) -> Option<Splat2D> {
    let p = pose.to_camera(g.position);
    if p.z <= ZNEAR {
        return None;
    }
    let mean2d = [
        pose.fx * p.x / p.z + pose.cx,
        pose.fy * p.y / p.z + pose.cy,
    ];
    let t = projection_jacobian(pose, &p) * pose.rotation;
    let cov: Matrix2<f64> = t * g.covariance() * t.transpose();
    let cov2d = [cov[(0, 0)] + COV2D_FLOOR, 0.5 * (cov[(0, 1)] + cov[(1, 0)]), cov[(1, 1)] + COV2D_FLOOR];
    let det = cov2d[0] * cov2d[2] - cov2d[1] * cov2d[1];
    if !(det > 0.0) || !mean2d.iter().all(|v| v.is_finite()) {
        return None;
    }

    let mid = 0.5 * (cov2d[0] + cov2d[2]);
    let lambda_max = mid + (mid * mid - det).max(0.0).sqrt();
    let sigma = lambda_max.sqrt();
    let (w, h) = (pose.width as f64, pose.height as f64);
    if mean2d[0] < -3.0 * sigma
        || mean2d[0] > w - 1.0 + 3.0 * sigma
        || mean2d[1] < -3.0 * sigma
        || mean2d[1] > h - 1.0 + 3.0 * sigma
    {
        return None;
    }

    let conic = [cov2d[2] / det, -cov2d[1] / det, cov2d[0] / det];
    let base_alpha = sigmoid(g.opacity_logit);
    let q_max = if base_alpha > ALPHA_MIN {
        2.0 * (base_alpha / ALPHA_MIN).ln()
    } else {
        0.0
    };
    let extent = [(q_max * cov2d[0]).sqrt(), (q_max * cov2d[2]).sqrt()];
    let (color, color_clamped, _) = eval_color(g, pose.center());

    Some(Splat2D {
        index,
        mean2d,
        cov2d,
        conic,
        view_z: p.z,
        color,
        color_clamped,
        base_alpha,
        extent,
        q_max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Matrix3;

    fn pose(w: usize, h: usize, f: f64, c: f64) -> CameraPose {
        CameraPose::new("t", [f, f, c, c], (w, h), Matrix3::identity(), Vector3::zeros()).unwrap()
    }

    #[test]
    fn on_axis_projection() {
        let g = Gaussian3D::isotropic([0.0, 0.0, 1.0], 0.1, 0.5, [0.5; 3], 0);
        let s = project_gaussian(&g, &pose(100, 100, 100.0, 50.0)).unwrap();
        assert_eq!(s.mean2d, [50.0, 50.0]);
        assert_eq!(s.view_z, 1.0);
    }

    #[test]
    fn isotropic_cov_follows_similar_triangles() {
        let g = Gaussian3D::isotropic([0.0, 0.0, 1.0], 0.1, 0.5, [0.5; 3], 0);
        let raw = raw_cov2d(&g, &pose(100, 100, 100.0, 50.0)).unwrap();
        assert!((raw[(0, 0)] - 100.0).abs() < 1e-9);
        assert!((raw[(1, 1)] - 100.0).abs() < 1e-9);
        assert!(raw[(0, 1)].abs() < 1e-12);
        let s = project_gaussian(&g, &pose(100, 100, 100.0, 50.0)).unwrap();
        assert!((s.cov2d[0] - 100.3).abs() < 1e-9);
    }

    #[test]
    fn culls_behind_and_far_outside() {
        let p = pose(64, 64, 50.0, 32.0);
        let behind = Gaussian3D::isotropic([0.0, 0.0, -1.0], 0.1, 0.5, [0.5; 3], 0);
        assert!(project_gaussian(&behind, &p).is_none());
        let near = Gaussian3D::isotropic([0.0, 0.0, 0.005], 0.1, 0.5, [0.5; 3], 0);
        assert!(project_gaussian(&near, &p).is_none());
        let outside = Gaussian3D::isotropic([10.0, 0.0, 1.0], 0.01, 0.5, [0.5; 3], 0);
        assert!(project_gaussian(&outside, &p).is_none());
    }

    #[test]
    fn extent_bounds_alpha_min() {
        let mut g = Gaussian3D::isotropic([0.1, -0.05, 2.0], 0.05, 0.7, [0.5; 3], 0);
        g.log_scale = [-2.0, -3.5, -2.5];
        g.rotation = [0.8, 0.3, -0.4, 0.2];
        let s = project_gaussian(&g, &pose(64, 64, 60.0, 32.0)).unwrap();
        let (_, a) = s.falloff(s.mean2d[0] + s.extent[0], s.mean2d[1]);
        assert!(a <= ALPHA_MIN * (1.0 + 1e-9));
        let (_, a) = s.falloff(s.mean2d[0], s.mean2d[1] + s.extent[1]);
        assert!(a <= ALPHA_MIN * (1.0 + 1e-9));
    }
}
