//! Gaussian scene data model.

use nalgebra::{Matrix3, UnitQuaternion, Quaternion, Vector3};

use crate::error::{Error, Result};

/// Zeroth-order spherical-harmonic basis constant.
pub const SH_C0: f64 = 0.282_094_791_773_878_14;

pub const MAX_SH_DEGREE: usize = 3;

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Number of SH coefficients per color channel for a degree.
pub fn sh_coeff_count(degree: usize) -> usize {
    (degree + 1) * (degree + 1)
}

/// DC coefficient reproducing `rgb` under `color = 0.5 + SH_C0 * dc`.
pub fn rgb_to_sh_dc(rgb: [f64; 3]) -> [f64; 3] {
    rgb.map(|c| (c - 0.5) / SH_C0)
}

pub fn sh_dc_to_rgb(dc: [f64; 3]) -> [f64; 3] {
    dc.map(|c| 0.5 + SH_C0 * c)
}

/// One anisotropic 3D Gaussian in the usual splatting parameterization.
///
/// Rotation is stored as `(w, x, y, z)` and normalized on use, scale as
/// per-axis log standard deviation, opacity as a logit.
#[derive(Debug, Clone, PartialEq)]
pub struct Gaussian3D {
    pub position: [f64; 3],
    pub rotation: [f64; 4],
    pub log_scale: [f64; 3],
    pub opacity_logit: f64,
    /// `(degree + 1)^2` RGB coefficient triples, DC first.
    pub sh: Vec<[f64; 3]>,
}

impl Gaussian3D {
    /// Isotropic Gaussian with a flat color and degree-`sh_degree` SH storage.
    pub fn isotropic(
        position: [f64; 3],
        sigma: f64,
        opacity: f64,
        rgb: [f64; 3],
        sh_degree: usize,
    ) -> Self {
        let mut sh = vec![[0.0; 3]; sh_coeff_count(sh_degree)];
        sh[0] = rgb_to_sh_dc(rgb);
        Self {
            position,
            rotation: [1.0, 0.0, 0.0, 0.0],
            log_scale: [sigma.ln(); 3],
            opacity_logit: logit(opacity),
            sh,
        }
    }

    pub fn opacity(&self) -> f64 {
        sigmoid(self.opacity_logit)
    }

    pub fn scale(&self) -> [f64; 3] {
        self.log_scale.map(f64::exp)
    }

    pub fn unit_rotation(&self) -> UnitQuaternion<f64> {
        let [w, x, y, z] = self.rotation;
        UnitQuaternion::from_quaternion(Quaternion::new(w, x, y, z))
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        quat_to_matrix(self.rotation)
    }

    /// World-space covariance `R S S^T R^T`.
    pub fn covariance(&self) -> Matrix3<f64> {
        let r = self.rotation_matrix();
        let s = Matrix3::from_diagonal(&Vector3::from(self.scale()));
        let m = r * s;
        m * m.transpose()
    }

    pub fn sh_degree(&self) -> Option<usize> {
        (0..=MAX_SH_DEGREE).find(|&d| sh_coeff_count(d) == self.sh.len())
    }
}

/// Rotation matrix of the normalized quaternion `(w, x, y, z)`.
pub fn quat_to_matrix(q: [f64; 4]) -> Matrix3<f64> {
    let n = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
    let [w, x, y, z] = q.map(|c| c / n);
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

/// Axis-aligned bounding box. An empty box has `min > max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Aabb {
    pub const EMPTY: Aabb = Aabb {
        min: [f64::INFINITY; 3],
        max: [f64::NEG_INFINITY; 3],
    };

    pub fn is_empty(&self) -> bool {
        (0..3).any(|i| self.min[i] > self.max[i])
    }

    pub fn extend(&mut self, p: [f64; 3]) {
        for i in 0..3 {
            self.min[i] = self.min[i].min(p[i]);
            self.max[i] = self.max[i].max(p[i]);
        }
    }

    pub fn contains(&self, p: [f64; 3]) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    /// Length of the box diagonal; 0 for empty boxes.
    pub fn diagonal(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        (0..3)
            .map(|i| (self.max[i] - self.min[i]).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// An ordered collection of Gaussians sharing one SH degree.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianScene {
    gaussians: Vec<Gaussian3D>,
    sh_degree: usize,
}

impl GaussianScene {
    pub fn empty(sh_degree: usize) -> Self {
        Self {
            gaussians: Vec::new(),
            sh_degree: sh_degree.min(MAX_SH_DEGREE),
        }
    }

    /// Builds a scene, checking every Gaussian carries `sh_degree` coefficients.
    pub fn new(gaussians: Vec<Gaussian3D>, sh_degree: usize) -> Result<Self> {
        if sh_degree > MAX_SH_DEGREE {
            return Err(Error::InvalidArgument(format!(
                "sh degree {sh_degree} exceeds {MAX_SH_DEGREE}"
            )));
        }
        let expected = sh_coeff_count(sh_degree);
        if let Some((i, g)) = gaussians
            .iter()
            .enumerate()
            .find(|(_, g)| g.sh.len() != expected)
        {
            return Err(Error::InvalidArgument(format!(
                "gaussian {i} has {} sh coefficients, expected {expected}",
                g.sh.len()
            )));
        }
        Ok(Self {
            gaussians,
            sh_degree,
        })
    }

    pub fn gaussians(&self) -> &[Gaussian3D] {
        &self.gaussians
    }

    pub fn gaussians_mut(&mut self) -> &mut [Gaussian3D] {
        &mut self.gaussians
    }

    pub fn into_gaussians(self) -> Vec<Gaussian3D> {
        self.gaussians
    }

    pub fn sh_degree(&self) -> usize {
        self.sh_degree
    }

    pub fn len(&self) -> usize {
        self.gaussians.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gaussians.is_empty()
    }

    pub fn bounds(&self) -> Aabb {
        let mut b = Aabb::EMPTY;
        for g in &self.gaussians {
            b.extend(g.position);
        }
        b
    }

    /// Appends a Gaussian, padding or truncating its SH to the scene degree.
    pub fn push(&mut self, mut g: Gaussian3D) {
        g.sh.resize(sh_coeff_count(self.sh_degree), [0.0; 3]);
        self.gaussians.push(g);
    }

    /// Keeps Gaussians whose index satisfies `keep`, preserving order.
    pub fn retain_indexed(&mut self, mut keep: impl FnMut(usize) -> bool) {
        let mut i = 0;
        self.gaussians.retain(|_| {
            let k = keep(i);
            i += 1;
            k
        });
    }
}
