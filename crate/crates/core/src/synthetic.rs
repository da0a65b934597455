//! Procedural scenes with known ground truth, used by tests, the demo and
//! the benchmarks.

use rand::Rng;

use crate::camera::CameraPose;
use crate::imaging::ColorImage;
use crate::mask::MaskImage;
use crate::render::render;
use crate::scene::{Gaussian3D, GaussianScene};

/// Smooth color field over the plane, values inside `[0.15, 0.85]`.
pub fn plane_color(x: f64, y: f64) -> [f64; 3] {
    [
        0.5 + 0.3 * (2.0 * x).sin(),
        0.5 + 0.25 * (3.0 * y + 0.5).cos(),
        0.45 + 0.2 * (x + y).sin(),
    ]
}

/// Grid of isotropic Gaussians on the plane `z = depth`.
pub fn textured_plane(half_size: f64, spacing: f64, depth: f64, sh_degree: usize) -> GaussianScene {
    let n = (2.0 * half_size / spacing).round() as usize + 1;
    let mut gs = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            let x = -half_size + i as f64 * spacing;
            let y = -half_size + j as f64 * spacing;
            gs.push(Gaussian3D::isotropic([x, y, depth], 0.7 * spacing, 0.95, plane_color(x, y), sh_degree));
        }
    }
    GaussianScene::new(gs, sh_degree).expect("uniform sh degree")
}

/// Region where two renders differ: color beyond `1e-3` or opacity loss
/// beyond `1e-3`.
pub fn difference_mask(scene_a: &GaussianScene, scene_b: &GaussianScene, pose: &CameraPose) -> MaskImage {
    let a = render(scene_a, pose);
    let b = render(scene_b, pose);
    let mut m = MaskImage::new(pose.width, pose.height);
    for i in 0..m.bits.len() {
        let dc = (0..3).any(|c| (a.color.data[i * 3 + c] - b.color.data[i * 3 + c]).abs() > 1e-3);
        let da = (a.alpha_acc[i] - b.alpha_acc[i]).abs() > 1e-3;
        m.bits[i] = dc || da;
    }
    m
}

/// Plane with a disk of Gaussians removed, seen by one camera.
#[derive(Debug, Clone)]
pub struct DiskFixture {
    pub full: GaussianScene,
    pub holed: GaussianScene,
    pub pose: CameraPose,
    /// Render of the full scene, the ground-truth reference image.
    pub ground_truth: ColorImage,
    /// Pixels affected by the removal.
    pub mask: MaskImage,
}

pub fn disk_fixture(size: usize) -> DiskFixture {
    let f = 1.5 * size as f64;
    let c = (size as f64 - 1.0) / 2.0;
    let pose = CameraPose::look_at(
        "reference",
        [f, f, c, c],
        (size, size),
        [0.25, -0.3, -3.0],
        [0.0, 0.0, 0.0],
        [0.0, -1.0, 0.0],
    )
    .expect("valid fixture camera");
    let full = textured_plane(1.3, 0.03, 0.0, 0);
    let mut holed = full.clone();
    let radius = 0.32;
    holed.retain_indexed(|i| {
        let p = full.gaussians()[i].position;
        p[0].hypot(p[1]) > radius
    });
    let ground_truth = render(&full, &pose).color;
    let mask = difference_mask(&full, &holed, &pose);
    DiskFixture {
        full,
        holed,
        pose,
        ground_truth,
        mask,
    }
}

/// Back wall with a removed disk, an L-shaped occluder in front of it, and
/// two cameras: from the first, the occluder hides part of the hole that
/// the second one sees.
#[derive(Debug, Clone)]
pub struct OcclusionFixture {
    pub full: GaussianScene,
    pub holed: GaussianScene,
    pub poses: [CameraPose; 2],
    pub ground_truth: [ColorImage; 2],
    pub masks: [MaskImage; 2],
}

pub fn occlusion_fixture(size: usize) -> OcclusionFixture {
    let f = 1.2 * size as f64;
    let c = (size as f64 - 1.0) / 2.0;
    let cam = |name: &str, eye: [f64; 3]| {
        CameraPose::look_at(name, [f, f, c, c], (size, size), eye, [0.0, 0.0, 0.0], [0.0, -1.0, 0.0])
            .expect("valid fixture camera")
    };
    let poses = [cam("front", [0.0, 0.0, -4.0]), cam("side", [1.6, 0.6, -3.7])];
    let wall = textured_plane(1.8, 0.04, 0.0, 0);
    let mut holed = wall.clone();
    holed.retain_indexed(|i| {
        let p = wall.gaussians()[i].position;
        p[0].hypot(p[1]) > 0.55
    });
    // L: a vertical bar on the left of the hole and a horizontal bar below it
    let mut occluder = Vec::new();
    let s = 0.04;
    let mut add = |x: f64, y: f64| {
        occluder.push(Gaussian3D::isotropic([x, y, -1.2], 0.7 * s, 0.95, [0.2, 0.25, 0.8], 0));
    };
    for j in 0..=30 {
        for i in 0..=5 {
            add(-0.5 + i as f64 * s, -0.45 + j as f64 * s);
        }
    }
    for j in 0..=5 {
        for i in 6..=25 {
            add(-0.5 + i as f64 * s, 0.45 + j as f64 * s);
        }
    }
    let mut full = wall.clone();
    let mut holed_all = holed.clone();
    for g in occluder {
        full.push(g.clone());
        holed_all.push(g);
    }
    let ground_truth = [render(&full, &poses[0]).color, render(&full, &poses[1]).color];
    let masks = [
        difference_mask(&full, &holed_all, &poses[0]),
        difference_mask(&full, &holed_all, &poses[1]),
    ];
    OcclusionFixture {
        full,
        holed: holed_all,
        poses,
        ground_truth,
        masks,
    }
}

/// Camera on a sphere of radius `distance` around the origin, looking at it.
pub fn random_pose(rng: &mut impl Rng, width: usize, height: usize, distance: f64) -> CameraPose {
    loop {
        let dir: [f64; 3] = [
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ];
        let norm = (dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]).sqrt();
        if !(0.2..=1.0).contains(&norm) {
            continue;
        }
        let eye = dir.map(|v| v / norm * distance);
        // keep the up vector away from the viewing direction
        let up = if (eye[1] / distance).abs() > 0.9 { [1.0, 0.0, 0.0] } else { [0.0, -1.0, 0.0] };
        let f = rng.random_range(0.6..1.6) * width as f64;
        let cx = width as f64 / 2.0 + rng.random_range(-3.0..3.0);
        let cy = height as f64 / 2.0 + rng.random_range(-3.0..3.0);
        if let Ok(p) = CameraPose::look_at("random", [f, f * rng.random_range(0.9..1.1), cx, cy], (width, height), eye, [0.0; 3], up) {
            return p;
        }
    }
}

/// Random anisotropic Gaussians in front of `pose`, inside its frustum.
pub fn random_scene(rng: &mut impl Rng, pose: &CameraPose, count: usize, sh_degree: usize) -> GaussianScene {
    let mut gs = Vec::with_capacity(count);
    for _ in 0..count {
        let u = rng.random_range(0.0..pose.width as f64);
        let v = rng.random_range(0.0..pose.height as f64);
        let z = rng.random_range(1.0..4.0);
        let position = pose.unproject(u, v, z);
        let mut sh: Vec<[f64; 3]> = vec![[0.0; 3]; crate::scene::sh_coeff_count(sh_degree)];
        sh[0] = [0, 1, 2].map(|_| rng.random_range(-1.2..1.2));
        for c in sh.iter_mut().skip(1) {
            *c = [0, 1, 2].map(|_| rng.random_range(-0.2..0.2));
        }
        let mut q = [0.0; 4].map(|_: f64| rng.random_range(-1.0..1.0));
        if q.iter().map(|v| v * v).sum::<f64>() < 1e-3 {
            q = [1.0, 0.0, 0.0, 0.0];
        }
        let base = (z / pose.fx) * rng.random_range(1.5..6.0);
        gs.push(Gaussian3D {
            position,
            rotation: q,
            log_scale: [0, 1, 2].map(|_| (base * rng.random_range(0.5..2.0)).ln()),
            opacity_logit: rng.random_range(-2.0..3.0),
            sh,
        });
    }
    GaussianScene::new(gs, sh_degree).expect("uniform sh degree")
}
