//! Colored point clouds: unprojection of completed depth, outlier removal
//! and merging into a Gaussian scene.

mod kdtree;

pub use kdtree::{dist2, KdTree};

use serde::{Deserialize, Serialize};

use crate::camera::CameraPose;
use crate::error::{Error, Result};
use crate::imaging::{ColorImage, DepthMap};
use crate::mask::MaskImage;
use crate::scene::{logit, rgb_to_sh_dc, sh_coeff_count, Gaussian3D, GaussianScene};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CloudPoint {
    pub xyz: [f64; 3],
    pub rgb: [f64; 3],
    pub source_pixel: (usize, usize),
    pub source_view: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ColoredPointCloud {
    pub points: Vec<CloudPoint>,
}

impl ColoredPointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn positions(&self) -> Vec<[f64; 3]> {
        self.points.iter().map(|p| p.xyz).collect()
    }

    /// Cloud from bare positions, colored gray.
    pub fn from_positions(positions: &[[f64; 3]]) -> Self {
        Self {
            points: positions
                .iter()
                .map(|&xyz| CloudPoint {
                    xyz,
                    rgb: [0.5; 3],
                    source_pixel: (0, 0),
                    source_view: 0,
                })
                .collect(),
        }
    }

    fn subset(&self, keep: &[bool]) -> Self {
        Self {
            points: self
                .points
                .iter()
                .zip(keep)
                .filter(|(_, &k)| k)
                .map(|(p, _)| *p)
                .collect(),
        }
    }

    /// ASCII PLY with `x y z` floats and `red green blue` bytes.
    pub fn to_ascii_ply(&self) -> String {
        crate::ply::point_cloud_to_ascii_ply(self.points.iter().map(|p| (p.xyz, p.rgb)))
    }
}

/// One point per masked pixel with valid depth.
pub fn unproject(
    depth: &DepthMap,
    image: &ColorImage,
    mask: &MaskImage,
    pose: &CameraPose,
    view: usize,
) -> Result<ColoredPointCloud> {
    let (w, h) = (pose.width, pose.height);
    if depth.width != w || depth.height != h || !image.same_size(w, h) || !mask.same_size(w, h) {
        return Err(Error::InvalidArgument(format!(
            "depth, image and mask must all be {w}x{h}"
        )));
    }
    let mut points = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if !mask.bits[i] || !depth.valid[i] {
                continue;
            }
            let z = depth.depth[i];
            if !(z.is_finite() && z > 0.0) {
                continue;
            }
            let xyz = pose.unproject(x as f64, y as f64, z);
            if xyz.iter().all(|c| c.is_finite()) {
                points.push(CloudPoint {
                    xyz,
                    rgb: image.get(x, y),
                    source_pixel: (x, y),
                    source_view: view,
                });
            }
        }
    }
    if points.is_empty() {
        return Err(Error::EmptyResult("no masked pixel has valid depth".into()));
    }
    Ok(ColoredPointCloud { points })
}

/// `(point index, [u, v, z])` for every point in front of the camera.
pub fn reproject_points(pc: &ColoredPointCloud, pose: &CameraPose) -> Vec<(usize, [f64; 3])> {
    pc.points
        .iter()
        .enumerate()
        .filter_map(|(i, p)| pose.project(p.xyz).map(|uvz| (i, uvz)))
        .collect()
}

/// Flags points with fewer than `min_neighbors` other points within `radius`.
pub fn radius_outliers(positions: &[[f64; 3]], radius: f64, min_neighbors: usize) -> Vec<bool> {
    let tree = KdTree::new(positions);
    crate::par::map_indexed(positions.len(), |i| {
        // the count includes the point itself
        tree.count_within(&positions[i], radius) < min_neighbors + 1
    })
}

/// Keeps points with at least `min_neighbors` others within `radius`;
/// returns the survivors and the removed indices.
pub fn radius_outlier_filter(
    pc: &ColoredPointCloud,
    radius: f64,
    min_neighbors: usize,
) -> Result<(ColoredPointCloud, Vec<usize>)> {
    check_outlier_params(radius, min_neighbors)?;
    let outlier = radius_outliers(&pc.positions(), radius, min_neighbors);
    let keep: Vec<bool> = outlier.iter().map(|o| !o).collect();
    Ok((pc.subset(&keep), indices_of(&outlier)))
}

/// Original-cloud points that lie within `dist_threshold` of the new cloud
/// and are radius outliers within the original cloud.
pub fn edge_outliers(
    new_positions: &[[f64; 3]],
    original: &[[f64; 3]],
    dist_threshold: f64,
    radius: f64,
    min_neighbors: usize,
) -> Vec<bool> {
    let new_tree = KdTree::new(new_positions);
    let outlier = radius_outliers(original, radius, min_neighbors);
    let t2 = dist_threshold * dist_threshold;
    crate::par::map_indexed(original.len(), |i| {
        outlier[i] && new_tree.nearest(&original[i]).is_some_and(|(_, d2)| d2 <= t2)
    })
}

/// Removes [`edge_outliers`] from `original`; returns the survivors and the
/// removed indices.
pub fn edge_outlier_removal(
    new_pc: &ColoredPointCloud,
    original: &ColoredPointCloud,
    dist_threshold: f64,
    radius: f64,
    min_neighbors: usize,
) -> Result<(ColoredPointCloud, Vec<usize>)> {
    check_outlier_params(radius, min_neighbors)?;
    if new_pc.is_empty() || original.is_empty() {
        return Err(Error::InvalidArgument("edge outlier removal needs two non-empty clouds".into()));
    }
    let flagged = edge_outliers(&new_pc.positions(), &original.positions(), dist_threshold, radius, min_neighbors);
    let keep: Vec<bool> = flagged.iter().map(|f| !f).collect();
    Ok((original.subset(&keep), indices_of(&flagged)))
}

fn indices_of(flags: &[bool]) -> Vec<usize> {
    flags.iter().enumerate().filter(|(_, &f)| f).map(|(i, _)| i).collect()
}

fn check_outlier_params(radius: f64, min_neighbors: usize) -> Result<()> {
    if !(radius > 0.0) || min_neighbors < 1 {
        return Err(Error::InvalidArgument(format!(
            "radius {radius} must be positive and min_neighbors {min_neighbors} at least 1"
        )));
    }
    Ok(())
}

/// Median nearest-neighbor distance, the unit for default outlier radii.
pub fn median_nn_distance(positions: &[[f64; 3]]) -> Option<f64> {
    if positions.len() < 2 {
        return None;
    }
    let tree = KdTree::new(positions);
    let mut d: Vec<f64> = crate::par::map_indexed(positions.len(), |i| {
        tree.knn(&positions[i], 1, Some(i))[0].1.sqrt()
    });
    crate::depth::percentile(&mut d, 50.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleMode {
    /// Log of the mean distance to the 3 nearest new points.
    Knn,
    /// Fixed isotropic standard deviation in scene units.
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MergeInit {
    pub scale_mode: ScaleMode,
    pub opacity: f64,
}

impl Default for MergeInit {
    fn default() -> Self {
        Self {
            scale_mode: ScaleMode::Knn,
            opacity: 0.1,
        }
    }
}

/// Scale used when the knn rule has no neighbors to measure.
pub const FALLBACK_SCALE: f64 = 0.01;
const KNN_SCALE_NEIGHBORS: usize = 3;

/// Appends one isotropic Gaussian per point after the existing ones.
pub fn merge_into_scene(scene: &GaussianScene, pc: &ColoredPointCloud, init: &MergeInit) -> Result<GaussianScene> {
    if !(init.opacity > 0.0 && init.opacity < 1.0) {
        return Err(Error::InvalidArgument(format!("opacity {} outside (0, 1)", init.opacity)));
    }
    let positions = pc.positions();
    let scales: Vec<f64> = match init.scale_mode {
        ScaleMode::Fixed(s) if s > 0.0 => vec![s; positions.len()],
        ScaleMode::Fixed(s) => return Err(Error::InvalidArgument(format!("fixed scale {s} must be positive"))),
        ScaleMode::Knn => {
            let tree = KdTree::new(&positions);
            crate::par::map_indexed(positions.len(), |i| {
                let nb = tree.knn(&positions[i], KNN_SCALE_NEIGHBORS, Some(i));
                let mean = nb.iter().map(|(_, d2)| d2.sqrt()).sum::<f64>() / nb.len().max(1) as f64;
                if mean > 0.0 {
                    mean
                } else {
                    FALLBACK_SCALE
                }
            })
        }
    };
    let deg = scene.sh_degree();
    let mut out = scene.clone();
    for (p, s) in pc.points.iter().zip(scales) {
        let mut sh = vec![[0.0; 3]; sh_coeff_count(deg)];
        sh[0] = rgb_to_sh_dc(p.rgb);
        out.push(Gaussian3D {
            position: p.xyz,
            rotation: [1.0, 0.0, 0.0, 0.0],
            log_scale: [s.ln(); 3],
            opacity_logit: logit(init.opacity),
            sh,
        });
    }
    Ok(out)
}
