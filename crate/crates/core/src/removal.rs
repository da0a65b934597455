//! Mask-guided removal of Gaussians.
//!
//! Each view votes on every Gaussian whose projected center lands inside its
//! image (and in front of the near plane): the vote is "remove" when the mask
//! is set at the nearest pixel. A Gaussian is dropped when the fraction of
//! remove votes among the views that see it reaches the threshold. Gaussians
//! seen by no view are kept. This is a heuristic association between 2D masks
//! and 3D Gaussians, not a segmentation.

use crate::camera::CameraPose;
use crate::error::{Error, Result};
use crate::mask::MaskImage;
use crate::par;
use crate::scene::GaussianScene;

pub const DEFAULT_VOTE_THRESHOLD: f64 = 0.8;

/// Per-Gaussian `(remove votes, views seeing it)`.
pub fn mask_votes(scene: &GaussianScene, views: &[(CameraPose, MaskImage)]) -> Vec<(usize, usize)> {
    par::map_indexed(scene.len(), |i| {
        let p = scene.gaussians()[i].position;
        let mut hits = 0;
        let mut seen = 0;
        for (pose, mask) in views {
            let Some([u, v, _]) = pose.project(p) else {
                continue;
            };
            let Some((x, y)) = pose.pixel_of(u, v) else {
                continue;
            };
            seen += 1;
            if mask.get(x, y) {
                hits += 1;
            }
        }
        (hits, seen)
    })
}

pub fn remove_masked_gaussians(
    scene: &GaussianScene,
    views: &[(CameraPose, MaskImage)],
    vote_threshold: f64,
) -> Result<(GaussianScene, usize)> {
    if views.is_empty() {
        return Err(Error::InvalidArgument("no views supplied for removal".into()));
    }
    for (pose, mask) in views {
        if !mask.same_size(pose.width, pose.height) {
            return Err(Error::InvalidArgument(format!(
                "mask for view `{}` is {}x{}, expected {}x{}",
                pose.name, mask.width, mask.height, pose.width, pose.height
            )));
        }
    }
    let votes = mask_votes(scene, views);
    let remove: Vec<bool> = votes
        .iter()
        .map(|&(hits, seen)| seen > 0 && hits as f64 >= vote_threshold * seen as f64)
        .collect();
    let removed = remove.iter().filter(|&&r| r).count();
    let mut out = scene.clone();
    out.retain_indexed(|i| !remove[i]);
    Ok((out, removed))
}
