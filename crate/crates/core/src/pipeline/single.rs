//! Single-reference inpainting: render depth, complete it, lift it to a
//! point cloud, merge, fine-tune.

use std::time::Instant;

use serde::Serialize;

use crate::camera::CameraPose;
use crate::depth::{complete_depth, CompletionBackend};
use crate::error::{Error, Result, Stage};
use crate::imaging::{ColorImage, DepthMap};
use crate::mask::{dilate_mask, MaskImage};
use crate::pointcloud::{
    edge_outliers, median_nn_distance, merge_into_scene, radius_outliers, unproject, ColoredPointCloud,
};
use crate::render::{render_with, RenderOptions};
use crate::scene::GaussianScene;

use super::config::InpaintConfig;
use super::finetune::{finetune, FinetuneOptions};

/// A reference view with its mask and already-inpainted color image.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceView {
    pub pose: CameraPose,
    pub mask: MaskImage,
    pub image: ColorImage,
}

impl ReferenceView {
    pub fn validate(&self) -> Result<()> {
        let (w, h) = (self.pose.width, self.pose.height);
        if !self.mask.same_size(w, h) || !self.image.same_size(w, h) {
            return Err(Error::InvalidArgument(format!(
                "mask {}x{} and image {}x{} must match view `{}` ({w}x{h})",
                self.mask.width, self.mask.height, self.image.width, self.image.height, self.pose.name
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct InpaintReport {
    pub noop: bool,
    pub timings: Vec<StageTiming>,
    pub masked_pixels: usize,
    pub new_points: usize,
    pub dropped_new_points: usize,
    pub removed_original: usize,
    pub gaussians_before: usize,
    pub gaussians_after: usize,
    pub finetune_losses: Vec<f64>,
}

impl InpaintReport {
    fn time<T>(&mut self, stage: Stage, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f().map_err(Error::at(stage))?;
        self.timings.push(StageTiming {
            stage: stage.to_string(),
            seconds: start.elapsed().as_secs_f64(),
        });
        Ok(out)
    }

    pub fn initial_loss(&self) -> Option<f64> {
        self.finetune_losses.first().copied()
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.finetune_losses.last().copied()
    }
}

/// Intermediate products of one step.
#[derive(Debug, Clone, Default)]
pub struct StepArtifacts {
    pub mask: Option<MaskImage>,
    pub rendered_depth: Option<DepthMap>,
    pub completed_depth: Option<DepthMap>,
    pub cloud: ColoredPointCloud,
}

pub fn render_options(cfg: &InpaintConfig) -> RenderOptions {
    RenderOptions {
        normalize_depth: cfg.normalize_depth,
        ..RenderOptions::default()
    }
}

pub fn inpaint_single_view(
    scene: &GaussianScene,
    reference: &ReferenceView,
    cfg: &InpaintConfig,
    backend: &mut CompletionBackend,
) -> Result<(GaussianScene, InpaintReport)> {
    inpaint_with_artifacts(scene, reference, cfg, backend, 0).map(|(s, r, _)| (s, r))
}

pub(crate) fn inpaint_with_artifacts(
    scene: &GaussianScene,
    reference: &ReferenceView,
    cfg: &InpaintConfig,
    backend: &mut CompletionBackend,
    view_id: usize,
) -> Result<(GaussianScene, InpaintReport, StepArtifacts)> {
    cfg.validate()?;
    reference.validate()?;
    let mut report = InpaintReport {
        gaussians_before: scene.len(),
        ..Default::default()
    };
    let mut artifacts = StepArtifacts::default();
    if reference.mask.is_empty() {
        report.noop = true;
        report.gaussians_after = scene.len();
        return Ok((scene.clone(), report, artifacts));
    }
    let pose = &reference.pose;
    let mask = dilate_mask(&reference.mask, cfg.dilation_radius);
    report.masked_pixels = mask.count();
    let opts = render_options(cfg);

    let depth = report.time(Stage::RenderDepth, || Ok(render_with(scene, pose, &opts).depth))?;
    let completed = report.time(Stage::CompleteDepth, || {
        complete_depth(&depth, &reference.image, &mask, backend)
    })?;
    let cloud = report.time(Stage::Unproject, || unproject(&completed, &reference.image, &mask, pose, view_id))?;

    let lifted = cloud.len();
    let (cloud, pruned_scene) = report.time(Stage::OutlierRemoval, || Ok(filter_outliers(scene, cloud, cfg)))?;
    report.new_points = cloud.len();
    report.dropped_new_points = lifted - cloud.len();
    report.removed_original = scene.len() - pruned_scene.len();
    if cloud.is_empty() {
        return Err(Error::at(Stage::OutlierRemoval)(Error::EmptyResult(
            "outlier removal discarded every new point".into(),
        )));
    }
    let originals = pruned_scene.len();
    let merged = report.time(Stage::Merge, || merge_into_scene(&pruned_scene, &cloud, &cfg.merge))?;

    let ft_opts = FinetuneOptions {
        iterations: cfg.finetune_iters,
        lambda: cfg.lambda,
        learning_rates: cfg.learning_rates,
        frozen_prefix: if cfg.freeze_original { originals } else { 0 },
        render: opts,
    };
    let tuned = report.time(Stage::Finetune, || finetune(&merged, &reference.image, pose, &ft_opts))?;
    report.finetune_losses = tuned.losses;
    report.gaussians_after = tuned.scene.len();
    artifacts.mask = Some(mask);
    artifacts.rendered_depth = Some(depth);
    artifacts.completed_depth = Some(completed);
    artifacts.cloud = cloud;
    Ok((tuned.scene, report, artifacts))
}

/// Drops radius outliers from the new cloud and edge outliers (original
/// Gaussians near the new cloud that are isolated among the originals)
/// from the scene.
fn filter_outliers(
    scene: &GaussianScene,
    cloud: ColoredPointCloud,
    cfg: &InpaintConfig,
) -> (ColoredPointCloud, GaussianScene) {
    let oc = &cfg.outliers;
    let positions = cloud.positions();
    let spacing = median_nn_distance(&positions);
    let (Some(spacing), true) = (spacing, oc.enabled) else {
        return (cloud, scene.clone());
    };
    let radius = oc.radius.unwrap_or(oc.spacing_multiple * spacing);
    let threshold = oc.dist_threshold.unwrap_or(oc.spacing_multiple * spacing);
    if !(radius > 0.0) {
        return (cloud, scene.clone());
    }
    let new_outlier = radius_outliers(&positions, radius, oc.min_neighbors);
    let kept = ColoredPointCloud {
        points: cloud
            .points
            .iter()
            .zip(&new_outlier)
            .filter(|(_, &o)| !o)
            .map(|(p, _)| *p)
            .collect(),
    };
    let mut pruned = scene.clone();
    if !scene.is_empty() && !kept.is_empty() {
        let originals: Vec<[f64; 3]> = scene.gaussians().iter().map(|g| g.position).collect();
        let flagged = edge_outliers(&kept.positions(), &originals, threshold, radius, oc.min_neighbors);
        pruned.retain_indexed(|i| !flagged[i]);
    }
    (kept, pruned)
}
