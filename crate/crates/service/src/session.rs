//! Session state and the synchronous operations behind each endpoint.

use std::path::Path;
use std::sync::RwLock;

use gsfill_core::camera::load_cameras_auto;
use gsfill_core::pipeline::{render_options, InpaintConfig, InpaintSession, ReferenceView, StepRecord};
use gsfill_core::render::{render_with, RenderOutput};
use gsfill_core::{dilate_mask, load_scene_ply, CameraPose, ColorImage, Error, GaussianScene, MaskImage};
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Hex SHA-256 of the scene's PLY encoding.
pub fn state_hash(scene: &GaussianScene) -> String {
    hex::encode(Sha256::digest(gsfill_core::ply::scene_to_ply_bytes(scene)))
}

/// An uploaded mask or reference image, bound to the view it was drawn for.
#[derive(Debug, Clone)]
pub struct Upload<T> {
    pub view: usize,
    pub value: T,
}

#[derive(Debug, Clone)]
pub struct SessionData {
    pub history: InpaintSession,
    pub masks: Vec<Upload<MaskImage>>,
    pub images: Vec<Upload<ColorImage>>,
}

pub struct Session {
    pub cameras: Vec<CameraPose>,
    pub cfg: InpaintConfig,
    /// Serializes mutating requests; reads only take `data` briefly.
    pub mutation: tokio::sync::Mutex<()>,
    pub data: RwLock<SessionData>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ViewInfo {
    pub index: usize,
    pub name: String,
    pub width: usize,
    pub height: usize,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    /// PNG data URI of a small color render of the current state.
    pub thumbnail: String,
}

pub const THUMBNAIL_SIDE: usize = 64;

impl Session {
    pub fn open(scene: &Path, cameras: &Path, cfg: InpaintConfig) -> gsfill_core::Result<Self> {
        let scene = load_scene_ply(scene)?;
        let cameras = load_cameras_auto(cameras)?;
        if cameras.is_empty() {
            return Err(Error::InvalidArgument("camera file lists no views".into()));
        }
        Ok(Self::new(scene, cameras, cfg))
    }

    pub fn new(scene: GaussianScene, cameras: Vec<CameraPose>, cfg: InpaintConfig) -> Self {
        Self {
            cameras,
            cfg,
            mutation: tokio::sync::Mutex::new(()),
            data: RwLock::new(SessionData {
                history: InpaintSession::new(scene),
                masks: Vec::new(),
                images: Vec::new(),
            }),
        }
    }

    pub fn read(&self) -> std::sync::RwLockReadGuard<'_, SessionData> {
        self.data.read().unwrap_or_else(|e| e.into_inner())
    }

    pub fn write(&self) -> std::sync::RwLockWriteGuard<'_, SessionData> {
        self.data.write().unwrap_or_else(|e| e.into_inner())
    }

    /// Resolves a view by name, falling back to its index.
    pub fn view_index(&self, view: &str) -> Option<usize> {
        self.cameras
            .iter()
            .position(|c| c.name == view)
            .or_else(|| view.parse::<usize>().ok().filter(|&i| i < self.cameras.len()))
    }

    /// Snapshot of history state `state`, or the current one.
    pub fn scene(&self, state: Option<usize>) -> Option<GaussianScene> {
        let data = self.read();
        let states = data.history.states();
        states.get(state.unwrap_or(states.len() - 1)).cloned()
    }

    pub fn current_hash(&self) -> String {
        state_hash(self.read().history.current())
    }

    pub fn render(&self, scene: &GaussianScene, view: usize) -> RenderOutput {
        render_with(scene, &self.cameras[view], &render_options(&self.cfg))
    }

    pub fn views(&self) -> Vec<ViewInfo> {
        let scene = self.scene(None).expect("history is never empty");
        self.cameras
            .iter()
            .enumerate()
            .map(|(index, c)| {
                let png = thumbnail_pose(c)
                    .map(|p| render_with(&scene, &p, &render_options(&self.cfg)).color.encode_png())
                    .unwrap_or_default();
                ViewInfo {
                    index,
                    name: c.name.clone(),
                    width: c.width,
                    height: c.height,
                    fx: c.fx,
                    fy: c.fy,
                    cx: c.cx,
                    cy: c.cy,
                    thumbnail: format!("data:image/png;base64,{}", base64_encode(&png)),
                }
            })
            .collect()
    }

    /// Thresholds and stores a mask; returns its id and the pixel count
    /// after the configured dilation the step will apply.
    pub fn add_mask(&self, view: usize, png: &[u8]) -> gsfill_core::Result<(usize, usize, usize)> {
        let mask = MaskImage::decode_png(png)?;
        let c = &self.cameras[view];
        if !mask.same_size(c.width, c.height) {
            return Err(Error::InvalidArgument(format!(
                "mask is {}x{}, view `{}` is {}x{}",
                mask.width, mask.height, c.name, c.width, c.height
            )));
        }
        let dilated = dilate_mask(&mask, self.cfg.dilation_radius).count();
        let count = mask.count();
        let mut data = self.write();
        data.masks.push(Upload { view, value: mask });
        Ok((data.masks.len() - 1, count, dilated))
    }

    pub fn add_image(&self, view: usize, png: &[u8]) -> gsfill_core::Result<usize> {
        let image = ColorImage::decode_png(png)?;
        let c = &self.cameras[view];
        if !image.same_size(c.width, c.height) {
            return Err(Error::InvalidArgument(format!(
                "image is {}x{}, view `{}` is {}x{}",
                image.width, image.height, c.name, c.width, c.height
            )));
        }
        let mut data = self.write();
        data.images.push(Upload { view, value: image });
        Ok(data.images.len() - 1)
    }

    /// Reference view assembled from uploads, checked against `view`.
    pub fn reference(&self, view: usize, mask: usize, image: usize) -> gsfill_core::Result<ReferenceView> {
        let data = self.read();
        let m = data
            .masks
            .get(mask)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown mask id {mask}")))?;
        let i = data
            .images
            .get(image)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown image id {image}")))?;
        if m.view != view || i.view != view {
            return Err(Error::InvalidArgument(format!(
                "mask and image must both belong to view {view}"
            )));
        }
        Ok(ReferenceView {
            pose: self.cameras[view].clone(),
            mask: m.value.clone(),
            image: i.value.clone(),
        })
    }

    /// Runs one progressive step on a copy of the history and commits it.
    /// Callers hold `mutation`.
    pub fn step(&self, reference: &ReferenceView, cfg: &InpaintConfig) -> gsfill_core::Result<(usize, StepRecord)> {
        let mut history = self.read().history.clone();
        let mut backend = cfg.build_backend()?;
        let record = history.step(reference, cfg, &mut backend)?.clone();
        let index = history.steps().len();
        self.write().history = history;
        Ok((index, record))
    }

    pub fn undo(&self) -> bool {
        self.write().history.undo()
    }
}

/// The view scaled so its longest side is [`THUMBNAIL_SIDE`].
fn thumbnail_pose(c: &CameraPose) -> Option<CameraPose> {
    let s = (THUMBNAIL_SIDE as f64 / c.width.max(c.height) as f64).min(1.0);
    let w = ((c.width as f64 * s).round() as usize).max(1);
    let h = ((c.height as f64 * s).round() as usize).max(1);
    let (sx, sy) = (w as f64 / c.width as f64, h as f64 / c.height as f64);
    CameraPose::new(
        c.name.clone(),
        [c.fx * sx, c.fy * sy, c.cx * sx, c.cy * sy],
        (w, h),
        c.rotation,
        c.translation,
    )
    .ok()
}

fn base64_encode(bytes: &[u8]) -> String {
    use base64::Engine;
    base64::engine::general_purpose::STANDARD.encode(bytes)
}
