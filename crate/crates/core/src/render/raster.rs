//! Tile-binned front-to-back compositing of color, depth and opacity.
//!
//! Splats are sorted once by camera-space depth; each tile keeps the sorted
//! subsequence whose cutoff box overlaps it. Pixel centers sit at integer
//! coordinates.

use super::project::{project_indexed, Splat2D, ALPHA_MIN};
use crate::camera::CameraPose;
use crate::imaging::{ColorImage, DepthMap};
use crate::par;
use crate::scene::GaussianScene;

pub const TILE_SIZE: usize = 16;
/// Per-splat opacity ceiling.
pub const ALPHA_MAX: f64 = 0.99;
/// Compositing stops once transmittance drops below this.
pub const TRANSMITTANCE_MIN: f64 = 1e-4;
/// Accumulated opacity above which a depth pixel counts as valid.
pub const VALID_ALPHA: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderOptions {
    pub background: [f64; 3],
    /// Divide composited depth by accumulated opacity.
    pub normalize_depth: bool,
    pub valid_alpha: f64,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self {
            background: [0.0; 3],
            normalize_depth: false,
            valid_alpha: VALID_ALPHA,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderOutput {
    pub color: ColorImage,
    pub depth: DepthMap,
    /// Accumulated opacity `1 - Π(1 - α)` per pixel.
    pub alpha_acc: Vec<f64>,
}

impl RenderOutput {
    pub fn width(&self) -> usize {
        self.color.width
    }

    pub fn height(&self) -> usize {
        self.color.height
    }

    /// Accumulated opacity as an 8-bit grayscale image.
    pub fn alpha_preview(&self) -> image::GrayImage {
        let bytes = self.alpha_acc.iter().map(|&a| crate::imaging::quantize(a)).collect();
        image::GrayImage::from_raw(self.width() as u32, self.height() as u32, bytes)
            .expect("buffer matches dimensions")
    }

    /// [`Self::alpha_preview`] encoded as PNG.
    pub fn alpha_png(&self) -> Vec<u8> {
        crate::imaging::encode_png(&image::DynamicImage::ImageLuma8(self.alpha_preview()))
    }
}

/// One splat's share of a pixel, recorded front to back.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Contribution {
    /// Position of the splat in [`Frame::splats`].
    pub slot: usize,
    /// Position within the candidate list passed to [`Frame::composite`].
    pub local: usize,
    pub alpha: f64,
    /// Unclamped Gaussian falloff.
    pub falloff: f64,
    /// Transmittance in front of this splat.
    pub transmittance: f64,
    pub clamped: bool,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct PixelSample {
    pub color: [f64; 3],
    pub depth: f64,
    pub transmittance: f64,
}

/// Projected, depth-sorted splats with per-tile candidate lists.
pub(crate) struct Frame {
    pub width: usize,
    pub height: usize,
    pub splats: Vec<Splat2D>,
    pub tiles_x: usize,
    pub tiles: Vec<Vec<u32>>,
}

/// Projects every Gaussian and sorts survivors by `(view_z, index)`.
pub fn project_scene(scene: &GaussianScene, pose: &CameraPose) -> Vec<Splat2D> {
    let mut splats: Vec<Splat2D> = par::map_indexed(scene.len(), |i| {
        project_indexed(i, &scene.gaussians()[i], pose)
    })
    .into_iter()
    .flatten()
    .collect();
    splats.sort_by(|a, b| a.view_z.total_cmp(&b.view_z).then(a.index.cmp(&b.index)));
    splats
}

impl Frame {
    pub fn build(scene: &GaussianScene, pose: &CameraPose) -> Self {
        let splats = project_scene(scene, pose);
        let tiles_x = pose.width.div_ceil(TILE_SIZE);
        let tiles_y = pose.height.div_ceil(TILE_SIZE);
        let mut tiles = vec![Vec::new(); tiles_x * tiles_y];
        for (slot, s) in splats.iter().enumerate() {
            if s.base_alpha <= ALPHA_MIN {
                continue;
            }
            let [x0, y0, x1, y1] = s.bbox();
            let Some((tx0, tx1)) = tile_span(x0, x1, pose.width, tiles_x) else {
                continue;
            };
            let Some((ty0, ty1)) = tile_span(y0, y1, pose.height, tiles_y) else {
                continue;
            };
            for ty in ty0..=ty1 {
                for tx in tx0..=tx1 {
                    tiles[ty * tiles_x + tx].push(slot as u32);
                }
            }
        }
        Self {
            width: pose.width,
            height: pose.height,
            splats,
            tiles_x,
            tiles,
        }
    }

    /// Pixel rectangle `(x0, y0, x1, y1)` (exclusive end) of a tile.
    pub fn tile_rect(&self, tile: usize) -> (usize, usize, usize, usize) {
        let (tx, ty) = (tile % self.tiles_x, tile / self.tiles_x);
        let x0 = tx * TILE_SIZE;
        let y0 = ty * TILE_SIZE;
        (
            x0,
            y0,
            (x0 + TILE_SIZE).min(self.width),
            (y0 + TILE_SIZE).min(self.height),
        )
    }

    /// Composites one pixel, reporting each contributing splat to `visit`.
    #[inline]
    pub fn composite(
        &self,
        x: usize,
        y: usize,
        candidates: &[u32],
        background: [f64; 3],
        mut visit: impl FnMut(Contribution),
    ) -> PixelSample {
        let (px, py) = (x as f64, y as f64);
        let mut color = [0.0; 3];
        let mut depth = 0.0;
        let mut t = 1.0;
        for (local, &slot) in candidates.iter().enumerate() {
            let s = &self.splats[slot as usize];
            let q = s.mahalanobis2(px, py);
            if q > s.q_max {
                continue;
            }
            let g = (-0.5 * q).exp();
            let raw = s.base_alpha * g;
            if raw < ALPHA_MIN {
                continue;
            }
            let clamped = raw > ALPHA_MAX;
            let alpha = if clamped { ALPHA_MAX } else { raw };
            let w = alpha * t;
            for c in 0..3 {
                color[c] += s.color[c] * w;
            }
            depth += s.view_z * w;
            visit(Contribution {
                slot: slot as usize,
                local,
                alpha,
                falloff: g,
                transmittance: t,
                clamped,
            });
            t *= 1.0 - alpha;
            if t < TRANSMITTANCE_MIN {
                break;
            }
        }
        for c in 0..3 {
            color[c] += t * background[c];
        }
        PixelSample {
            color,
            depth,
            transmittance: t,
        }
    }
}

fn tile_span(lo: f64, hi: f64, size: usize, tiles: usize) -> Option<(usize, usize)> {
    if hi < 0.0 || lo > (size - 1) as f64 {
        return None;
    }
    let first = (lo.max(0.0).ceil() as usize).min(size - 1) / TILE_SIZE;
    let last = (hi.min((size - 1) as f64).floor() as usize) / TILE_SIZE;
    if last < first {
        return None;
    }
    Some((first, last.min(tiles - 1)))
}

pub fn render(scene: &GaussianScene, pose: &CameraPose) -> RenderOutput {
    render_with(scene, pose, &RenderOptions::default())
}

pub fn render_with(scene: &GaussianScene, pose: &CameraPose, opts: &RenderOptions) -> RenderOutput {
    let frame = Frame::build(scene, pose);
    let (w, h) = (pose.width, pose.height);
    let tile_pixels = par::map_indexed(frame.tiles.len(), |tile| {
        let (x0, y0, x1, y1) = frame.tile_rect(tile);
        let mut out = Vec::with_capacity((x1 - x0) * (y1 - y0));
        for y in y0..y1 {
            for x in x0..x1 {
                out.push(frame.composite(x, y, &frame.tiles[tile], opts.background, |_| {}));
            }
        }
        out
    });

    let mut color = ColorImage::new(w, h);
    let mut depth = DepthMap::invalid(w, h);
    let mut alpha_acc = vec![0.0; w * h];
    for (tile, pixels) in tile_pixels.into_iter().enumerate() {
        let (x0, y0, x1, _) = frame.tile_rect(tile);
        for (k, px) in pixels.into_iter().enumerate() {
            let x = x0 + k % (x1 - x0);
            let y = y0 + k / (x1 - x0);
            let i = y * w + x;
            color.set(x, y, px.color);
            let a = 1.0 - px.transmittance;
            alpha_acc[i] = a;
            if a > opts.valid_alpha {
                depth.valid[i] = true;
                depth.depth[i] = if opts.normalize_depth { px.depth / a } else { px.depth };
            }
        }
    }
    RenderOutput {
        color,
        depth,
        alpha_acc,
    }
}
