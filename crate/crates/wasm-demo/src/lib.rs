//! Browser bindings for a small interactive demo: orbit a textured splat
//! plane, paint a mask over the render, dilate it, and fill the masked
//! depth by harmonic interpolation.
//!
//! Images cross the boundary as RGBA bytes, masks as one byte per pixel
//! (nonzero = masked).

use gsfill_core::camera::CameraPose;
use gsfill_core::depth::harmonic_complete;
use gsfill_core::render::{render_with, RenderOptions};
use gsfill_core::synthetic::textured_plane;
use gsfill_core::{dilate_mask, DepthMap, GaussianScene, MaskImage};
use wasm_bindgen::prelude::*;

#[wasm_bindgen]
pub struct Demo {
    scene: GaussianScene,
    size: usize,
    pose: CameraPose,
    mask: MaskImage,
}

fn js(e: String) -> JsError {
    JsError::new(&e)
}

fn orbit(size: usize, yaw: f64, pitch: f64) -> Result<CameraPose, String> {
    let f = 1.4 * size as f64;
    let c = (size as f64 - 1.0) / 2.0;
    let r = 3.2;
    let eye = [r * yaw.sin() * pitch.cos(), r * pitch.sin(), -r * yaw.cos() * pitch.cos()];
    CameraPose::look_at("demo", [f, f, c, c], (size, size), eye, [0.0; 3], [0.0, -1.0, 0.0]).map_err(|e| e.to_string())
}

fn gray_to_rgba(gray: &[u8]) -> Vec<u8> {
    gray.iter().flat_map(|&g| [g, g, g, 255]).collect()
}

fn depth_rgba(d: &DepthMap) -> Vec<u8> {
    gray_to_rgba(d.to_preview().as_raw())
}

#[wasm_bindgen]
impl Demo {
    /// Square viewport of `size` pixels showing a textured plane.
    #[wasm_bindgen(constructor)]
    pub fn new(size: usize) -> Result<Demo, JsError> {
        Demo::build(size).map_err(js)
    }

    #[wasm_bindgen(getter)]
    pub fn size(&self) -> usize {
        self.size
    }

    #[wasm_bindgen(getter)]
    pub fn splats(&self) -> usize {
        self.scene.len()
    }

    /// Moves the camera (angles in radians) and returns the color render.
    pub fn render(&mut self, yaw: f64, pitch: f64) -> Result<Vec<u8>, JsError> {
        self.pose = orbit(self.size, yaw, pitch).map_err(js)?;
        let out = render_with(&self.scene, &self.pose, &RenderOptions::default());
        Ok(out.color.to_rgb8().pixels().flat_map(|p| [p[0], p[1], p[2], 255]).collect())
    }

    /// Replaces the mask; returns the number of masked pixels.
    pub fn set_mask(&mut self, mask: &[u8]) -> Result<usize, JsError> {
        self.replace_mask(mask).map_err(js)
    }

    /// Square dilation of the current mask, one byte per pixel.
    pub fn dilate(&mut self, radius: usize) -> Vec<u8> {
        self.mask = dilate_mask(&self.mask, radius);
        self.mask.bits.iter().map(|&b| u8::from(b)).collect()
    }

    /// Rendered depth with the masked pixels cleared, as RGBA.
    pub fn holed_depth(&self) -> Vec<u8> {
        depth_rgba(&self.holed())
    }

    /// Rendered depth with the masked pixels filled harmonically, as RGBA.
    pub fn filled_depth(&self) -> Result<Vec<u8>, JsError> {
        self.filled().map(|d| depth_rgba(&d)).map_err(js)
    }
}

impl Demo {
    fn build(size: usize) -> Result<Demo, String> {
        if !(8..=512).contains(&size) {
            return Err("size must lie in 8..=512".into());
        }
        Ok(Demo {
            scene: textured_plane(1.2, 0.04, 0.0, 0),
            size,
            pose: orbit(size, 0.0, 0.0)?,
            mask: MaskImage::new(size, size),
        })
    }

    fn replace_mask(&mut self, mask: &[u8]) -> Result<usize, String> {
        if mask.len() != self.size * self.size {
            return Err("mask must hold one byte per pixel".into());
        }
        for (b, &m) in self.mask.bits.iter_mut().zip(mask) {
            *b = m != 0;
        }
        Ok(self.mask.count())
    }

    fn filled(&self) -> Result<DepthMap, String> {
        harmonic_complete(&self.holed(), &self.mask).map_err(|e| e.to_string())
    }

    fn holed(&self) -> DepthMap {
        let opts = RenderOptions {
            normalize_depth: true,
            ..RenderOptions::default()
        };
        let mut d = render_with(&self.scene, &self.pose, &opts).depth;
        for (i, &m) in self.mask.bits.iter().enumerate() {
            if m {
                d.valid[i] = false;
                d.depth[i] = 0.0;
            }
        }
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paint_dilate_fill() {
        let mut demo = Demo::build(48).unwrap();
        let rgba = demo.render(0.3, 0.1).unwrap();
        assert_eq!(rgba.len(), 48 * 48 * 4);
        let mut mask = vec![0u8; 48 * 48];
        mask[24 * 48 + 24] = 1;
        assert_eq!(demo.replace_mask(&mask).unwrap(), 1);
        assert!(demo.replace_mask(&mask[1..]).is_err());
        let dilated = demo.dilate(3);
        assert_eq!(dilated.iter().filter(|&&b| b == 1).count(), 49);
        let holed = demo.holed_depth();
        let filled = demo.filled().unwrap();
        let center = (24 * 48 + 24) * 4;
        assert_eq!(holed[center], 0);
        assert!(filled.valid[24 * 48 + 24]);
        // the fill of a plane stays between its neighbors
        let (l, r) = (filled.depth[24 * 48 + 20], filled.depth[24 * 48 + 28]);
        let mid = filled.depth[24 * 48 + 24];
        assert!(mid >= l.min(r) - 1e-9 && mid <= l.max(r) + 1e-9);
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(Demo::build(4).is_err());
    }
}
