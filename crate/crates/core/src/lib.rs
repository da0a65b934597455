//! Depth-guided inpainting of 3D Gaussian-splat scenes.
//!
//! The pipeline renders a reference-view depth map from the scene, completes
//! it inside a mask, lifts the completed depth and an inpainted reference
//! image into a colored point cloud, merges that cloud into the scene as new
//! Gaussians, and fine-tunes the result against the reference image.

pub mod camera;
pub mod depth;
pub mod error;
pub mod imaging;
pub mod mask;
pub mod metrics;
mod par;
pub mod pipeline;
pub mod ply;
pub mod pointcloud;
pub mod removal;
pub mod render;
pub mod scene;
pub mod synthetic;

pub use camera::{load_cameras, CameraFormat, CameraPose};
pub use error::{Error, Result, Stage};
pub use imaging::{ColorImage, DepthMap};
pub use mask::{dilate_mask, MaskImage};
pub use ply::{load_scene_ply, save_scene_ply};
pub use scene::{Gaussian3D, GaussianScene};
