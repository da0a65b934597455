//! Pinhole cameras and their COLMAP / JSON loaders.
//!
//! Pixel `(u, v)` addresses the pixel center: projection returns
//! `u = fx * x / z + cx` with no half-pixel offset, and unprojection inverts it
//! exactly. COLMAP principal points are taken as-is.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use nalgebra::{Matrix3, Matrix4, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::quat_to_matrix;

/// Points with camera-space depth at or below this are behind the camera.
pub const ZNEAR: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct CameraPose {
    pub name: String,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    /// Rotation block of the world-to-camera transform.
    pub rotation: Matrix3<f64>,
    /// Translation of the world-to-camera transform.
    pub translation: Vector3<f64>,
}

impl CameraPose {
    pub fn new(
        name: impl Into<String>,
        intrinsics: [f64; 4],
        size: (usize, usize),
        rotation: Matrix3<f64>,
        translation: Vector3<f64>,
    ) -> Result<Self> {
        let [fx, fy, cx, cy] = intrinsics;
        let pose = Self {
            name: name.into(),
            fx,
            fy,
            cx,
            cy,
            width: size.0,
            height: size.1,
            rotation,
            translation,
        };
        pose.validate()?;
        Ok(pose)
    }

    /// Camera at `eye` looking at `target`, with image-down along `-up`.
    pub fn look_at(
        name: impl Into<String>,
        intrinsics: [f64; 4],
        size: (usize, usize),
        eye: [f64; 3],
        target: [f64; 3],
        up: [f64; 3],
    ) -> Result<Self> {
        let eye = Vector3::from(eye);
        let forward = (Vector3::from(target) - eye).normalize();
        let right = forward.cross(&Vector3::from(up)).normalize();
        // image y grows downward
        let down = forward.cross(&right);
        let rotation = Matrix3::from_rows(&[
            right.transpose(),
            down.transpose(),
            forward.transpose(),
        ]);
        let translation = -(rotation * eye);
        Self::new(name, intrinsics, size, rotation, translation)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "camera `{}`: focal lengths must be positive",
                self.name
            )));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidArgument(format!(
                "camera `{}`: empty image size",
                self.name
            )));
        }
        if !(0.0..self.width as f64).contains(&self.cx) || !(0.0..self.height as f64).contains(&self.cy)
        {
            return Err(Error::InvalidArgument(format!(
                "camera `{}`: principal point outside image",
                self.name
            )));
        }
        let err = (self.rotation.transpose() * self.rotation - Matrix3::identity()).abs().max();
        if err > 1e-6 || (self.rotation.determinant() - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidArgument(format!(
                "camera `{}`: rotation is not orthonormal",
                self.name
            )));
        }
        Ok(())
    }

    pub fn world_to_camera(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    pub fn to_camera(&self, p: [f64; 3]) -> Vector3<f64> {
        self.rotation * Vector3::from(p) + self.translation
    }

    pub fn to_world(&self, p_cam: Vector3<f64>) -> [f64; 3] {
        (self.rotation.transpose() * (p_cam - self.translation)).into()
    }

    pub fn center(&self) -> [f64; 3] {
        (-(self.rotation.transpose() * self.translation)).into()
    }

    /// Projects a world point to `(u, v, z)`; `None` when `z <= ZNEAR`.
    pub fn project(&self, p: [f64; 3]) -> Option<[f64; 3]> {
        let c = self.to_camera(p);
        if c.z <= ZNEAR {
            return None;
        }
        Some([
            self.fx * c.x / c.z + self.cx,
            self.fy * c.y / c.z + self.cy,
            c.z,
        ])
    }

    /// Lifts pixel `(u, v)` with camera-space depth `z` to world space.
    pub fn unproject(&self, u: f64, v: f64, z: f64) -> [f64; 3] {
        let ray = Vector3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0);
        self.to_world(ray * z)
    }

    /// Nearest pixel index for a projected point inside the image.
    pub fn pixel_of(&self, u: f64, v: f64) -> Option<(usize, usize)> {
        let (ui, vi) = (u.round(), v.round());
        if ui < 0.0 || vi < 0.0 || ui >= self.width as f64 || vi >= self.height as f64 {
            return None;
        }
        Some((ui as usize, vi as usize))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CameraFormat {
    /// Directory holding COLMAP `cameras.txt` and `images.txt`.
    ColmapText,
    /// JSON array of [`JsonCamera`] records.
    Json,
}

/// One record of the JSON camera sidecar.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JsonCamera {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    /// World-to-camera rotation as `(w, x, y, z)`.
    pub qvec: [f64; 4],
    pub tvec: [f64; 3],
}

impl JsonCamera {
    pub fn from_pose(pose: &CameraPose) -> Self {
        let q = nalgebra::UnitQuaternion::from_matrix(&pose.rotation);
        Self {
            name: Some(pose.name.clone()),
            fx: pose.fx,
            fy: pose.fy,
            cx: pose.cx,
            cy: pose.cy,
            width: pose.width,
            height: pose.height,
            qvec: [q.w, q.i, q.j, q.k],
            tvec: pose.translation.into(),
        }
    }

    fn into_pose(self, index: usize) -> Result<CameraPose> {
        let name = self.name.unwrap_or_else(|| index.to_string());
        CameraPose::new(
            name,
            [self.fx, self.fy, self.cx, self.cy],
            (self.width, self.height),
            quat_to_matrix(self.qvec),
            Vector3::from(self.tvec),
        )
    }
}

pub fn load_cameras(path: &Path, format: CameraFormat) -> Result<Vec<CameraPose>> {
    match format {
        CameraFormat::Json => parse_json_cameras(&fs::read_to_string(path)?),
        CameraFormat::ColmapText => {
            let cameras = fs::read_to_string(path.join("cameras.txt"))?;
            let images = fs::read_to_string(path.join("images.txt"))?;
            parse_colmap_text(&cameras, &images)
        }
    }
}

/// Picks the format from the path: directories are COLMAP, files JSON.
pub fn load_cameras_auto(path: &Path) -> Result<Vec<CameraPose>> {
    let format = if path.is_dir() {
        CameraFormat::ColmapText
    } else {
        CameraFormat::Json
    };
    load_cameras(path, format)
}

pub fn parse_json_cameras(text: &str) -> Result<Vec<CameraPose>> {
    let records: Vec<JsonCamera> = serde_json::from_str(text).map_err(|e| Error::Parse {
        offset: json_offset(text, e.line(), e.column()),
        message: e.to_string(),
    })?;
    records
        .into_iter()
        .enumerate()
        .map(|(i, r)| r.into_pose(i))
        .collect()
}

pub fn cameras_to_json(poses: &[CameraPose]) -> String {
    let records: Vec<JsonCamera> = poses.iter().map(JsonCamera::from_pose).collect();
    serde_json::to_string_pretty(&records).expect("camera records serialize")
}

fn json_offset(text: &str, line: usize, column: usize) -> usize {
    text.split_inclusive('\n')
        .take(line.saturating_sub(1))
        .map(str::len)
        .sum::<usize>()
        + column.saturating_sub(1)
}

struct Intrinsics {
    width: usize,
    height: usize,
    params: [f64; 4],
}

/// Parses COLMAP `cameras.txt` and `images.txt` contents.
pub fn parse_colmap_text(cameras_txt: &str, images_txt: &str) -> Result<Vec<CameraPose>> {
    let mut intrinsics = HashMap::new();
    let mut offset = 0;
    for line in cameras_txt.split_inclusive('\n') {
        let start = offset;
        offset += line.len();
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() < 4 {
            return Err(Error::Parse {
                offset: start,
                message: "camera line needs id, model, width, height".into(),
            });
        }
        let id: u32 = parse_field(fields[0], start)?;
        let width: usize = parse_field(fields[2], start)?;
        let height: usize = parse_field(fields[3], start)?;
        let nums = fields[4..]
            .iter()
            .map(|s| parse_field::<f64>(s, start))
            .collect::<Result<Vec<_>>>()?;
        let params = match (fields[1], nums.as_slice()) {
            ("PINHOLE", [fx, fy, cx, cy, ..]) => [*fx, *fy, *cx, *cy],
            ("SIMPLE_PINHOLE", [f, cx, cy, ..]) => [*f, *f, *cx, *cy],
            ("PINHOLE" | "SIMPLE_PINHOLE", _) => {
                return Err(Error::Parse {
                    offset: start,
                    message: format!("too few parameters for {}", fields[1]),
                })
            }
            (model, _) => return Err(Error::UnsupportedModel(model.to_string())),
        };
        intrinsics.insert(
            id,
            Intrinsics {
                width,
                height,
                params,
            },
        );
    }

    let mut records = Vec::new();
    let mut offset = 0;
    let mut expect_points = false;
    for line in images_txt.split_inclusive('\n') {
        let start = offset;
        offset += line.len();
        let trimmed = line.trim();
        if trimmed.starts_with('#') {
            continue;
        }
        if expect_points {
            // 2D keypoint line, possibly empty
            expect_points = false;
            continue;
        }
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() < 10 {
            return Err(Error::Parse {
                offset: start,
                message: "image line needs 10 fields".into(),
            });
        }
        let image_id: u32 = parse_field(fields[0], start)?;
        let mut q = [0.0; 4];
        let mut t = [0.0; 3];
        for i in 0..4 {
            q[i] = parse_field(fields[1 + i], start)?;
        }
        for i in 0..3 {
            t[i] = parse_field(fields[5 + i], start)?;
        }
        let camera_id: u32 = parse_field(fields[8], start)?;
        let name = fields[9..].join(" ");
        records.push((image_id, q, t, camera_id, name));
        expect_points = true;
    }

    records.sort_by_key(|r| r.0);
    let mut seen = std::collections::HashSet::new();
    records
        .into_iter()
        .map(|(image_id, q, t, camera_id, name)| {
            if !seen.insert(image_id) {
                return Err(Error::Schema(format!("duplicate image id {image_id}")));
            }
            let k = intrinsics.get(&camera_id).ok_or_else(|| {
                Error::Schema(format!(
                    "image {image_id} references unknown camera id {camera_id}"
                ))
            })?;
            CameraPose::new(
                name,
                k.params,
                (k.width, k.height),
                quat_to_matrix(q),
                Vector3::from(t),
            )
        })
        .collect()
}

fn parse_field<T: std::str::FromStr>(s: &str, offset: usize) -> Result<T> {
    s.parse().map_err(|_| Error::Parse {
        offset,
        message: format!("cannot parse `{s}`"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_identity_extrinsics() {
        let text = r#"[{"fx":1,"fy":1,"cx":0,"cy":0,"width":4,"height":3,
            "qvec":[1,0,0,0],"tvec":[0,0,0]}]"#;
        let poses = parse_json_cameras(text).unwrap();
        assert_eq!(poses.len(), 1);
        assert_eq!(poses[0].world_to_camera(), Matrix4::identity());
        assert_eq!(poses[0].name, "0");
    }

    #[test]
    fn colmap_identity_quaternion() {
        let cams = "# comment\n1 PINHOLE 640 480 500 500 320 240\n";
        let imgs = "1 1 0 0 0 0 0 0 1 a.png\n\n";
        let poses = parse_colmap_text(cams, imgs).unwrap();
        assert_eq!(poses[0].rotation, Matrix3::identity());
        assert_eq!(poses[0].name, "a.png");
    }

    #[test]
    fn colmap_unknown_model() {
        let cams = "1 OPENCV 640 480 500 500 320 240 0 0 0 0\n";
        let err = parse_colmap_text(cams, "").unwrap_err();
        assert!(matches!(err, Error::UnsupportedModel(m) if m == "OPENCV"));
    }

    #[test]
    fn colmap_mismatched_camera_id() {
        let cams = "1 PINHOLE 640 480 500 500 320 240\n";
        let imgs = "1 1 0 0 0 0 0 0 7 a.png\n\n";
        assert!(matches!(
            parse_colmap_text(cams, imgs),
            Err(Error::Schema(_))
        ));
    }

    #[test]
    fn colmap_parse_error_offset() {
        let cams = "1 PINHOLE 640 480 500 500 320 240\n2 PINHOLE x 480 1 1 1 1\n";
        match parse_colmap_text(cams, "") {
            Err(Error::Parse { offset, .. }) => assert_eq!(offset, 34),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn look_at_projects_target_to_principal_point() {
        let pose = CameraPose::look_at(
            "v",
            [100.0, 100.0, 32.0, 24.0],
            (64, 48),
            [1.0, 2.0, -3.0],
            [0.5, 0.0, 1.0],
            [0.0, -1.0, 0.0],
        )
        .unwrap();
        let [u, v, _] = pose.project([0.5, 0.0, 1.0]).unwrap();
        assert!((u - 32.0).abs() < 1e-9 && (v - 24.0).abs() < 1e-9);
        let c = pose.center();
        assert!((c[0] - 1.0).abs() < 1e-12 && (c[2] + 3.0).abs() < 1e-12);
    }

    #[test]
    fn json_round_trip_through_pose() {
        let pose = CameraPose::look_at(
            "cam",
            [80.0, 90.0, 10.0, 11.0],
            (20, 22),
            [0.3, -0.2, -2.0],
            [0.0, 0.0, 0.0],
            [0.0, -1.0, 0.0],
        )
        .unwrap();
        let back = parse_json_cameras(&cameras_to_json(&[pose.clone()])).unwrap();
        assert!((back[0].rotation - pose.rotation).abs().max() < 1e-12);
        assert!((back[0].translation - pose.translation).abs().max() < 1e-12);
        assert_eq!(back[0].name, "cam");
    }
}
