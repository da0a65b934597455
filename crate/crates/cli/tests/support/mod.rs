#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gsfill_core::camera::cameras_to_json;
use gsfill_core::synthetic::DiskFixture;
use gsfill_core::save_scene_ply;

pub fn gsfill(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gsfill"))
        .args(args)
        .output()
        .expect("gsfill binary runs")
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

/// Scene, cameras, mask and reference image of a disk fixture on disk.
pub struct DiskFiles {
    pub scene: PathBuf,
    pub cameras: PathBuf,
    pub mask: PathBuf,
    pub image: PathBuf,
}

pub fn write_disk(dir: &Path, fx: &DiskFixture) -> DiskFiles {
    let files = DiskFiles {
        scene: dir.join("scene.ply"),
        cameras: dir.join("cameras.json"),
        mask: dir.join("mask.png"),
        image: dir.join("reference.png"),
    };
    save_scene_ply(&fx.holed, &files.scene).unwrap();
    std::fs::write(&files.cameras, cameras_to_json(std::slice::from_ref(&fx.pose))).unwrap();
    fx.mask.save_png(&files.mask).unwrap();
    fx.ground_truth.save_png(&files.image).unwrap();
    files
}

/// `gsfill inpaint` on the fixture files with extra arguments.
pub fn inpaint(files: &DiskFiles, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "inpaint",
        "--scene",
        path_str(&files.scene),
        "--cameras",
        path_str(&files.cameras),
        "--ref-view",
        "reference",
        "--mask",
        path_str(&files.mask),
        "--ref-image",
        path_str(&files.image),
        "--out",
        path_str(out),
    ];
    args.extend_from_slice(extra);
    gsfill(&args)
}
