//! Reference list for progressive runs:
//!
//! ```toml
//! [[ref]]
//! view = "cam_03"
//! mask = "masks/cam_03.png"
//! image = "inpainted/cam_03.png"
//! ```
//!
//! Relative paths resolve against the file's directory.

use std::path::{Path, PathBuf};

use gsfill_core::pipeline::ReferenceView;
use gsfill_core::{CameraPose, ColorImage, Error, MaskImage, Result};
use serde::Deserialize;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RefsFile {
    #[serde(rename = "ref")]
    refs: Vec<RefEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RefEntry {
    view: String,
    mask: PathBuf,
    image: PathBuf,
}

pub fn load(path: &Path, cameras: &[CameraPose]) -> Result<Vec<ReferenceView>> {
    let text = std::fs::read_to_string(path)?;
    let file: RefsFile = toml::from_str(&text).map_err(|e| Error::Parse {
        offset: e.span().map_or(0, |s| s.start),
        message: e.message().to_string(),
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    file.refs
        .into_iter()
        .map(|r| {
            let pose = super::find_view(cameras, &r.view)?.clone();
            Ok(ReferenceView {
                pose,
                mask: MaskImage::load_png(&base.join(&r.mask))?,
                image: ColorImage::load_png(&base.join(&r.image))?,
            })
        })
        .collect()
}
