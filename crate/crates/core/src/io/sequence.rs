use std::path::{Path, PathBuf};

use super::gt::parse_gt;
use super::read_text;
use crate::error::{Error, Result};
use crate::eval::BoundingBox;
use crate::frame::GrayFrame;

const EXTENSIONS: [&str; 4] = ["png", "jpg", "jpeg", "bmp"];

/// Image paths in frame order, optional ground truth and the common frame size.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceManifest {
    pub name: String,
    pub paths: Vec<PathBuf>,
    pub ground_truth: Option<Vec<BoundingBox>>,
    pub width: usize,
    pub height: usize,
}

impl SequenceManifest {
    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }
}

/// Lists the images in `dir` (sorted by file name), checks that they share
/// one size, and parses `gt` if given.
pub fn load_sequence(dir: &Path, gt: Option<&Path>) -> Result<SequenceManifest> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::input(dir, e.to_string()))?;
    let mut paths = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::input(dir, e.to_string()))?.path();
        let is_image = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()));
        if path.is_file() && is_image {
            paths.push(path);
        }
    }
    paths.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    if paths.is_empty() {
        return Err(Error::input(dir, "no PNG, JPEG or BMP images found"));
    }

    let mut size = None;
    for p in &paths {
        let (w, h) = image::image_dimensions(p).map_err(|e| Error::input(p, e.to_string()))?;
        match size {
            None => size = Some((w, h)),
            Some(s) if s != (w, h) => {
                return Err(Error::input(
                    p,
                    format!("frame is {w}x{h} but earlier frames are {}x{}", s.0, s.1),
                ))
            }
            Some(_) => {}
        }
    }
    let (width, height) = size.map(|(w, h)| (w as usize, h as usize)).unwrap_or_default();

    let ground_truth = match gt {
        None => None,
        Some(g) => {
            let boxes = parse_gt(&read_text(g)?).map_err(|e| Error::input(g, e.to_string()))?;
            if boxes.len() != paths.len() {
                return Err(Error::input(
                    g,
                    format!("{} boxes for {} frames", boxes.len(), paths.len()),
                ));
            }
            Some(boxes)
        }
    };
    let name = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "sequence".into());
    Ok(SequenceManifest {
        name,
        paths,
        ground_truth,
        width,
        height,
    })
}

/// Decodes every frame of the manifest to gray levels.
pub fn load_frames(manifest: &SequenceManifest) -> Result<Vec<GrayFrame>> {
    manifest
        .paths
        .iter()
        .map(|p| {
            let img = image::open(p).map_err(|e| Error::input(p, e.to_string()))?;
            GrayFrame::from_image(&img)
        })
        .collect()
}
