//! File formats and sequence loading.

mod config;
mod gt;
mod matrix;
mod plot;
mod results;
mod sequence;

pub use config::{config_to_toml, parse_config, ConfigFile};
pub use gt::{parse_box, parse_gt, write_gt};
pub use matrix::{parse_matrix, write_matrix};
pub use plot::{render_curve_svg, CurveKind};
pub use results::{
    parse_curve, parse_results, write_curve, write_metrics, write_results, write_summary, ResultRow,
};
pub use sequence::{load_frames, load_sequence, SequenceManifest};

use std::path::Path;

use crate::error::{Error, Result};

pub(crate) fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::input(path, e.to_string()))
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::input(path, e.to_string()))
}
