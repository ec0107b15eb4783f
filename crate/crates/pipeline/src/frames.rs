//! Numbered frame files in a directory, read in numeric order.

use std::path::{Path, PathBuf};

use chrono::{DateTime, TimeDelta, Utc};
use sentinel_core::imaging::{read_image, ImageError};
use sentinel_core::ColorImage;

use crate::PipelineError;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FrameFile {
    /// The number in the file stem, e.g. 7 for `0007.ppm`.
    pub number: u64,
    pub path: PathBuf,
}

impl FrameFile {
    pub fn read(&self) -> Result<ColorImage, ImageError> {
        Ok(read_image(&self.path)?.to_color())
    }
}

/// Lists `*.ppm`/`*.pgm` files whose stem is a decimal number, sorted by that number.
/// Other files are ignored.
pub fn list_frames(dir: impl AsRef<Path>) -> Result<Vec<FrameFile>, PipelineError> {
    let dir = dir.as_ref();
    let io = |source| PipelineError::Io { path: dir.to_path_buf(), source };
    let mut out = vec![];
    for entry in std::fs::read_dir(dir).map_err(io)? {
        let path = entry.map_err(io)?.path();
        let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
        if !matches!(ext.as_deref(), Some("ppm" | "pgm")) {
            continue;
        }
        match path.file_stem().and_then(|s| s.to_str()).and_then(|s| s.parse::<u64>().ok()) {
            Some(number) => out.push(FrameFile { number, path }),
            None => log::debug!("ignoring {}: stem is not a frame number", path.display()),
        }
    }
    out.sort_by(|a, b| (a.number, &a.path).cmp(&(b.number, &b.path)));
    Ok(out)
}

/// Timestamp of the `index`-th frame (0-based) in a source starting at `start`.
pub fn frame_ts(start: DateTime<Utc>, interval_ms: u64, index: usize) -> DateTime<Utc> {
    start + TimeDelta::milliseconds((interval_ms as i64).saturating_mul(index as i64))
}
