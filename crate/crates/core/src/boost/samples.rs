use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::BoostError;
use crate::imaging::{crop, read_image, resize_bilinear, GrayImage, ImageError, Rect};

/// How images larger than the training window are turned into samples.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum WindowSource {
    /// Resize the whole image to the window (positives).
    Resize,
    /// Cut this many random window-sized crops from each larger image (negatives).
    RandomCrops { per_image: usize, seed: u64 },
}

fn image_files(dir: &Path) -> Result<Vec<PathBuf>, ImageError> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && matches!(p.extension().and_then(|e| e.to_str()), Some("pgm" | "ppm")))
        .collect();
    files.sort();
    Ok(files)
}

/// Loads every PGM/PPM in `dir` (sorted by name) as `w`×`h` gray windows.
/// Window-sized images are used as-is.
pub fn load_windows(dir: &Path, w: u32, h: u32, source: WindowSource) -> Result<Vec<GrayImage>, BoostError> {
    let mut out = vec![];
    let mut rng = match source {
        WindowSource::RandomCrops { seed, .. } => Some(ChaCha8Rng::seed_from_u64(seed)),
        WindowSource::Resize => None,
    };
    for path in image_files(dir)? {
        let img = read_image(&path)?.to_gray();
        if (img.width(), img.height()) == (w, h) {
            out.push(img);
            continue;
        }
        match (source, rng.as_mut()) {
            (WindowSource::RandomCrops { per_image, .. }, Some(rng)) => {
                if img.width() < w || img.height() < h {
                    return Err(ImageError::Dimensions(format!("{} is smaller than the {w}x{h} window", path.display())).into());
                }
                for _ in 0..per_image {
                    let x = rng.random_range(0..=img.width() - w);
                    let y = rng.random_range(0..=img.height() - h);
                    out.push(crop(&img, Rect::new(x, y, w, h), 0.0)?);
                }
            }
            _ => out.push(resize_bilinear(&img, w, h)),
        }
    }
    Ok(out)
}
