use rayon::prelude::*;
use thiserror::Error;

use super::{group_rectangles, scaled_window, Cascade, ScaledCascade, DEFAULT_GROUP_EPS};
use crate::imaging::{integral, GrayImage, IntegralImage, Rect, SquaredIntegralImage};

/// Two pixels at base scale for a 24-pixel window.
pub const DEFAULT_STEP_FRACTION: f64 = 1.0 / 12.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("scale_factor must be > 1, got {0}")]
    ScaleFactor(f64),
    #[error("step_fraction must be in (0, 1], got {0}")]
    StepFraction(f64),
    #[error("group eps must be in (0, 1), got {0}")]
    Eps(f64),
    #[error("min_size must be at least 1x1")]
    MinSize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DetectParams {
    pub scale_factor: f64,
    pub min_neighbors: usize,
    /// Smallest window (w, h) reported; `None` means the cascade's base window.
    pub min_size: Option<(u32, u32)>,
    /// Scan stride as a fraction of the current window width.
    pub step_fraction: f64,
    pub group_eps: f64,
}

impl Default for DetectParams {
    fn default() -> Self {
        DetectParams { scale_factor: 1.1, min_neighbors: 4, min_size: None, step_fraction: DEFAULT_STEP_FRACTION, group_eps: DEFAULT_GROUP_EPS }
    }
}

impl DetectParams {
    pub fn validate(&self) -> Result<(), ParamError> {
        if !(self.scale_factor > 1.0 && self.scale_factor.is_finite()) {
            return Err(ParamError::ScaleFactor(self.scale_factor));
        }
        if !(self.step_fraction > 0.0 && self.step_fraction <= 1.0) {
            return Err(ParamError::StepFraction(self.step_fraction));
        }
        if !(self.group_eps > 0.0 && self.group_eps < 1.0) {
            return Err(ParamError::Eps(self.group_eps));
        }
        if matches!(self.min_size, Some((0, _) | (_, 0))) {
            return Err(ParamError::MinSize);
        }
        Ok(())
    }
}

/// Scales visited for an image of the given size: `factor^k` for k = 0, 1, …
/// while the scaled window fits; windows below `min_size` are skipped.
pub fn scan_scales(cascade: &Cascade, width: u32, height: u32, p: &DetectParams) -> Vec<f64> {
    let (bw, bh) = (cascade.window_w(), cascade.window_h());
    let (min_w, min_h) = p.min_size.unwrap_or((bw, bh));
    let mut out = vec![];
    for k in 0.. {
        let s = p.scale_factor.powi(k);
        let (w, h) = scaled_window(bw, bh, s);
        if w > width || h > height {
            break;
        }
        if w >= min_w && h >= min_h {
            out.push(s);
        }
    }
    out
}

fn scan_row(sc: &ScaledCascade, ii: &IntegralImage, sq: &SquaredIntegralImage, y: u32, stride: u32) -> Vec<Rect> {
    let (w, h) = sc.window();
    let mut hits = vec![];
    let mut x = 0;
    while x + w <= ii.width() {
        if sc.classify_unchecked(ii, sq, x, y) {
            hits.push(Rect::new(x, y, w, h));
        }
        x += stride;
    }
    hits
}

/// Every accepted window before grouping, in (scale, y, x) order.
pub fn detect_raw(cascade: &Cascade, img: &GrayImage, p: &DetectParams) -> Vec<Rect> {
    let scales = scan_scales(cascade, img.width(), img.height(), p);
    if scales.is_empty() {
        return vec![];
    }
    let (ii, sq) = integral(img);
    let scaled: Vec<(ScaledCascade, u32)> = scales
        .iter()
        .map(|&s| {
            let stride = ((p.step_fraction * s * cascade.window_w() as f64).round() as u32).max(1);
            (ScaledCascade::new(cascade, s), stride)
        })
        .collect();
    let jobs: Vec<(usize, u32)> = scaled
        .iter()
        .enumerate()
        .flat_map(|(k, (sc, stride))| {
            let last = img.height() - sc.window().1;
            (0..=last).step_by(*stride as usize).map(move |y| (k, y))
        })
        .collect();
    // collect() on an indexed parallel iterator keeps job order, so the merge is canonical
    let rows: Vec<Vec<Rect>> = jobs.par_iter().map(|&(k, y)| scan_row(&scaled[k].0, &ii, &sq, y, scaled[k].1)).collect();
    rows.into_iter().flatten().collect()
}

/// Multi-scale sliding-window detection followed by grouping.
///
/// An image smaller than the cascade window yields no detections.
pub fn detect_multiscale(cascade: &Cascade, img: &GrayImage, p: &DetectParams) -> Result<Vec<Rect>, ParamError> {
    p.validate()?;
    let raw = detect_raw(cascade, img, p);
    Ok(group_rectangles(&raw, p.min_neighbors, p.group_eps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::haar::{HaarFeature, Stage, WeakTree, WeightedRect};

    fn bright_center_cascade() -> Cascade {
        // accepts 8x8 windows whose middle columns are brighter than the window
        let f = HaarFeature::new(vec![WeightedRect::new(0, 0, 8, 8, -1.0), WeightedRect::new(2, 0, 4, 8, 2.0)]).unwrap();
        Cascade::new(8, 8, vec![Stage { trees: vec![WeakTree::stump(f, 0.2, 0.0, 1.0)], threshold: 0.5 }]).unwrap()
    }

    #[test]
    fn params_validate() {
        assert!(DetectParams::default().validate().is_ok());
        let bad = DetectParams { scale_factor: 1.0, ..Default::default() };
        assert_eq!(bad.validate(), Err(ParamError::ScaleFactor(1.0)));
        let bad = DetectParams { step_fraction: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn scales_stop_when_window_no_longer_fits() {
        let c = bright_center_cascade();
        let p = DetectParams { scale_factor: 2.0, ..Default::default() };
        assert_eq!(scan_scales(&c, 40, 33, &p), vec![1.0, 2.0, 4.0]);
        let p = DetectParams { scale_factor: 2.0, min_size: Some((16, 16)), ..Default::default() };
        assert_eq!(scan_scales(&c, 40, 33, &p), vec![2.0, 4.0]);
        assert!(scan_scales(&c, 7, 40, &p).is_empty());
    }

    #[test]
    fn small_image_is_empty_not_error() {
        let c = bright_center_cascade();
        assert_eq!(detect_multiscale(&c, &GrayImage::filled(5, 5, 9), &DetectParams::default()).unwrap(), vec![]);
    }

    #[test]
    fn finds_bright_bar_and_is_deterministic() {
        let c = bright_center_cascade();
        let img = GrayImage::from_fn(48, 32, |x, y| if (20..24).contains(&x) && (8..16).contains(&y) { 220 } else { 30 });
        let p = DetectParams { min_neighbors: 1, ..Default::default() };
        let raw = detect_raw(&c, &img, &p);
        assert!(!raw.is_empty());
        let mut sorted = raw.clone();
        sorted.sort_by_key(|r| (r.w, r.y, r.x));
        assert_eq!(sorted, raw, "raw hits must be in (scale, y, x) order");
        let a = detect_multiscale(&c, &img, &p).unwrap();
        assert_eq!(a, detect_multiscale(&c, &img, &p).unwrap());
        assert!(a.iter().any(|r| r.x <= 20 && r.right() >= 24));
    }
}
