use super::{Cascade, HaarFeature, NodeLink};
use crate::imaging::stddev_from_sums;
use crate::imaging::{ImageError, IntegralImage, Rect, SquaredIntegralImage};

/// Below this the window is treated as flat and σ is replaced by 1.
const MIN_SIGMA: f64 = 1e-6;

#[inline]
fn scale_len(v: u32, scale: f64) -> u32 {
    (v as f64 * scale).round() as u32
}

/// Size of the base window at `scale`.
pub fn scaled_window(window_w: u32, window_h: u32, scale: f64) -> (u32, u32) {
    (scale_len(window_w, scale).max(1), scale_len(window_h, scale).max(1))
}

/// Region, relative to the window origin, over which σ is measured and whose
/// area normalizes feature values: the window inset by one base pixel on
/// each side (the convention the stock frontal-face models were trained with).
pub fn normalization_rect(window_w: u32, window_h: u32, scale: f64) -> Rect {
    let (ww, wh) = scaled_window(window_w, window_h, scale);
    let off = scale_len(1, scale).min(ww - 1).min(wh - 1);
    let w = scale_len(window_w.saturating_sub(2).max(1), scale).clamp(1, ww - off);
    let h = scale_len(window_h.saturating_sub(2).max(1), scale).clamp(1, wh - off);
    Rect::new(off, off, w, h)
}

/// `area · σ` over `norm` shifted to `(x, y)`, with σ < 10⁻⁶ taken as 1.
#[inline]
pub(crate) fn norm_factor_unchecked(ii: &IntegralImage, sq: &SquaredIntegralImage, norm: Rect, x: u32, y: u32) -> f64 {
    let sum = ii.sum_unchecked(x + norm.x, y + norm.y, norm.w, norm.h);
    let sq_sum = sq.sum_unchecked(x + norm.x, y + norm.y, norm.w, norm.h);
    let sigma = stddev_from_sums(sum, sq_sum, norm.area());
    let sigma = if sigma < MIN_SIGMA { 1.0 } else { sigma };
    norm.area() as f64 * sigma
}

/// A feature with rects scaled to a window size. For zero-sum features the
/// first weight is recomputed so the scaled rects still cancel on a constant
/// image despite coordinate rounding.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScaledFeature {
    rects: [(Rect, f64); 3],
    len: usize,
}

impl ScaledFeature {
    pub fn new(feature: &HaarFeature, scale: f64, window_w: u32, window_h: u32) -> Self {
        let (ww, wh) = scaled_window(window_w, window_h, scale);
        let mut rects = [(Rect::new(0, 0, 1, 1), 0.0); 3];
        let src = feature.rects();
        for (slot, wr) in rects.iter_mut().zip(src) {
            let x = scale_len(wr.rect.x, scale).min(ww - 1);
            let y = scale_len(wr.rect.y, scale).min(wh - 1);
            let w = scale_len(wr.rect.w, scale).clamp(1, ww - x);
            let h = scale_len(wr.rect.h, scale).clamp(1, wh - y);
            *slot = (Rect::new(x, y, w, h), wr.weight);
        }
        if feature.is_zero_sum() && scale != 1.0 {
            let rest: f64 = rects[1..src.len()].iter().map(|(r, w)| w * r.area() as f64).sum();
            rects[0].1 = -rest / rects[0].0.area() as f64;
        }
        ScaledFeature { rects, len: src.len() }
    }

    pub fn rects(&self) -> &[(Rect, f64)] {
        &self.rects[..self.len]
    }

    /// Weighted rect sum at window origin `(x, y)`; the caller guarantees bounds.
    #[inline]
    pub(crate) fn raw_unchecked(&self, ii: &IntegralImage, x: u32, y: u32) -> f64 {
        let mut acc = 0.0;
        for (r, w) in &self.rects[..self.len] {
            acc += w * ii.sum_unchecked(x + r.x, y + r.y, r.w, r.h) as f64;
        }
        acc
    }
}

/// Normalized value of `feature` in the window at `origin` and `scale`:
/// Σ weight·rect_sum / (window_area·σ), with σ < 10⁻⁶ taken as 1.
pub fn eval_feature(
    feature: &HaarFeature,
    ii: &IntegralImage,
    origin: (u32, u32),
    scale: f64,
    window_area: f64,
    sigma: f64,
) -> Result<f64, ImageError> {
    let max_x = feature.rects().iter().map(|r| r.rect.right()).max().unwrap_or(1) as u32;
    let max_y = feature.rects().iter().map(|r| r.rect.bottom()).max().unwrap_or(1) as u32;
    let scaled = ScaledFeature::new(feature, scale, max_x, max_y);
    let mut acc = 0.0;
    for (r, w) in scaled.rects() {
        let abs = Rect::new(origin.0 + r.x, origin.1 + r.y, r.w, r.h);
        acc += w * ii.rect_sum(abs)? as f64;
    }
    let sigma = if sigma < MIN_SIGMA { 1.0 } else { sigma };
    Ok(acc / (window_area * sigma))
}

#[derive(Clone, Copy, Debug)]
enum Link {
    Leaf(f64),
    Node(u32),
}

#[derive(Clone, Copy, Debug)]
struct FlatNode {
    feature: ScaledFeature,
    threshold: f64,
    left: Link,
    right: Link,
}

#[derive(Clone, Copy, Debug)]
struct FlatStage {
    first_tree: usize,
    trees: usize,
    threshold: f64,
}

/// A cascade with every feature pre-scaled for one window size, so that a
/// window can be classified with integer offsets into the integral image.
#[derive(Clone, Debug)]
pub struct ScaledCascade {
    scale: f64,
    window: (u32, u32),
    norm: Rect,
    nodes: Vec<FlatNode>,
    tree_roots: Vec<u32>,
    stages: Vec<FlatStage>,
}

impl ScaledCascade {
    pub fn new(cascade: &Cascade, scale: f64) -> Self {
        let (bw, bh) = (cascade.window_w(), cascade.window_h());
        let mut nodes = Vec::new();
        let mut tree_roots = Vec::new();
        let mut stages = Vec::with_capacity(cascade.stages().len());
        for stage in cascade.stages() {
            stages.push(FlatStage { first_tree: tree_roots.len(), trees: stage.trees.len(), threshold: stage.threshold });
            for tree in &stage.trees {
                let base = nodes.len() as u32;
                tree_roots.push(base);
                for node in &tree.nodes {
                    let link = |l: NodeLink| match l {
                        NodeLink::Leaf(v) => Link::Leaf(v),
                        NodeLink::Node(i) => Link::Node(base + i as u32),
                    };
                    nodes.push(FlatNode {
                        feature: ScaledFeature::new(&node.feature, scale, bw, bh),
                        threshold: node.threshold,
                        left: link(node.left),
                        right: link(node.right),
                    });
                }
            }
        }
        ScaledCascade {
            scale,
            window: scaled_window(bw, bh, scale),
            norm: normalization_rect(bw, bh, scale),
            nodes,
            tree_roots,
            stages,
        }
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Window size in pixels at this scale.
    pub fn window(&self) -> (u32, u32) {
        self.window
    }

    /// `window_area · σ` for the window at `(x, y)`; the caller guarantees bounds.
    #[inline]
    pub(crate) fn norm_factor_unchecked(&self, ii: &IntegralImage, sq: &SquaredIntegralImage, x: u32, y: u32) -> f64 {
        norm_factor_unchecked(ii, sq, self.norm, x, y)
    }

    #[inline]
    fn tree_output(&self, root: u32, ii: &IntegralImage, x: u32, y: u32, norm: f64) -> f64 {
        let mut idx = root as usize;
        loop {
            let node = &self.nodes[idx];
            let value = node.feature.raw_unchecked(ii, x, y) / norm;
            let link = if value < node.threshold { node.left } else { node.right };
            match link {
                Link::Leaf(v) => return v,
                Link::Node(next) => idx = next as usize,
            }
        }
    }

    /// Attentional evaluation: stops at the first stage whose sum falls below
    /// its threshold. The caller guarantees the window lies inside the image.
    #[inline]
    pub(crate) fn classify_unchecked(&self, ii: &IntegralImage, sq: &SquaredIntegralImage, x: u32, y: u32) -> bool {
        let norm = self.norm_factor_unchecked(ii, sq, x, y);
        for stage in &self.stages {
            let roots = &self.tree_roots[stage.first_tree..stage.first_tree + stage.trees];
            let sum: f64 = roots.iter().map(|&r| self.tree_output(r, ii, x, y, norm)).sum();
            if sum < stage.threshold {
                return false;
            }
        }
        true
    }

    fn check_window(&self, ii: &IntegralImage, x: u32, y: u32) -> Result<(), ImageError> {
        Rect::new(x, y, self.window.0, self.window.1).check_inside(ii.width(), ii.height())
    }

    /// Whether the window at `(x, y)` passes every stage.
    pub fn classify(&self, ii: &IntegralImage, sq: &SquaredIntegralImage, x: u32, y: u32) -> Result<bool, ImageError> {
        self.check_window(ii, x, y)?;
        Ok(self.classify_unchecked(ii, sq, x, y))
    }

    /// Stage sums for every stage, without early exit. Intended for diagnostics.
    pub fn stage_sums(&self, ii: &IntegralImage, sq: &SquaredIntegralImage, x: u32, y: u32) -> Result<Vec<f64>, ImageError> {
        self.check_window(ii, x, y)?;
        let norm = self.norm_factor_unchecked(ii, sq, x, y);
        Ok(self
            .stages
            .iter()
            .map(|s| {
                self.tree_roots[s.first_tree..s.first_tree + s.trees].iter().map(|&r| self.tree_output(r, ii, x, y, norm)).sum()
            })
            .collect())
    }
}

/// Attentional cascade decision for the window at `origin` and `scale`.
pub fn eval_window(
    cascade: &Cascade,
    ii: &IntegralImage,
    sq: &SquaredIntegralImage,
    origin: (u32, u32),
    scale: f64,
) -> Result<bool, ImageError> {
    ScaledCascade::new(cascade, scale).classify(ii, sq, origin.0, origin.1)
}
