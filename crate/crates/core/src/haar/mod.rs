//! Haar cascade model, per-window attentional evaluation and multi-scale detection.
//!
//! A [`Cascade`] is an ordered list of [`Stage`]s; each stage sums the leaf
//! values reached in its [`WeakTree`]s and rejects the window as soon as the
//! sum falls below the stage threshold. Node decisions compare the
//! variance-normalized feature value against the node threshold; values
//! strictly below go left, ties go right.

mod detect;
mod eval;
mod group;

use thiserror::Error;

use crate::imaging::Rect;

pub use detect::{detect_multiscale, detect_raw, scan_scales, DetectParams, ParamError, DEFAULT_STEP_FRACTION};
pub use eval::{eval_feature, eval_window, normalization_rect, scaled_window, ScaledCascade, ScaledFeature};
pub use group::{group_clusters, group_rectangles, DEFAULT_GROUP_EPS};
pub(crate) use eval::norm_factor_unchecked;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightedRect {
    pub rect: Rect,
    pub weight: f64,
}

impl WeightedRect {
    pub const fn new(x: u32, y: u32, w: u32, h: u32, weight: f64) -> Self {
        WeightedRect { rect: Rect::new(x, y, w, h), weight }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FeatureError {
    #[error("feature has {0} rects, expected 2 or 3")]
    RectCount(usize),
    #[error("feature rect has zero area")]
    EmptyRect,
    #[error("feature weight is zero or not finite")]
    BadWeight,
    #[error("feature weights must include both signs")]
    SameSign,
}

/// Weighted sum of 2 or 3 rectangles in base-window coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct HaarFeature {
    rects: Vec<WeightedRect>,
}

impl HaarFeature {
    pub fn new(rects: Vec<WeightedRect>) -> Result<Self, FeatureError> {
        if !(2..=3).contains(&rects.len()) {
            return Err(FeatureError::RectCount(rects.len()));
        }
        if rects.iter().any(|r| r.rect.w == 0 || r.rect.h == 0) {
            return Err(FeatureError::EmptyRect);
        }
        if rects.iter().any(|r| r.weight == 0.0 || !r.weight.is_finite()) {
            return Err(FeatureError::BadWeight);
        }
        let pos = rects.iter().any(|r| r.weight > 0.0);
        let neg = rects.iter().any(|r| r.weight < 0.0);
        if !(pos && neg) {
            return Err(FeatureError::SameSign);
        }
        Ok(HaarFeature { rects })
    }

    pub fn rects(&self) -> &[WeightedRect] {
        &self.rects
    }

    pub fn fits(&self, window_w: u32, window_h: u32) -> bool {
        self.rects.iter().all(|r| r.rect.check_inside(window_w, window_h).is_ok())
    }

    /// True when a constant image scores zero: Σ weight·area = 0.
    pub fn is_zero_sum(&self) -> bool {
        let total: f64 = self.rects.iter().map(|r| r.weight * r.rect.area() as f64).sum();
        let scale: f64 = self.rects.iter().map(|r| (r.weight * r.rect.area() as f64).abs()).sum();
        total.abs() <= 1e-9 * scale
    }
}

/// Where a node branch leads.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NodeLink {
    Leaf(f64),
    /// Index of another node in the same tree.
    Node(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeakNode {
    pub feature: HaarFeature,
    pub threshold: f64,
    pub left: NodeLink,
    pub right: NodeLink,
}

/// Decision tree; node 0 is the root.
#[derive(Clone, Debug, PartialEq)]
pub struct WeakTree {
    pub nodes: Vec<WeakNode>,
}

impl WeakTree {
    pub fn stump(feature: HaarFeature, threshold: f64, left: f64, right: f64) -> Self {
        WeakTree { nodes: vec![WeakNode { feature, threshold, left: NodeLink::Leaf(left), right: NodeLink::Leaf(right) }] }
    }

    pub fn is_stump(&self) -> bool {
        self.nodes.len() == 1
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Stage {
    pub trees: Vec<WeakTree>,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CascadeError {
    #[error("window {0}x{1} is smaller than 4x4")]
    WindowTooSmall(u32, u32),
    #[error("cascade has no stages")]
    NoStages,
    #[error("stage {stage} has no trees")]
    EmptyStage { stage: usize },
    #[error("stage {stage}, tree {tree} has no nodes")]
    EmptyTree { stage: usize, tree: usize },
    #[error("stage {stage}, tree {tree}, node {node}: {source}")]
    Feature { stage: usize, tree: usize, node: usize, source: FeatureError },
    #[error("stage {stage}, tree {tree}, node {node}: feature rect outside the {w}x{h} window")]
    OutsideWindow { stage: usize, tree: usize, node: usize, w: u32, h: u32 },
    #[error("stage {stage}, tree {tree}, node {node}: child index {child} is dangling or not below its parent")]
    BadChild { stage: usize, tree: usize, node: usize, child: usize },
    #[error("stage {stage}, tree {tree}, node {node}: node {node} is unreachable from the root")]
    Unreachable { stage: usize, tree: usize, node: usize },
    #[error("stage {stage}: non-finite threshold or leaf value")]
    NonFinite { stage: usize },
}

/// A validated detection model.
#[derive(Clone, Debug, PartialEq)]
pub struct Cascade {
    window_w: u32,
    window_h: u32,
    stages: Vec<Stage>,
}

impl Cascade {
    pub fn new(window_w: u32, window_h: u32, stages: Vec<Stage>) -> Result<Self, CascadeError> {
        if window_w < 4 || window_h < 4 {
            return Err(CascadeError::WindowTooSmall(window_w, window_h));
        }
        if stages.is_empty() {
            return Err(CascadeError::NoStages);
        }
        for (si, stage) in stages.iter().enumerate() {
            if stage.trees.is_empty() {
                return Err(CascadeError::EmptyStage { stage: si });
            }
            if stage.threshold.is_nan() {
                return Err(CascadeError::NonFinite { stage: si });
            }
            for (ti, tree) in stage.trees.iter().enumerate() {
                validate_tree(tree, si, ti, window_w, window_h)?;
            }
        }
        Ok(Cascade { window_w, window_h, stages })
    }

    pub fn window_w(&self) -> u32 {
        self.window_w
    }

    pub fn window_h(&self) -> u32 {
        self.window_h
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    pub fn tree_count(&self) -> usize {
        self.stages.iter().map(|s| s.trees.len()).sum()
    }
}

fn validate_tree(tree: &WeakTree, stage: usize, ti: usize, w: u32, h: u32) -> Result<(), CascadeError> {
    if tree.nodes.is_empty() {
        return Err(CascadeError::EmptyTree { stage, tree: ti });
    }
    let mut reached = vec![false; tree.nodes.len()];
    reached[0] = true;
    for (ni, node) in tree.nodes.iter().enumerate() {
        HaarFeature::new(node.feature.rects.clone())
            .map_err(|source| CascadeError::Feature { stage, tree: ti, node: ni, source })?;
        if !node.feature.fits(w, h) {
            return Err(CascadeError::OutsideWindow { stage, tree: ti, node: ni, w, h });
        }
        if !node.threshold.is_finite() {
            return Err(CascadeError::NonFinite { stage });
        }
        for link in [node.left, node.right] {
            match link {
                // children must come after their parent, which rules out cycles
                NodeLink::Node(c) if c <= ni || c >= tree.nodes.len() => {
                    return Err(CascadeError::BadChild { stage, tree: ti, node: ni, child: c });
                }
                NodeLink::Node(c) => reached[c] = true,
                NodeLink::Leaf(v) if !v.is_finite() => return Err(CascadeError::NonFinite { stage }),
                NodeLink::Leaf(_) => {}
            }
        }
    }
    if let Some(node) = reached.iter().position(|r| !r) {
        return Err(CascadeError::Unreachable { stage, tree: ti, node });
    }
    Ok(())
}
