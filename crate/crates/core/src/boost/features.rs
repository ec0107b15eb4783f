use crate::haar::{HaarFeature, WeightedRect};

/// The five upright Haar feature families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FeatureKind {
    /// Left/right halves.
    EdgeHorizontal,
    /// Top/bottom halves.
    EdgeVertical,
    /// Three columns, center weighted.
    LineHorizontal,
    /// Three rows, center weighted.
    LineVertical,
    /// 2×2 checkerboard.
    Checker,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 5] =
        [FeatureKind::EdgeHorizontal, FeatureKind::EdgeVertical, FeatureKind::LineHorizontal, FeatureKind::LineVertical, FeatureKind::Checker];

    /// Footprint in units.
    pub fn units(self) -> (u32, u32) {
        match self {
            FeatureKind::EdgeHorizontal => (2, 1),
            FeatureKind::EdgeVertical => (1, 2),
            FeatureKind::LineHorizontal => (3, 1),
            FeatureKind::LineVertical => (1, 3),
            FeatureKind::Checker => (2, 2),
        }
    }

    /// Feature anchored at `(x, y)` with unit cell `uw`×`uh`. The enclosing
    /// rect carries weight −1 and the sub-rects are weighted so a constant
    /// window scores exactly zero.
    pub fn build(self, x: u32, y: u32, uw: u32, uh: u32) -> HaarFeature {
        let (a, b) = self.units();
        let mut rects = vec![WeightedRect::new(x, y, a * uw, b * uh, -1.0)];
        match self {
            FeatureKind::EdgeHorizontal => rects.push(WeightedRect::new(x + uw, y, uw, uh, 2.0)),
            FeatureKind::EdgeVertical => rects.push(WeightedRect::new(x, y + uh, uw, uh, 2.0)),
            FeatureKind::LineHorizontal => rects.push(WeightedRect::new(x + uw, y, uw, uh, 3.0)),
            FeatureKind::LineVertical => rects.push(WeightedRect::new(x, y + uh, uw, uh, 3.0)),
            FeatureKind::Checker => {
                rects.push(WeightedRect::new(x + uw, y, uw, uh, 2.0));
                rects.push(WeightedRect::new(x, y + uh, uw, uh, 2.0));
            }
        }
        HaarFeature::new(rects).expect("generated features are well-formed")
    }
}

/// Every feature of every kind whose anchor and unit size lie on the
/// `stride` grid (units `stride, 2·stride, …`) and which fits the window.
/// Ordered by kind, unit width, unit height, y, x. Windows under 4×4 yield none.
pub fn gen_features(window_w: u32, window_h: u32, stride: u32) -> Vec<HaarFeature> {
    let stride = stride.max(1);
    if window_w < 4 || window_h < 4 {
        return vec![];
    }
    let mut out = vec![];
    for kind in FeatureKind::ALL {
        let (a, b) = kind.units();
        for uw in (stride..=window_w / a).step_by(stride as usize) {
            for uh in (stride..=window_h / b).step_by(stride as usize) {
                for y in (0..=window_h - b * uh).step_by(stride as usize) {
                    for x in (0..=window_w - a * uw).step_by(stride as usize) {
                        out.push(kind.build(x, y, uw, uh));
                    }
                }
            }
        }
    }
    out
}
