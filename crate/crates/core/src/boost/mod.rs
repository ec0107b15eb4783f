//! Discrete AdaBoost over Haar decision stumps and attentional-cascade assembly.
//!
//! Feature values are computed with exactly the arithmetic the detector uses
//! at scale 1, so a trained cascade makes the same decisions on the training
//! windows as the booster did. Thresholds and α values are rounded to the
//! precision the XML writer emits before they are used, which makes the
//! saved file reproduce in-memory decisions exactly.

mod features;
mod samples;

use rayon::prelude::*;
use thiserror::Error;

use crate::cascade_xml::format_real;
use crate::haar::{norm_factor_unchecked, normalization_rect, Cascade, CascadeError, HaarFeature, ScaledFeature, Stage, WeakTree};
use crate::imaging::{integral, GrayImage, ImageError};

pub use features::{gen_features, FeatureKind};
pub use samples::{load_windows, WindowSource};

/// ε is clamped to at least this before computing α.
pub const MIN_EPSILON: f64 = 1e-10;
/// Stage growth gives up after this many stumps even if f_max is not met.
pub const MAX_STUMPS_PER_STAGE: usize = 200;
/// Fewer bootstrapped negatives than this ends training.
pub const MIN_NEGATIVES: usize = 10;
const TIE: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum BoostError {
    #[error("training needs at least one positive and one negative sample")]
    MissingLabel,
    #[error("sample {index} is {got:?}, expected {expected:?}")]
    SampleSize { index: usize, expected: (u32, u32), got: (u32, u32) },
    #[error("no feature set to train with")]
    NoFeatures,
    #[error("no weak learner beats chance (epsilon {epsilon:.6})")]
    NoWeakLearner { epsilon: f64 },
    #[error("invalid targets: {0}")]
    Targets(String),
    #[error("only {0} negatives available, need at least {MIN_NEGATIVES}")]
    TooFewNegatives(usize),
    #[error(transparent)]
    Cascade(#[from] CascadeError),
    #[error(transparent)]
    Image(#[from] ImageError),
}

/// Rounds to the precision used in cascade files.
fn quantize(v: f64) -> f64 {
    format_real(v).parse().expect("format_real output parses for finite input")
}

/// Largest file-representable value not above `v`.
fn quantize_down(v: f64) -> f64 {
    let q = quantize(v);
    if q <= v {
        q
    } else {
        quantize(v - v.abs().max(1e-300) * 1e-9)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub window: GrayImage,
    /// +1 for a positive, −1 for a negative.
    pub label: i8,
}

impl Sample {
    pub fn positive(window: GrayImage) -> Self {
        Sample { window, label: 1 }
    }

    pub fn negative(window: GrayImage) -> Self {
        Sample { window, label: -1 }
    }

    pub fn is_positive(&self) -> bool {
        self.label > 0
    }
}

/// Normalized feature value of a whole window, as the detector computes it at scale 1.
pub fn feature_value(feature: &HaarFeature, window: &GrayImage) -> f64 {
    let (ii, sq) = integral(window);
    let norm = norm_factor_unchecked(&ii, &sq, normalization_rect(window.width(), window.height(), 1.0), 0, 0);
    ScaledFeature::new(feature, 1.0, window.width(), window.height()).raw_unchecked(&ii, 0, 0) / norm
}

/// Samples with every feature pre-evaluated and pre-sorted.
/// Memory is `features × samples` values plus as many sort indices.
pub struct TrainingSet {
    features: Vec<HaarFeature>,
    labels: Vec<bool>,
    /// Feature-major: `values[f * n + i]`.
    values: Vec<f64>,
    order: Vec<u32>,
}

impl TrainingSet {
    pub fn new(samples: &[Sample], features: Vec<HaarFeature>) -> Result<Self, BoostError> {
        if features.is_empty() {
            return Err(BoostError::NoFeatures);
        }
        let Some(first) = samples.first() else { return Err(BoostError::MissingLabel) };
        let expected = (first.window.width(), first.window.height());
        for (index, s) in samples.iter().enumerate() {
            let got = (s.window.width(), s.window.height());
            if got != expected {
                return Err(BoostError::SampleSize { index, expected, got });
            }
        }
        let norm_rect = normalization_rect(expected.0, expected.1, 1.0);
        let tables: Vec<_> = samples
            .par_iter()
            .map(|s| {
                let (ii, sq) = integral(&s.window);
                let norm = norm_factor_unchecked(&ii, &sq, norm_rect, 0, 0);
                (ii, norm)
            })
            .collect();
        let n = samples.len();
        let per_feature: Vec<(Vec<f64>, Vec<u32>)> = features
            .par_iter()
            .map(|f| {
                let sf = ScaledFeature::new(f, 1.0, expected.0, expected.1);
                let vals: Vec<f64> = tables.iter().map(|(ii, norm)| sf.raw_unchecked(ii, 0, 0) / norm).collect();
                let mut idx: Vec<u32> = (0..n as u32).collect();
                idx.sort_by(|&a, &b| vals[a as usize].total_cmp(&vals[b as usize]).then(a.cmp(&b)));
                (vals, idx)
            })
            .collect();
        let mut values = Vec::with_capacity(features.len() * n);
        let mut order = Vec::with_capacity(features.len() * n);
        for (v, o) in per_feature {
            values.extend(v);
            order.extend(o);
        }
        Ok(TrainingSet { features, labels: samples.iter().map(Sample::is_positive).collect(), values, order })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn features(&self) -> &[HaarFeature] {
        &self.features
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn value(&self, feature: usize, sample: usize) -> f64 {
        self.values[feature * self.len() + sample]
    }

    fn column(&self, feature: usize) -> &[f64] {
        let n = self.len();
        &self.values[feature * n..(feature + 1) * n]
    }

    fn sorted(&self, feature: usize) -> &[u32] {
        let n = self.len();
        &self.order[feature * n..(feature + 1) * n]
    }

    /// Initial weights: ½m per positive and ½l per negative.
    pub fn initial_weights(&self) -> Result<Vec<f64>, BoostError> {
        let m = self.labels.iter().filter(|&&l| l).count();
        let l = self.len() - m;
        if m == 0 || l == 0 {
            return Err(BoostError::MissingLabel);
        }
        Ok(self.labels.iter().map(|&p| if p { 0.5 / m as f64 } else { 0.5 / l as f64 }).collect())
    }
}

/// Which side of the threshold is classified positive.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Polarity {
    /// `value ≥ threshold` ⇒ positive.
    Above,
    /// `value < threshold` ⇒ positive.
    Below,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Stump {
    /// Index into the training feature list.
    pub feature: usize,
    pub threshold: f64,
    pub polarity: Polarity,
}

impl Stump {
    pub fn predict(&self, value: f64) -> bool {
        (value >= self.threshold) == (self.polarity == Polarity::Above)
    }
}

/// Minimum weighted error over all cuts of one feature. Cuts are tried in
/// ascending threshold order, `Above` before `Below`; a later cut must beat
/// the incumbent by more than 10⁻¹² to replace it.
fn best_for_feature(set: &TrainingSet, f: usize, weights: &[f64], wp: f64, wn: f64) -> (f64, f64, Polarity) {
    let vals = set.column(f);
    let order = set.sorted(f);
    let n = order.len();
    let mut best = (f64::INFINITY, 0.0, Polarity::Above);
    let (mut below_p, mut below_n) = (0.0, 0.0);
    for k in 0..=n {
        let cut = if k == 0 {
            Some(vals[order[0] as usize] - 1.0)
        } else if k == n {
            Some(vals[order[n - 1] as usize] + 1.0)
        } else {
            let (lo, hi) = (vals[order[k - 1] as usize], vals[order[k] as usize]);
            (lo < hi).then(|| {
                let mid = lo + (hi - lo) / 2.0;
                if mid > lo { mid } else { hi }
            })
        };
        if let Some(t) = cut {
            for (pol, err) in [(Polarity::Above, below_p + (wn - below_n)), (Polarity::Below, below_n + (wp - below_p))] {
                if err < best.0 - TIE {
                    best = (err, t, pol);
                }
            }
        }
        if k < n {
            let i = order[k] as usize;
            if set.labels[i] {
                below_p += weights[i];
            } else {
                below_n += weights[i];
            }
        }
    }
    best
}

/// Globally best stump and its weighted error. Ties (within 10⁻¹²) go to
/// the lowest feature index, then the lowest threshold.
pub fn best_stump(set: &TrainingSet, weights: &[f64]) -> (Stump, f64) {
    let (mut wp, mut wn) = (0.0, 0.0);
    for (i, &p) in set.labels.iter().enumerate() {
        if p {
            wp += weights[i];
        } else {
            wn += weights[i];
        }
    }
    let per_feature: Vec<_> = (0..set.features.len()).into_par_iter().map(|f| best_for_feature(set, f, weights, wp, wn)).collect();
    let mut best = (f64::INFINITY, Stump { feature: 0, threshold: 0.0, polarity: Polarity::Above });
    for (f, (err, threshold, polarity)) in per_feature.into_iter().enumerate() {
        if err < best.0 - TIE {
            best = (err, Stump { feature: f, threshold, polarity });
        }
    }
    (best.1, best.0)
}

/// α = ½·ln((1−ε)/ε) with ε clamped to [10⁻¹⁰, 0.5]; zero at chance level.
pub fn alpha_for_error(epsilon: f64) -> f64 {
    let e = epsilon.clamp(MIN_EPSILON, 0.5);
    (0.5 * ((1.0 - e) / e).ln()).max(0.0)
}

/// One reweighting step: wᵢ ← wᵢ·exp(−α·yᵢ·h(xᵢ)), renormalized.
/// `correct[i]` says whether the weak learner got sample `i` right.
pub fn adaboost_round(weights: &[f64], correct: &[bool], epsilon: f64) -> Result<(f64, Vec<f64>), BoostError> {
    if epsilon >= 0.5 {
        return Err(BoostError::NoWeakLearner { epsilon });
    }
    let alpha = alpha_for_error(epsilon);
    Ok((alpha, reweight(weights, correct, alpha)))
}

fn reweight(weights: &[f64], correct: &[bool], alpha: f64) -> Vec<f64> {
    let (down, up) = ((-alpha).exp(), alpha.exp());
    let mut w: Vec<f64> = weights.iter().zip(correct).map(|(w, &c)| w * if c { down } else { up }).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    w
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeakLearner {
    pub stump: Stump,
    pub feature: HaarFeature,
    pub alpha: f64,
    /// Weighted error when the stump was chosen.
    pub epsilon: f64,
}

impl WeakLearner {
    pub fn tree(&self) -> WeakTree {
        let (left, right) = match self.stump.polarity {
            Polarity::Above => (0.0, self.alpha),
            Polarity::Below => (self.alpha, 0.0),
        };
        WeakTree::stump(self.feature.clone(), self.stump.threshold, left, right)
    }
}

/// Weighted vote of stumps: positive iff Σ αₜ·hₜ(x) ≥ θ with hₜ ∈ {0, 1}.
#[derive(Clone, Debug, PartialEq)]
pub struct StrongClassifier {
    pub learners: Vec<WeakLearner>,
    pub theta: f64,
}

impl StrongClassifier {
    /// ½·Σ αₜ.
    pub fn default_theta(&self) -> f64 {
        0.5 * self.learners.iter().map(|l| l.alpha).sum::<f64>()
    }

    pub fn score(&self, window: &GrayImage) -> f64 {
        self.learners.iter().map(|l| if l.stump.predict(feature_value(&l.feature, window)) { l.alpha } else { 0.0 }).sum()
    }

    pub fn predict(&self, window: &GrayImage) -> bool {
        self.score(window) >= self.theta
    }

    pub fn to_stage(&self) -> Stage {
        Stage { trees: self.learners.iter().map(WeakLearner::tree).collect(), threshold: self.theta }
    }
}

/// Per-round record kept by [`Booster`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RoundInfo {
    pub epsilon: f64,
    pub alpha: f64,
    /// Sum of the weights after renormalization.
    pub weight_sum: f64,
}

/// Incremental AdaBoost state over a [`TrainingSet`].
pub struct Booster<'a> {
    set: &'a TrainingSet,
    weights: Vec<f64>,
    learners: Vec<WeakLearner>,
    rounds: Vec<RoundInfo>,
    /// Running Σ αₜ·hₜ per sample, accumulated in round order.
    scores: Vec<f64>,
}

impl<'a> Booster<'a> {
    pub fn new(set: &'a TrainingSet) -> Result<Self, BoostError> {
        let weights = set.initial_weights()?;
        Ok(Booster { set, weights, learners: vec![], rounds: vec![], scores: vec![0.0; set.len()] })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn learners(&self) -> &[WeakLearner] {
        &self.learners
    }

    pub fn rounds(&self) -> &[RoundInfo] {
        &self.rounds
    }

    /// Current strong scores of the training samples.
    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    /// Adds the best stump for the current weights and returns its ε.
    pub fn step(&mut self) -> Result<f64, BoostError> {
        let (mut stump, _) = best_stump(self.set, &self.weights);
        stump.threshold = quantize(stump.threshold);
        let preds: Vec<bool> = (0..self.set.len()).map(|i| stump.predict(self.set.value(stump.feature, i))).collect();
        let correct: Vec<bool> = preds.iter().zip(&self.set.labels).map(|(p, l)| p == l).collect();
        let epsilon: f64 = self.weights.iter().zip(&correct).filter(|(_, c)| !**c).map(|(w, _)| w).sum();
        if epsilon >= 0.5 {
            return Err(BoostError::NoWeakLearner { epsilon });
        }
        let alpha = quantize(alpha_for_error(epsilon));
        self.weights = reweight(&self.weights, &correct, alpha);
        for (s, p) in self.scores.iter_mut().zip(&preds) {
            *s += if *p { alpha } else { 0.0 };
        }
        self.rounds.push(RoundInfo { epsilon, alpha, weight_sum: self.weights.iter().sum() });
        self.learners.push(WeakLearner { stump, feature: self.set.features[stump.feature].clone(), alpha, epsilon });
        Ok(epsilon)
    }

    pub fn classifier(&self) -> StrongClassifier {
        let mut sc = StrongClassifier { learners: self.learners.clone(), theta: 0.0 };
        sc.theta = sc.default_theta();
        sc
    }
}

/// Runs up to `rounds` boosting rounds, stopping early after a perfect stump
/// (ε = 0) or when no stump beats chance. Fails only if the very first
/// round finds nothing better than chance.
pub fn train_strong(set: &TrainingSet, rounds: usize) -> Result<(StrongClassifier, Vec<RoundInfo>), BoostError> {
    let mut b = Booster::new(set)?;
    for _ in 0..rounds {
        match b.step() {
            Ok(e) if e == 0.0 => break,
            Ok(_) => {}
            Err(e) if b.learners.is_empty() => return Err(e),
            Err(_) => break,
        }
    }
    Ok((b.classifier(), b.rounds))
}

/// Largest θ such that at least ⌈d_min·n⌉ of `scores` are ≥ θ.
pub fn threshold_for_rate(scores: &[f64], d_min: f64) -> f64 {
    if scores.is_empty() {
        return f64::NEG_INFINITY;
    }
    let mut s = scores.to_vec();
    s.sort_by(|a, b| b.total_cmp(a));
    let k = ((d_min * s.len() as f64 - 1e-9).ceil() as usize).clamp(1, s.len());
    s[k - 1]
}

/// θ for `sc` keeping the true-positive rate on `positives` at or above `d_min`.
pub fn adjust_threshold(sc: &StrongClassifier, positives: &[GrayImage], d_min: f64) -> f64 {
    let scores: Vec<f64> = positives.iter().map(|p| sc.score(p)).collect();
    threshold_for_rate(&scores, d_min)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CascadeTargets {
    /// Minimum per-stage true-positive rate.
    pub d_min: f64,
    /// Maximum per-stage false-positive rate.
    pub f_max: f64,
    /// Overall false-positive goal.
    pub f_target: f64,
    pub max_stages: usize,
}

impl Default for CascadeTargets {
    fn default() -> Self {
        CascadeTargets { d_min: 0.99, f_max: 0.5, f_target: 0.125, max_stages: 10 }
    }
}

impl CascadeTargets {
    pub fn validate(&self) -> Result<(), BoostError> {
        let bad = |m: &str| Err(BoostError::Targets(m.into()));
        if !(self.d_min > 0.0 && self.d_min <= 1.0) {
            return bad("d_min must be in (0, 1]");
        }
        if !(self.f_max > 0.0 && self.f_max < 1.0) {
            return bad("f_max must be in (0, 1)");
        }
        if !(self.f_target > 0.0 && self.f_target < 1.0) {
            return bad("F_target must be in (0, 1)");
        }
        if self.max_stages == 0 {
            return bad("max_stages must be at least 1");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BuildStatus {
    /// Cumulative false-positive rate reached the target.
    Complete,
    /// Too few negatives survived to train another stage.
    NegativesExhausted,
    MaxStages,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StageReport {
    pub stumps: usize,
    /// Measured on the training positives.
    pub tpr: f64,
    /// Measured on the negatives this stage was trained against.
    pub fpr: f64,
    pub negatives: usize,
}

#[derive(Clone, Debug)]
pub struct CascadeOutcome {
    pub cascade: Cascade,
    pub status: BuildStatus,
    pub stages: Vec<StageReport>,
    /// Product of the per-stage false-positive rates.
    pub cumulative_fpr: f64,
}

/// Stage threshold that keeps the TPR target: halfway between the cut score
/// and the next lower positive score, rounded down to file precision.
fn stage_threshold(pos_scores: &[f64], d_min: f64) -> f64 {
    let theta = threshold_for_rate(pos_scores, d_min);
    let lower = pos_scores.iter().copied().filter(|&s| s < theta).fold(f64::NEG_INFINITY, f64::max);
    let mid = if lower.is_finite() { lower + (theta - lower) / 2.0 } else { theta - 0.5 * theta.abs().max(1e-3) };
    quantize_down(mid)
}

/// Trains stages one stump at a time until each stage meets `f_max` on the
/// surviving negatives, bootstrapping negatives between stages.
pub fn build_cascade(
    pos: &[GrayImage],
    neg_pool: &[GrayImage],
    targets: &CascadeTargets,
    features: &[HaarFeature],
) -> Result<CascadeOutcome, BoostError> {
    targets.validate()?;
    if pos.is_empty() {
        return Err(BoostError::MissingLabel);
    }
    if neg_pool.len() < MIN_NEGATIVES {
        return Err(BoostError::TooFewNegatives(neg_pool.len()));
    }
    let (w, h) = (pos[0].width(), pos[0].height());
    let mut remaining: Vec<usize> = (0..neg_pool.len()).collect();
    let mut stages: Vec<Stage> = vec![];
    let mut reports = vec![];
    let mut cumulative = 1.0;
    let mut status = BuildStatus::MaxStages;

    for _ in 0..targets.max_stages {
        if remaining.len() < MIN_NEGATIVES {
            status = BuildStatus::NegativesExhausted;
            break;
        }
        let samples: Vec<Sample> = pos
            .iter()
            .map(|p| Sample::positive(p.clone()))
            .chain(remaining.iter().map(|&i| Sample::negative(neg_pool[i].clone())))
            .collect();
        let set = TrainingSet::new(&samples, features.to_vec())?;
        let mut booster = Booster::new(&set)?;
        let m = pos.len();
        loop {
            let eps = match booster.step() {
                Ok(e) => e,
                Err(e) if booster.learners().is_empty() => return Err(e),
                Err(_) => break,
            };
            let scores = booster.scores();
            let thr = stage_threshold(&scores[..m], targets.d_min);
            let fpr = scores[m..].iter().filter(|&&s| s >= thr).count() as f64 / remaining.len() as f64;
            if fpr <= targets.f_max || eps == 0.0 || booster.learners().len() >= MAX_STUMPS_PER_STAGE {
                break;
            }
        }
        let scores = booster.scores();
        let thr = stage_threshold(&scores[..m], targets.d_min);
        let tpr = scores[..m].iter().filter(|&&s| s >= thr).count() as f64 / m as f64;
        let survivors: Vec<usize> = remaining.iter().zip(&scores[m..]).filter(|(_, &s)| s >= thr).map(|(&i, _)| i).collect();
        let fpr = survivors.len() as f64 / remaining.len() as f64;
        let mut sc = booster.classifier();
        sc.theta = thr;
        stages.push(sc.to_stage());
        reports.push(StageReport { stumps: sc.learners.len(), tpr, fpr, negatives: remaining.len() });
        cumulative *= fpr;
        remaining = survivors;
        if cumulative <= targets.f_target {
            status = BuildStatus::Complete;
            break;
        }
    }
    Ok(CascadeOutcome { cascade: Cascade::new(w, h, stages)?, status, stages: reports, cumulative_fpr: cumulative })
}
