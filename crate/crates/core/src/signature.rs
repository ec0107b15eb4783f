//! Normalized 32×32 luminance templates used to match faces against watchlists.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imaging::{sample_bilinear, GrayImage};

pub const SIDE: u32 = 32;
pub const LEN: usize = (SIDE * SIDE) as usize;
pub const DEFAULT_TAU: f64 = 0.9;
/// Smallest crop side accepted.
pub const MIN_CROP: u32 = 2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SignatureError {
    #[error("crop is {0}x{1}, need at least {MIN_CROP}x{MIN_CROP}")]
    TooSmall(u32, u32),
    #[error("crop has no contrast (zero variance)")]
    Degenerate,
    #[error("signature must have {LEN} components, got {0}")]
    Length(usize),
    #[error("signature component {0} is not finite")]
    NonFinite(usize),
    #[error("signature is not normalized (mean {mean:.3e}, norm {norm:.6})")]
    NotNormalized { mean: f64, norm: f64 },
}

/// Zero-mean, unit-norm template. Serializes as a plain array of numbers.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Signature(Vec<f64>);

impl Signature {
    /// Resamples `crop` to 32×32 (bilinear, kept as reals), then centers and normalizes.
    pub fn from_crop(crop: &GrayImage) -> Result<Self, SignatureError> {
        if crop.width() < MIN_CROP || crop.height() < MIN_CROP {
            return Err(SignatureError::TooSmall(crop.width(), crop.height()));
        }
        let mut v = sample_bilinear(crop, SIDE, SIDE);
        let mean = v.iter().sum::<f64>() / LEN as f64;
        v.iter_mut().for_each(|x| *x -= mean);
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-9 {
            return Err(SignatureError::Degenerate);
        }
        v.iter_mut().for_each(|x| *x /= norm);
        Ok(Signature(v))
    }

    /// Validates externally supplied components (e.g. from the wire).
    pub fn from_components(v: Vec<f64>) -> Result<Self, SignatureError> {
        if v.len() != LEN {
            return Err(SignatureError::Length(v.len()));
        }
        if let Some(i) = v.iter().position(|x| !x.is_finite()) {
            return Err(SignatureError::NonFinite(i));
        }
        let mean = v.iter().sum::<f64>() / LEN as f64;
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if mean.abs() > 1e-3 || (norm - 1.0).abs() > 1e-3 {
            return Err(SignatureError::NotNormalized { mean, norm });
        }
        Ok(Signature(v))
    }

    pub fn components(&self) -> &[f64] {
        &self.0
    }

    pub fn similarity(&self, other: &Signature) -> f64 {
        similarity(self, other)
    }
}

impl std::ops::Neg for &Signature {
    type Output = Signature;
    fn neg(self) -> Signature {
        Signature(self.0.iter().map(|x| -x).collect())
    }
}

impl<'de> Deserialize<'de> for Signature {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Signature::from_components(Vec::<f64>::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

pub fn signature(crop: &GrayImage) -> Result<Signature, SignatureError> {
    Signature::from_crop(crop)
}

/// Dot product, clamped to [−1, 1] against rounding.
pub fn similarity(a: &Signature, b: &Signature) -> f64 {
    let dot: f64 = a.0.iter().zip(&b.0).map(|(x, y)| x * y).sum();
    if (dot.abs() - 1.0).abs() < 1e-12 {
        return dot.signum();
    }
    dot.clamp(-1.0, 1.0)
}

/// `similarity(a, b) ≥ tau`.
pub fn matches(a: &Signature, b: &Signature, tau: f64) -> bool {
    similarity(a, b) >= tau
}
