//! Building blocks for the screening pipeline: pixel rasters and integral
//! images, Haar cascade evaluation and multi-scale detection, the XML model
//! interchange format, AdaBoost cascade training, and face signatures.

pub mod boost;
pub mod cascade_xml;
pub mod haar;
pub mod imaging;
pub mod signature;
pub mod synthetic;

pub use haar::{Cascade, DetectParams};
pub use imaging::{ColorImage, GrayImage, Rect};
pub use signature::Signature;
