//! Pixel rasters and the pure operations the detector and pipeline need.
//!
//! Two raster kinds exist: [`GrayImage`] (one 8-bit luminance value per pixel)
//! and [`ColorImage`] (interleaved 8-bit red, green, blue). Both are row-major
//! and immutable once built; every operation returns a new raster.

mod integral;
pub(crate) use integral::stddev_from_sums;
mod ops;
mod pnm;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use integral::{integral, window_stddev, IntegralImage, SquaredIntegralImage};
pub use ops::{crop, draw_rect, expand_rect, resize_bilinear, sample_bilinear, to_grayscale};
pub use pnm::{decode, encode, read_image, write_image, AnyImage};

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("rect ({x},{y},{w},{h}) exceeds {width}x{height} image", x = .rect.x, y = .rect.y, w = .rect.w, h = .rect.h)]
    OutOfBounds { rect: Rect, width: u32, height: u32 },
    #[error("rect has zero width or height")]
    EmptyRect,
    #[error("invalid raster: {0}")]
    Dimensions(String),
    #[error("pnm format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Axis-aligned rectangle in pixel coordinates, `(x, y)` being the top-left corner.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Rect {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl Rect {
    pub const fn new(x: u32, y: u32, w: u32, h: u32) -> Self {
        Rect { x, y, w, h }
    }

    pub fn right(&self) -> u64 {
        self.x as u64 + self.w as u64
    }

    pub fn bottom(&self) -> u64 {
        self.y as u64 + self.h as u64
    }

    pub fn area(&self) -> u64 {
        self.w as u64 * self.h as u64
    }

    /// Errors unless the rect is non-empty and lies inside a `width`×`height` raster.
    pub fn check_inside(&self, width: u32, height: u32) -> Result<(), ImageError> {
        if self.w == 0 || self.h == 0 {
            return Err(ImageError::EmptyRect);
        }
        if self.right() > width as u64 || self.bottom() > height as u64 {
            return Err(ImageError::OutOfBounds { rect: *self, width, height });
        }
        Ok(())
    }

    pub fn intersection_area(&self, other: &Rect) -> u64 {
        let x0 = self.x.max(other.x) as u64;
        let y0 = self.y.max(other.y) as u64;
        let x1 = self.right().min(other.right());
        let y1 = self.bottom().min(other.bottom());
        if x1 <= x0 || y1 <= y0 {
            0
        } else {
            (x1 - x0) * (y1 - y0)
        }
    }

    /// Intersection over union.
    pub fn iou(&self, other: &Rect) -> f64 {
        let inter = self.intersection_area(other) as f64;
        let union = self.area() as f64 + other.area() as f64 - inter;
        if union <= 0.0 {
            0.0
        } else {
            inter / union
        }
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x as f64 + self.w as f64 / 2.0, self.y as f64 + self.h as f64 / 2.0)
    }
}

/// Common view over the two raster kinds, used by the generic operations.
pub trait Raster: Sized {
    const CHANNELS: usize;

    fn width(&self) -> u32;
    fn height(&self) -> u32;
    fn data(&self) -> &[u8];
    fn from_raw(width: u32, height: u32, data: Vec<u8>) -> Result<Self, ImageError>;
}

fn check_buffer(width: u32, height: u32, channels: usize, len: usize) -> Result<(), ImageError> {
    if width == 0 || height == 0 {
        return Err(ImageError::Dimensions(format!("{width}x{height} has no pixels")));
    }
    let expected = width as usize * height as usize * channels;
    if len != expected {
        return Err(ImageError::Dimensions(format!(
            "{width}x{height}x{channels} needs {expected} bytes, got {len}"
        )));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrayImage {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self, ImageError> {
        check_buffer(width, height, 1, pixels.len())?;
        Ok(GrayImage { width, height, pixels })
    }

    /// Panics on a zero dimension.
    pub fn filled(width: u32, height: u32, value: u8) -> Self {
        Self::new(width, height, vec![value; width as usize * height as usize]).expect("non-empty raster")
    }

    /// Panics on a zero dimension.
    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> u8) -> Self {
        let mut pixels = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self::new(width, height, pixels).expect("non-empty raster")
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.pixels[y as usize * self.width as usize + x as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, v: u8) {
        self.pixels[y as usize * self.width as usize + x as usize] = v;
    }

    /// Replicates luminance into all three channels.
    pub fn to_color(&self) -> ColorImage {
        let pixels = self.pixels.iter().flat_map(|&v| [v, v, v]).collect();
        ColorImage { width: self.width, height: self.height, pixels }
    }

    pub fn map(&self, f: impl Fn(u8) -> u8) -> GrayImage {
        GrayImage { width: self.width, height: self.height, pixels: self.pixels.iter().map(|&v| f(v)).collect() }
    }
}

impl Raster for GrayImage {
    const CHANNELS: usize = 1;

    fn width(&self) -> u32 {
        self.width
    }
    fn height(&self) -> u32 {
        self.height
    }
    fn data(&self) -> &[u8] {
        &self.pixels
    }
    fn from_raw(width: u32, height: u32, data: Vec<u8>) -> Result<Self, ImageError> {
        GrayImage::new(width, height, data)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ColorImage {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl ColorImage {
    pub fn new(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self, ImageError> {
        check_buffer(width, height, 3, pixels.len())?;
        Ok(ColorImage { width, height, pixels })
    }

    /// Panics on a zero dimension.
    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Self {
        let n = width as usize * height as usize;
        let pixels = std::iter::repeat_n(rgb, n).flatten().collect();
        Self::new(width, height, pixels).expect("non-empty raster")
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> [u8; 3] {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn set(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        self.pixels[i..i + 3].copy_from_slice(&rgb);
    }

    /// Copies `src` into this image with its top-left corner at `(x, y)`, clipping at the edges.
    pub fn paste_gray(&mut self, src: &GrayImage, x: u32, y: u32) {
        for sy in 0..src.height() {
            let ty = y + sy;
            if ty >= self.height {
                break;
            }
            for sx in 0..src.width() {
                let tx = x + sx;
                if tx >= self.width {
                    break;
                }
                let v = src.get(sx, sy);
                self.set(tx, ty, [v, v, v]);
            }
        }
    }
}

impl Raster for ColorImage {
    const CHANNELS: usize = 3;

    fn width(&self) -> u32 {
        self.width
    }
    fn height(&self) -> u32 {
        self.height
    }
    fn data(&self) -> &[u8] {
        &self.pixels
    }
    fn from_raw(width: u32, height: u32, data: Vec<u8>) -> Result<Self, ImageError> {
        ColorImage::new(width, height, data)
    }
}
