//! Binary PGM (P5) and PPM (P6) with 8-bit samples.

use std::fs;
use std::path::Path;

use super::{ColorImage, GrayImage, ImageError};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AnyImage {
    Gray(GrayImage),
    Color(ColorImage),
}

impl AnyImage {
    pub fn width(&self) -> u32 {
        match self {
            AnyImage::Gray(g) => g.width(),
            AnyImage::Color(c) => c.width(),
        }
    }

    pub fn height(&self) -> u32 {
        match self {
            AnyImage::Gray(g) => g.height(),
            AnyImage::Color(c) => c.height(),
        }
    }

    pub fn to_gray(&self) -> GrayImage {
        match self {
            AnyImage::Gray(g) => g.clone(),
            AnyImage::Color(c) => super::to_grayscale(c),
        }
    }

    pub fn to_color(&self) -> ColorImage {
        match self {
            AnyImage::Gray(g) => g.to_color(),
            AnyImage::Color(c) => c.clone(),
        }
    }
}

impl From<GrayImage> for AnyImage {
    fn from(g: GrayImage) -> Self {
        AnyImage::Gray(g)
    }
}

impl From<ColorImage> for AnyImage {
    fn from(c: ColorImage) -> Self {
        AnyImage::Color(c)
    }
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' {
                        break;
                    }
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u32, ImageError> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| ImageError::Format(format!("missing or invalid {what}")))
    }
}

pub fn decode(bytes: &[u8]) -> Result<AnyImage, ImageError> {
    let channels = match bytes.get(..2) {
        Some(b"P5") => 1,
        Some(b"P6") => 3,
        Some(m) => return Err(ImageError::Format(format!("unsupported magic {:?}", String::from_utf8_lossy(m)))),
        None => return Err(ImageError::Format("file too short".into())),
    };
    let mut h = Header { bytes, pos: 2 };
    let width = h.number("width")?;
    let height = h.number("height")?;
    let maxval = h.number("maxval")?;
    if maxval != 255 {
        return Err(ImageError::Format(format!("maxval {maxval} unsupported, expected 255")));
    }
    match bytes.get(h.pos) {
        Some(b) if b.is_ascii_whitespace() => h.pos += 1,
        _ => return Err(ImageError::Format("header not terminated by whitespace".into())),
    }
    let len = width as usize * height as usize * channels;
    let payload = bytes
        .get(h.pos..h.pos + len)
        .ok_or_else(|| ImageError::Format(format!("truncated payload: need {len} bytes, have {}", bytes.len() - h.pos)))?;
    if channels == 1 {
        Ok(AnyImage::Gray(GrayImage::new(width, height, payload.to_vec())?))
    } else {
        Ok(AnyImage::Color(ColorImage::new(width, height, payload.to_vec())?))
    }
}

/// Canonical encoding: `P5`/`P6`, single-newline separated header, maxval 255.
pub fn encode(img: &AnyImage) -> Vec<u8> {
    let (magic, w, h, data) = match img {
        AnyImage::Gray(g) => ("P5", g.width(), g.height(), g.pixels()),
        AnyImage::Color(c) => ("P6", c.width(), c.height(), c.pixels()),
    };
    let mut out = format!("{magic}\n{w} {h}\n255\n").into_bytes();
    out.extend_from_slice(data);
    out
}

pub fn read_image(path: impl AsRef<Path>) -> Result<AnyImage, ImageError> {
    decode(&fs::read(path)?)
}

pub fn write_image(img: &AnyImage, path: impl AsRef<Path>) -> Result<(), ImageError> {
    fs::write(path, encode(img))?;
    Ok(())
}
