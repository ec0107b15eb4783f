use super::{ColorImage, GrayImage, ImageError, Raster, Rect};

/// BT.601 luma, rounded to nearest.
pub fn to_grayscale(img: &ColorImage) -> GrayImage {
    let pixels = img
        .pixels()
        .chunks_exact(3)
        .map(|p| {
            let y = 0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64;
            y.round().clamp(0.0, 255.0) as u8
        })
        .collect();
    GrayImage::new(img.width(), img.height(), pixels).expect("same dimensions as a valid image")
}

/// Grows `r` by `margin` × its size on every side, clamped to the raster.
pub fn expand_rect(r: Rect, margin: f64, width: u32, height: u32) -> Rect {
    let dx = (margin.max(0.0) * r.w as f64).round() as u64;
    let dy = (margin.max(0.0) * r.h as f64).round() as u64;
    let x0 = (r.x as u64).saturating_sub(dx);
    let y0 = (r.y as u64).saturating_sub(dy);
    let x1 = (r.right() + dx).min(width as u64);
    let y1 = (r.bottom() + dy).min(height as u64);
    Rect::new(x0 as u32, y0 as u32, (x1 - x0) as u32, (y1 - y0) as u32)
}

/// Copies the pixels under `r`, optionally expanded by `margin` (see [`expand_rect`]).
pub fn crop<R: Raster>(img: &R, r: Rect, margin: f64) -> Result<R, ImageError> {
    r.check_inside(img.width(), img.height())?;
    let e = expand_rect(r, margin, img.width(), img.height());
    let ch = R::CHANNELS;
    let stride = img.width() as usize * ch;
    let mut out = Vec::with_capacity(e.area() as usize * ch);
    for y in e.y..e.y + e.h {
        let start = y as usize * stride + e.x as usize * ch;
        out.extend_from_slice(&img.data()[start..start + e.w as usize * ch]);
    }
    R::from_raw(e.w, e.h, out)
}

/// Maps destination index `i` onto the source axis (pixel centers aligned), clamped.
#[inline]
fn source_coord(i: u32, src_len: u32, dst_len: u32) -> (usize, usize, f64) {
    let s = ((i as f64 + 0.5) * src_len as f64 / dst_len as f64 - 0.5).clamp(0.0, (src_len - 1) as f64);
    let i0 = s.floor() as usize;
    let i1 = (i0 + 1).min(src_len as usize - 1);
    (i0, i1, s - i0 as f64)
}

/// Bilinear resample to `w`×`h` as real values, without quantization.
pub fn sample_bilinear(img: &GrayImage, w: u32, h: u32) -> Vec<f64> {
    assert!(w >= 1 && h >= 1, "target size must be at least 1x1");
    let sw = img.width() as usize;
    let px = img.pixels();
    let xs: Vec<_> = (0..w).map(|x| source_coord(x, img.width(), w)).collect();
    let mut out = Vec::with_capacity(w as usize * h as usize);
    for y in 0..h {
        let (y0, y1, fy) = source_coord(y, img.height(), h);
        for &(x0, x1, fx) in &xs {
            let top = px[y0 * sw + x0] as f64 * (1.0 - fx) + px[y0 * sw + x1] as f64 * fx;
            let bot = px[y1 * sw + x0] as f64 * (1.0 - fx) + px[y1 * sw + x1] as f64 * fx;
            out.push(top * (1.0 - fy) + bot * fy);
        }
    }
    out
}

/// Bilinear resize with edge clamping, rounded back to 8 bits.
pub fn resize_bilinear(img: &GrayImage, w: u32, h: u32) -> GrayImage {
    let pixels = sample_bilinear(img, w, h).into_iter().map(|v| v.round().clamp(0.0, 255.0) as u8).collect();
    GrayImage::new(w, h, pixels).expect("w, h >= 1")
}

/// Paints the border of `r` inward with the given thickness; parts outside the image are clipped.
pub fn draw_rect(img: &ColorImage, r: Rect, color: [u8; 3], thickness: u32) -> ColorImage {
    let mut out = img.clone();
    let t = thickness.max(1) as u64;
    let x_end = r.right().min(img.width() as u64);
    let y_end = r.bottom().min(img.height() as u64);
    for y in r.y as u64..y_end {
        for x in r.x as u64..x_end {
            let on_border = x < r.x as u64 + t || y < r.y as u64 + t || x + t >= r.right() || y + t >= r.bottom();
            if on_border {
                out.set(x as u32, y as u32, color);
            }
        }
    }
    out
}
