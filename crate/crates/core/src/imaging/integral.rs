use super::{GrayImage, ImageError, Rect};

/// Summed-area table: entry `(x, y)` holds the sum of all pixels strictly above
/// and left of `(x, y)`, so the table is one larger than the source in each
/// dimension and its first row and column are zero.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntegralImage {
    width: u32,
    height: u32,
    table: Vec<u64>,
}

/// Same layout as [`IntegralImage`], accumulating squared pixel values.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SquaredIntegralImage(IntegralImage);

impl IntegralImage {
    fn build(img: &GrayImage, square: bool) -> Self {
        let (w, h) = (img.width() as usize, img.height() as usize);
        let stride = w + 1;
        let mut table = vec![0u64; stride * (h + 1)];
        for y in 0..h {
            let row = &img.pixels()[y * w..(y + 1) * w];
            let mut run = 0u64;
            for (x, &p) in row.iter().enumerate() {
                let p = p as u64;
                run += if square { p * p } else { p };
                table[(y + 1) * stride + x + 1] = table[y * stride + x + 1] + run;
            }
        }
        IntegralImage { width: img.width(), height: img.height(), table }
    }

    /// Width of the source image (the table is one wider).
    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    /// Table entry; panics outside `0..=width` × `0..=height`.
    #[inline]
    pub fn at(&self, x: u32, y: u32) -> u64 {
        assert!(x <= self.width && y <= self.height, "table index ({x},{y}) out of range");
        self.table[y as usize * (self.width as usize + 1) + x as usize]
    }

    pub fn rect_sum(&self, r: Rect) -> Result<u64, ImageError> {
        r.check_inside(self.width, self.height)?;
        Ok(self.sum_unchecked(r.x, r.y, r.w, r.h))
    }

    /// Four-lookup rectangle sum without the bounds check.
    #[inline]
    pub(crate) fn sum_unchecked(&self, x: u32, y: u32, w: u32, h: u32) -> u64 {
        let stride = self.width as usize + 1;
        let (x0, y0) = (x as usize, y as usize);
        let (x1, y1) = (x0 + w as usize, y0 + h as usize);
        let t = &self.table;
        (t[y1 * stride + x1] + t[y0 * stride + x0]) - (t[y0 * stride + x1] + t[y1 * stride + x0])
    }
}

impl SquaredIntegralImage {
    pub fn width(&self) -> u32 {
        self.0.width
    }

    pub fn height(&self) -> u32 {
        self.0.height
    }

    #[inline]
    pub fn at(&self, x: u32, y: u32) -> u64 {
        self.0.at(x, y)
    }

    pub fn rect_sum(&self, r: Rect) -> Result<u64, ImageError> {
        self.0.rect_sum(r)
    }

    #[inline]
    pub(crate) fn sum_unchecked(&self, x: u32, y: u32, w: u32, h: u32) -> u64 {
        self.0.sum_unchecked(x, y, w, h)
    }
}

/// Plain and squared summed-area tables of `img`.
pub fn integral(img: &GrayImage) -> (IntegralImage, SquaredIntegralImage) {
    (IntegralImage::build(img, false), SquaredIntegralImage(IntegralImage::build(img, true)))
}

/// Population standard deviation of the pixels under `r`.
pub fn window_stddev(ii: &IntegralImage, sq: &SquaredIntegralImage, r: Rect) -> Result<f64, ImageError> {
    let sum = ii.rect_sum(r)?;
    let sq_sum = sq.rect_sum(r)?;
    Ok(stddev_from_sums(sum, sq_sum, r.area()))
}

#[inline]
pub(crate) fn stddev_from_sums(sum: u64, sq_sum: u64, area: u64) -> f64 {
    let area = area as f64;
    let mean = sum as f64 / area;
    (sq_sum as f64 / area - mean * mean).max(0.0).sqrt()
}
