use super::GrayImage;
use crate::error::{Error, Result};

/// Zero-padded summed-area table of size `(w + 1) x (h + 1)`.
#[derive(Clone, Debug)]
pub struct IntegralImage {
    width: usize,
    height: usize,
    table: Vec<f64>,
}

impl IntegralImage {
    pub fn new(img: &GrayImage) -> Self {
        let (w, h) = (img.width(), img.height());
        let stride = w + 1;
        let mut table = vec![0.0; stride * (h + 1)];
        for y in 0..h {
            let mut row_sum = 0.0;
            for x in 0..w {
                row_sum += img.get(x, y);
                table[(y + 1) * stride + x + 1] = table[y * stride + x + 1] + row_sum;
            }
        }
        Self {
            width: w,
            height: h,
            table,
        }
    }

    /// Source image width.
    pub fn width(&self) -> usize {
        self.width
    }

    /// Source image height.
    pub fn height(&self) -> usize {
        self.height
    }

    /// Sum of source pixels with column `< x` and row `< y`.
    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.table[y * (self.width + 1) + x]
    }

    /// Sum over the `w x h` rectangle at `(x0, y0)`, clipped to the image.
    pub fn box_sum(&self, x0: i64, y0: i64, w: i64, h: i64) -> Result<f64> {
        if w <= 0 || h <= 0 {
            return Err(Error::InvalidParameter(format!(
                "box size must be positive, got {w}x{h}"
            )));
        }
        Ok(self.rect_sum(x0, y0, x0 + w, y0 + h))
    }

    /// Sum over columns `[x0, x1)` and rows `[y0, y1)`, clipped; empty rects give 0.
    #[inline]
    pub(crate) fn rect_sum(&self, x0: i64, y0: i64, x1: i64, y1: i64) -> f64 {
        let cx = |v: i64| v.clamp(0, self.width as i64) as usize;
        let cy = |v: i64| v.clamp(0, self.height as i64) as usize;
        let (ax, bx, ay, by) = (cx(x0), cx(x1), cy(y0), cy(y1));
        if ax >= bx || ay >= by {
            return 0.0;
        }
        self.at(bx, by) - self.at(ax, by) - self.at(bx, ay) + self.at(ax, ay)
    }

    /// Summed-area function continued to real coordinates by bilinear
    /// interpolation of the table, with the table clamped at its edges.
    #[inline]
    pub(crate) fn area_at(&self, x: f64, y: f64) -> f64 {
        let x = x.clamp(0.0, self.width as f64);
        let y = y.clamp(0.0, self.height as f64);
        let x0 = (x.floor() as usize).min(self.width.saturating_sub(1));
        let y0 = (y.floor() as usize).min(self.height.saturating_sub(1));
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let a = self.at(x0, y0);
        let b = self.at(x0 + 1, y0);
        let c = self.at(x0, y0 + 1);
        let d = self.at(x0 + 1, y0 + 1);
        (a * (1.0 - fx) + b * fx) * (1.0 - fy) + (c * (1.0 - fx) + d * fx) * fy
    }

    /// Mean intensity of the real-valued square `[cx - r, cx + r]^2` using
    /// the interpolated summed-area function.
    #[inline]
    pub(crate) fn box_mean(&self, cx: f64, cy: f64, r: f64) -> f64 {
        // Pixel i covers [i - 0.5, i + 0.5) in keypoint coordinates, i.e.
        // table coordinate i + 0.5 is the pixel center.
        let (x0, x1) = (cx + 0.5 - r, cx + 0.5 + r);
        let (y0, y1) = (cy + 0.5 - r, cy + 0.5 + r);
        let s = self.area_at(x1, y1) - self.area_at(x0, y1) - self.area_at(x1, y0) + self.area_at(x0, y0);
        s / (4.0 * r * r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn naive_prefix(img: &GrayImage, x: usize, y: usize) -> f64 {
        let mut s = 0.0;
        for yy in 0..y {
            for xx in 0..x {
                s += img.get(xx, yy);
            }
        }
        s
    }

    #[test]
    fn small_table() {
        let img = GrayImage::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let ii = IntegralImage::new(&img);
        assert_eq!(ii.at(2, 2), 10.0);
        assert_eq!(ii.box_sum(0, 0, 2, 2).unwrap(), 10.0);
        assert_eq!(ii.box_sum(1, 1, 1, 1).unwrap(), 4.0);
        assert_eq!(ii.box_sum(5, 5, 3, 3).unwrap(), 0.0);
        assert_eq!(ii.box_sum(-1, -1, 2, 2).unwrap(), 1.0);
        assert!(ii.box_sum(0, 0, 0, 1).is_err());
        assert!(ii.box_sum(0, 0, 1, -2).is_err());
    }

    #[test]
    fn zero_image_gives_zero_table() {
        let ii = IntegralImage::new(&GrayImage::new(7, 5).unwrap());
        assert!(ii.table.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn table_matches_naive_prefix_sums() {
        let mut state = 12345u64;
        let img = GrayImage::from_fn(64, 64, |_, _| {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((state >> 33) % 256) as f64
        })
        .unwrap();
        let ii = IntegralImage::new(&img);
        for y in 0..=64 {
            for x in 0..=64 {
                assert_eq!(ii.at(x, y), naive_prefix(&img, x, y));
            }
        }
    }

    #[test]
    fn box_mean_of_constant() {
        let ii = IntegralImage::new(&GrayImage::filled(20, 20, 7.0).unwrap());
        assert!((ii.box_mean(9.3, 10.7, 2.4) - 7.0).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn table_is_monotone(vals in proptest::collection::vec(0u8..=255, 48)) {
            let img = GrayImage::from_vec(8, 6, vals.iter().map(|&v| v as f64).collect()).unwrap();
            let ii = IntegralImage::new(&img);
            for y in 0..=6 {
                for x in 0..=8 {
                    prop_assert!(ii.at(x, y) >= 0.0);
                    if x > 0 { prop_assert!(ii.at(x, y) >= ii.at(x - 1, y)); }
                    if y > 0 { prop_assert!(ii.at(x, y) >= ii.at(x, y - 1)); }
                }
            }
        }
    }
}
