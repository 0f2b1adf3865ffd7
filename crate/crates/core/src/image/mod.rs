//! Raster primitives: the float grayscale image, Gaussian scale space,
//! integral images, gradients, homography warps and exposure changes.

mod blur;
mod gradient;
mod integral;
pub mod io;
mod photometric;
mod pyramid;
mod warp;

pub use blur::{gaussian_blur, gaussian_kernel};
pub use gradient::gradient_mag_ori;
pub(crate) use gradient::gradient_unchecked;
pub use integral::IntegralImage;
pub use photometric::{adjust_exposure, apply_gain, exposure_gain};
pub use pyramid::{build_gaussian_pyramid, difference_of_gaussians, GaussianPyramid, CAMERA_SIGMA};
pub use warp::{warp_homography, Homography, Warped};

use crate::error::{Error, Result};

/// Single-channel raster, row-major, intensities nominally in `[0, 255]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize) -> Result<Self> {
        Self::filled(width, height, 0.0)
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        check_dims(width, height)?;
        Ok(Self {
            width,
            height,
            data: vec![value; width * height],
        })
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        check_dims(width, height)?;
        if data.len() != width * height {
            return Err(Error::InvalidInput(format!(
                "{}x{} image needs {} samples, got {}",
                width,
                height,
                width * height,
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite sample at index {i}")));
        }
        Ok(Self { width, height, data })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        check_dims(width, height)?;
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::from_vec(width, height, data)
    }

    /// Wraps samples produced internally; skips the finiteness scan.
    pub(crate) fn from_raw(width: usize, height: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), width * height);
        Self { width, height, data }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    /// Pixel lookup with edge-clamp replication.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> f64 {
        let xc = x.clamp(0, self.width as isize - 1) as usize;
        let yc = y.clamp(0, self.height as isize - 1) as usize;
        self.data[yc * self.width + xc]
    }

    /// Bilinear interpolation; `None` outside `[0, w-1] x [0, h-1]`.
    #[inline]
    pub fn sample_bilinear(&self, x: f64, y: f64) -> Option<f64> {
        const EPS: f64 = 1e-9;
        let max_x = (self.width - 1) as f64;
        let max_y = (self.height - 1) as f64;
        if !(x >= -EPS && y >= -EPS && x <= max_x + EPS && y <= max_y + EPS) {
            return None;
        }
        let x = x.clamp(0.0, max_x);
        let y = y.clamp(0.0, max_y);
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let top = self.get(x0, y0) * (1.0 - fx) + self.get(x1, y0) * fx;
        let bottom = self.get(x0, y1) * (1.0 - fx) + self.get(x1, y1) * fx;
        Some(top * (1.0 - fy) + bottom * fy)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GrayImage {
        Self::from_raw(self.width, self.height, self.data.iter().map(|&v| f(v)).collect())
    }

    /// `255 - v` per pixel.
    pub fn inverted(&self) -> GrayImage {
        self.map(|v| 255.0 - v)
    }

    /// Samples rounded and clamped to 8 bits.
    pub fn to_u8(&self) -> Vec<u8> {
        self.data.iter().map(|&v| v.round().clamp(0.0, 255.0) as u8).collect()
    }

    /// Keeps every second pixel in both directions (floor halving).
    pub fn decimate(&self) -> Option<GrayImage> {
        let (w, h) = (self.width / 2, self.height / 2);
        if w == 0 || h == 0 {
            return None;
        }
        let mut data = Vec::with_capacity(w * h);
        for y in 0..h {
            let row = &self.data[2 * y * self.width..];
            data.extend((0..w).map(|x| row[2 * x]));
        }
        Some(Self::from_raw(w, h, data))
    }

    /// Averages 2x2 blocks (floor halving).
    pub fn half_average(&self) -> Option<GrayImage> {
        let (w, h) = (self.width / 2, self.height / 2);
        if w == 0 || h == 0 {
            return None;
        }
        let mut data = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                let s = self.get(2 * x, 2 * y)
                    + self.get(2 * x + 1, 2 * y)
                    + self.get(2 * x, 2 * y + 1)
                    + self.get(2 * x + 1, 2 * y + 1);
                data.push(0.25 * s);
            }
        }
        Some(Self::from_raw(w, h, data))
    }

    /// Copy translated by an integer offset; uncovered pixels take `fill`.
    pub fn translated(&self, dx: isize, dy: isize, fill: f64) -> GrayImage {
        let mut out = vec![fill; self.data.len()];
        for y in 0..self.height as isize {
            let sy = y - dy;
            if sy < 0 || sy >= self.height as isize {
                continue;
            }
            for x in 0..self.width as isize {
                let sx = x - dx;
                if sx < 0 || sx >= self.width as isize {
                    continue;
                }
                out[(y as usize) * self.width + x as usize] = self.get(sx as usize, sy as usize);
            }
        }
        Self::from_raw(self.width, self.height, out)
    }

    /// ITU-R BT.601 luma from interleaved 8-bit RGB.
    pub fn from_rgb8(width: usize, height: usize, rgb: &[u8]) -> Result<Self> {
        if rgb.len() != width * height * 3 {
            return Err(Error::InvalidInput("rgb buffer length mismatch".into()));
        }
        let data = rgb
            .chunks_exact(3)
            .map(|p| 0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64)
            .collect();
        Self::from_vec(width, height, data)
    }
}

fn check_dims(width: usize, height: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidParameter(format!(
            "image dimensions must be positive, got {width}x{height}"
        )));
    }
    Ok(())
}
