use super::blur::gaussian_blur;
use super::GrayImage;
use crate::error::{Error, Result};

/// Blur assumed to be already present in a captured image.
pub const CAMERA_SIGMA: f64 = 0.5;

/// Octaves stop before either dimension would drop below this.
pub const MIN_OCTAVE_DIM: usize = 16;

/// Gaussian scale space. Level `l` of octave `o` carries absolute blur
/// `base_sigma * k^l * 2^o` in original-image pixels.
#[derive(Clone, Debug)]
pub struct GaussianPyramid {
    octaves: Vec<Vec<GrayImage>>,
    sources: Vec<(GrayImage, f64)>,
    base_sigma: f64,
    k: f64,
    requested_octaves: usize,
}

impl GaussianPyramid {
    pub fn octaves(&self) -> &[Vec<GrayImage>] {
        &self.octaves
    }

    pub fn octave_count(&self) -> usize {
        self.octaves.len()
    }

    pub fn requested_octaves(&self) -> usize {
        self.requested_octaves
    }

    pub fn levels_per_octave(&self) -> usize {
        self.octaves[0].len()
    }

    pub fn level(&self, octave: usize, level: usize) -> &GrayImage {
        &self.octaves[octave][level]
    }

    pub fn base_sigma(&self) -> f64 {
        self.base_sigma
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    /// Blur relative to the octave's own pixel grid.
    pub fn octave_sigma(&self, level: f64) -> f64 {
        self.base_sigma * self.k.powf(level)
    }

    /// Absolute blur in original-image pixels.
    pub fn sigma(&self, octave: usize, level: f64) -> f64 {
        self.octave_sigma(level) * (1u64 << octave) as f64
    }

    /// The image each octave's levels are blurred from, with its own blur
    /// in that octave's pixel units.
    pub fn octave_source(&self, octave: usize) -> (&GrayImage, f64) {
        let (img, s) = &self.sources[octave];
        (img, *s)
    }

    /// Picks the (octave, level) whose blur is closest to `scale` in
    /// original pixels, in log space.
    pub fn nearest_level(&self, scale: f64) -> (usize, usize) {
        let mut best = (0, 0);
        let mut best_err = f64::INFINITY;
        for o in 0..self.octave_count() {
            for l in 0..self.levels_per_octave() {
                let err = (self.sigma(o, l as f64) / scale).ln().abs();
                if err < best_err {
                    best_err = err;
                    best = (o, l);
                }
            }
        }
        best
    }
}

/// Builds `octaves` octaves of `levels_per_octave` Gaussian levels each.
///
/// Every level is blurred directly from its octave source by the
/// incremental sigma `sqrt(sigma_l^2 - sigma_src^2)`. The source of octave
/// 0 is the input image (camera blur [`CAMERA_SIGMA`]); the source of
/// octave `o + 1` keeps every second pixel of the level whose blur is
/// twice the octave base. The pyramid is truncated when the next octave
/// would be smaller than 16 pixels on a side.
pub fn build_gaussian_pyramid(
    img: &GrayImage,
    octaves: usize,
    levels_per_octave: usize,
    base_sigma: f64,
    k: f64,
) -> Result<GaussianPyramid> {
    if octaves < 1 {
        return Err(Error::InvalidParameter("pyramid needs at least one octave".into()));
    }
    if levels_per_octave < 3 {
        return Err(Error::InvalidParameter(format!(
            "pyramid needs at least 3 levels per octave, got {levels_per_octave}"
        )));
    }
    if !(base_sigma.is_finite() && base_sigma > 0.0 && k.is_finite() && k > 1.0) {
        return Err(Error::InvalidParameter(format!(
            "need base_sigma > 0 and k > 1, got {base_sigma} and {k}"
        )));
    }

    let downsample_level = ((2f64.ln() / k.ln()).round() as usize).clamp(1, levels_per_octave - 1);
    let mut octs = Vec::new();
    let mut sources = Vec::new();
    let mut source = img.clone();
    let mut source_sigma = CAMERA_SIGMA;
    for o in 0..octaves {
        if o > 0 && source.width().min(source.height()) < MIN_OCTAVE_DIM {
            break;
        }
        let mut levels = Vec::with_capacity(levels_per_octave);
        for l in 0..levels_per_octave {
            let target = base_sigma * k.powi(l as i32);
            let extra = target * target - source_sigma * source_sigma;
            if extra > 1e-9 {
                levels.push(gaussian_blur(&source, extra.sqrt())?);
            } else {
                levels.push(source.clone());
            }
        }
        let next_sigma = base_sigma * k.powi(downsample_level as i32) / 2.0;
        let next = levels[downsample_level].decimate();
        sources.push((source.clone(), source_sigma));
        octs.push(levels);
        match next {
            Some(n) => {
                source = n;
                source_sigma = next_sigma;
            }
            None => break,
        }
    }
    Ok(GaussianPyramid {
        octaves: octs,
        sources,
        base_sigma,
        k,
        requested_octaves: octaves,
    })
}

/// Level-to-level differences, one list per octave.
pub fn difference_of_gaussians(pyr: &GaussianPyramid) -> Vec<Vec<GrayImage>> {
    pyr.octaves()
        .iter()
        .map(|levels| {
            levels
                .windows(2)
                .map(|pair| {
                    let (lo, hi) = (&pair[0], &pair[1]);
                    let data = hi.data().iter().zip(lo.data()).map(|(a, b)| a - b).collect();
                    GrayImage::from_raw(lo.width(), lo.height(), data)
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn k3() -> f64 {
        2f64.powf(1.0 / 3.0)
    }

    #[test]
    fn octave_dimensions_halve() {
        let img = GrayImage::filled(256, 256, 10.0).unwrap();
        let pyr = build_gaussian_pyramid(&img, 4, 6, 1.6, k3()).unwrap();
        let dims: Vec<usize> = pyr.octaves().iter().map(|o| o[0].width()).collect();
        assert_eq!(dims, vec![256, 128, 64, 32]);
    }

    #[test]
    fn small_image_truncates() {
        let img = GrayImage::filled(20, 20, 10.0).unwrap();
        let pyr = build_gaussian_pyramid(&img, 4, 6, 1.6, k3()).unwrap();
        assert_eq!(pyr.octave_count(), 1);
        assert_eq!(pyr.requested_octaves(), 4);
    }

    #[test]
    fn sigma_schedule() {
        let img = GrayImage::filled(64, 64, 1.0).unwrap();
        let pyr = build_gaussian_pyramid(&img, 2, 6, 1.6, k3()).unwrap();
        assert!((pyr.sigma(0, 3.0) - 3.2).abs() < 1e-12);
        assert!((pyr.sigma(1, 0.0) - 3.2).abs() < 1e-12);
        let (_, s1) = pyr.octave_source(1);
        assert!((s1 - 1.6).abs() < 1e-12);
    }

    #[test]
    fn parameter_errors() {
        let img = GrayImage::filled(32, 32, 1.0).unwrap();
        assert!(build_gaussian_pyramid(&img, 0, 6, 1.6, k3()).is_err());
        assert!(build_gaussian_pyramid(&img, 2, 2, 1.6, k3()).is_err());
    }

    #[test]
    fn constant_pyramid_has_zero_dog() {
        let img = GrayImage::filled(64, 64, 77.0).unwrap();
        let pyr = build_gaussian_pyramid(&img, 3, 5, 1.6, k3()).unwrap();
        let dog = difference_of_gaussians(&pyr);
        assert!(dog.iter().all(|o| o.len() == 4));
        assert!(dog.iter().flatten().all(|d| d.data().iter().all(|&v| v.abs() < 1e-12)));
    }

    #[test]
    fn dog_matches_two_blur_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let img = GrayImage::from_fn(96, 80, |_, _| rng.random_range(0.0..255.0)).unwrap();
        let pyr = build_gaussian_pyramid(&img, 3, 6, 1.6, k3()).unwrap();
        let dog = difference_of_gaussians(&pyr);
        for (o, levels) in dog.iter().enumerate() {
            let (src, s_src) = pyr.octave_source(o);
            let blur_to = |s: f64| {
                let extra = s * s - s_src * s_src;
                if extra > 1e-9 {
                    gaussian_blur(src, extra.sqrt()).unwrap()
                } else {
                    src.clone()
                }
            };
            for (l, d) in levels.iter().enumerate() {
                let s = 1.6 * k3().powi(l as i32);
                let hi = blur_to(s * k3());
                let lo = blur_to(s);
                for i in 0..d.data().len() {
                    assert!((d.data()[i] - (hi.data()[i] - lo.data()[i])).abs() <= 1e-6);
                }
            }
        }
    }
}
