use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{adjust_exposure, gaussian_blur, warp_homography, GrayImage, Homography};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionFamily {
    Exposure,
    Viewpoint,
    Rotation,
    Scale,
    AloiIllumDir,
    AloiIllumColor,
    AloiView,
    AloiStereo,
}

impl ConditionFamily {
    pub const SYNTHETIC: [ConditionFamily; 4] = [
        ConditionFamily::Exposure,
        ConditionFamily::Viewpoint,
        ConditionFamily::Rotation,
        ConditionFamily::Scale,
    ];

    pub const ALOI: [ConditionFamily; 4] = [
        ConditionFamily::AloiIllumDir,
        ConditionFamily::AloiIllumColor,
        ConditionFamily::AloiView,
        ConditionFamily::AloiStereo,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            ConditionFamily::Exposure => "exposure",
            ConditionFamily::Viewpoint => "viewpoint",
            ConditionFamily::Rotation => "rotation",
            ConditionFamily::Scale => "scale",
            ConditionFamily::AloiIllumDir => "aloi_illum_dir",
            ConditionFamily::AloiIllumColor => "aloi_illum_color",
            ConditionFamily::AloiView => "aloi_view",
            ConditionFamily::AloiStereo => "aloi_stereo",
        }
    }

    pub fn is_synthetic(self) -> bool {
        Self::SYNTHETIC.contains(&self)
    }

    /// Parameter grid used when a config names the family without one.
    pub fn default_parameters(self) -> Vec<f64> {
        match self {
            ConditionFamily::Exposure => vec![-7.0, -4.0, 4.0, 7.0],
            ConditionFamily::Viewpoint => vec![-60.0, -40.0, -20.0, 20.0, 40.0, 60.0],
            ConditionFamily::Rotation => vec![15.0, 30.0, 45.0, 90.0],
            ConditionFamily::Scale => vec![0.5, 0.71, 1.41, 2.0],
            _ => Vec::new(),
        }
    }
}

impl fmt::Display for ConditionFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for ConditionFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::SYNTHETIC
            .into_iter()
            .chain(Self::ALOI)
            .find(|f| f.tag() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown condition family {s:?}")))
    }
}

/// One test condition relative to a reference image.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionSpec {
    pub family: ConditionFamily,
    /// Report label, e.g. `+4`, `-20`, `l3c2`.
    pub parameter: String,
    /// Numeric value for ordering and plotting, when the label has one.
    pub value: Option<f64>,
    /// Maps reference pixels to test pixels; `None` for pose changes.
    pub ground_truth: Option<Homography>,
}

/// Label for a numeric parameter: signed for exposure and viewpoint.
pub fn parameter_label(family: ConditionFamily, v: f64) -> String {
    let body = crate::detect::format_sig(v.abs(), 6);
    match family {
        ConditionFamily::Exposure | ConditionFamily::Viewpoint => {
            format!("{}{body}", if v < 0.0 { "-" } else { "+" })
        }
        _ => crate::detect::format_sig(v, 6),
    }
}

fn spec(family: ConditionFamily, v: f64, h: Homography) -> ConditionSpec {
    ConditionSpec {
        family,
        parameter: parameter_label(family, v),
        value: Some(v),
        ground_truth: Some(h),
    }
}

/// Exposure variants at the given offsets; identity ground truth.
pub fn exposure_series(img: &GrayImage, evs: &[f64]) -> Vec<(ConditionSpec, GrayImage)> {
    evs.iter()
        .map(|&ev| {
            (
                spec(ConditionFamily::Exposure, ev, Homography::identity()),
                adjust_exposure(img, ev),
            )
        })
        .collect()
}

pub fn generate_exposure_series(img: &GrayImage) -> Vec<(ConditionSpec, GrayImage)> {
    exposure_series(img, &ConditionFamily::Exposure.default_parameters())
}

/// Pinhole view of the image plane turned by `degrees` about its vertical
/// centre line, focal length = image width, shifted so the image centre
/// stays fixed.
pub fn viewpoint_homography(degrees: f64, width: usize, height: usize) -> Result<Homography> {
    let f = width as f64;
    let (cx, cy) = ((width as f64 - 1.0) * 0.5, (height as f64 - 1.0) * 0.5);
    let (s, c) = degrees.to_radians().sin_cos();
    // K * R_y * K^-1 in centred coordinates.
    let core = Homography::new([c, 0.0, f * s, 0.0, 1.0, 0.0, -s / f, 0.0, c])?;
    let (ox, oy) = core.apply(0.0, 0.0).ok_or(Error::Projection(c))?;
    Ok(Homography::translation(cx - ox, cy - oy) * core * Homography::translation(-cx, -cy))
}

pub fn viewpoint_series(img: &GrayImage, degrees: &[f64]) -> Result<Vec<(ConditionSpec, GrayImage)>> {
    let (w, h) = (img.width(), img.height());
    degrees
        .iter()
        .map(|&d| {
            let hom = viewpoint_homography(d, w, h)?;
            let out = warp_homography(img, &hom, w, h)?.image;
            Ok((spec(ConditionFamily::Viewpoint, d, hom), out))
        })
        .collect()
}

pub fn generate_viewpoint_series(img: &GrayImage) -> Result<Vec<(ConditionSpec, GrayImage)>> {
    viewpoint_series(img, &ConditionFamily::Viewpoint.default_parameters())
}

/// `h` followed by the translation that moves the mapped image corners to
/// a canvas starting at 0, with the canvas size.
fn fit_canvas(h: Homography, width: usize, height: usize) -> Result<(Homography, usize, usize)> {
    let (w1, h1) = (width as f64 - 1.0, height as f64 - 1.0);
    let mut lo = (f64::INFINITY, f64::INFINITY);
    let mut hi = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for (x, y) in [(0.0, 0.0), (w1, 0.0), (0.0, h1), (w1, h1)] {
        let (px, py) = h.apply(x, y).ok_or(Error::Projection(0.0))?;
        lo = (lo.0.min(px), lo.1.min(py));
        hi = (hi.0.max(px), hi.1.max(py));
    }
    // Snap near-integers so right-angle rotations stay exact.
    let snap = |v: f64| if (v - v.round()).abs() < 1e-9 { v.round() } else { v };
    let (lx, ly) = (snap(lo.0), snap(lo.1));
    let out_w = (snap(hi.0) - lx).floor() as usize + 1;
    let out_h = (snap(hi.1) - ly).floor() as usize + 1;
    Ok((Homography::translation(-lx, -ly) * h, out_w, out_h))
}

/// Rotation about the image centre by `degrees`, on a canvas holding the
/// whole rotated image.
pub fn rotation_homography(degrees: f64, width: usize, height: usize) -> Result<(Homography, usize, usize)> {
    let (cx, cy) = ((width as f64 - 1.0) * 0.5, (height as f64 - 1.0) * 0.5);
    fit_canvas(Homography::rotation_about(degrees.to_radians(), cx, cy), width, height)
}

pub fn rotation_series(img: &GrayImage, degrees: &[f64]) -> Result<Vec<(ConditionSpec, GrayImage)>> {
    degrees
        .iter()
        .map(|&d| {
            let (hom, w, h) = rotation_homography(d, img.width(), img.height())?;
            Ok((
                spec(ConditionFamily::Rotation, d, hom),
                warp_homography(img, &hom, w, h)?.image,
            ))
        })
        .collect()
}

pub fn generate_rotation_series(img: &GrayImage) -> Result<Vec<(ConditionSpec, GrayImage)>> {
    rotation_series(img, &ConditionFamily::Rotation.default_parameters())
}

pub fn scale_series(img: &GrayImage, factors: &[f64]) -> Result<Vec<(ConditionSpec, GrayImage)>> {
    factors
        .iter()
        .map(|&s| {
            let (hom, w, h) = fit_canvas(Homography::scaling(s)?, img.width(), img.height())?;
            Ok((
                spec(ConditionFamily::Scale, s, hom),
                warp_homography(img, &hom, w, h)?.image,
            ))
        })
        .collect()
}

pub fn generate_scale_series(img: &GrayImage) -> Result<Vec<(ConditionSpec, GrayImage)>> {
    scale_series(img, &ConditionFamily::Scale.default_parameters())
}

/// Test images for `family` at `params`.
pub fn generate_series(
    img: &GrayImage,
    family: ConditionFamily,
    params: &[f64],
) -> Result<Vec<(ConditionSpec, GrayImage)>> {
    match family {
        ConditionFamily::Exposure => Ok(exposure_series(img, params)),
        ConditionFamily::Viewpoint => viewpoint_series(img, params),
        ConditionFamily::Rotation => rotation_series(img, params),
        ConditionFamily::Scale => scale_series(img, params),
        other => Err(Error::InvalidParameter(format!("{other} is not a synthetic family"))),
    }
}

/// Seeded test texture: smooth value noise overlaid with random flat
/// rectangles and discs, lightly blurred.
pub fn synthetic_texture(seed: u64, width: usize, height: usize) -> Result<GrayImage> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cell = 16usize;
    let (gw, gh) = (width / cell + 2, height / cell + 2);
    let grid: Vec<f64> = (0..gw * gh).map(|_| rng.random_range(40.0..215.0)).collect();
    let mut img = GrayImage::from_fn(width, height, |x, y| {
        let (fx, fy) = (x as f64 / cell as f64, y as f64 / cell as f64);
        let (x0, y0) = (fx.floor() as usize, fy.floor() as usize);
        let (tx, ty) = (fx - x0 as f64, fy - y0 as f64);
        let g = |i: usize, j: usize| grid[j * gw + i];
        (g(x0, y0) * (1.0 - tx) + g(x0 + 1, y0) * tx) * (1.0 - ty)
            + (g(x0, y0 + 1) * (1.0 - tx) + g(x0 + 1, y0 + 1) * tx) * ty
    })?;
    let n_shapes = (width * height) / 1200;
    for _ in 0..n_shapes {
        let v = rng.random_range(0.0..255.0);
        let cx = rng.random_range(0.0..width as f64);
        let cy = rng.random_range(0.0..height as f64);
        let r = rng.random_range(3.0..14.0);
        if rng.random_bool(0.5) {
            let (rw, rh) = (r, rng.random_range(3.0..14.0));
            for y in (cy - rh).max(0.0) as usize..((cy + rh) as usize).min(height) {
                for x in (cx - rw).max(0.0) as usize..((cx + rw) as usize).min(width) {
                    img.set(x, y, v);
                }
            }
        } else {
            for y in (cy - r).max(0.0) as usize..((cy + r) as usize + 1).min(height) {
                for x in (cx - r).max(0.0) as usize..((cx + r) as usize + 1).min(width) {
                    if (x as f64 - cx).hypot(y as f64 - cy) <= r {
                        img.set(x, y, v);
                    }
                }
            }
        }
    }
    gaussian_blur(&img, 0.8)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn asym() -> GrayImage {
        GrayImage::from_fn(3, 3, |x, y| (y * 3 + x) as f64 * 10.0).unwrap()
    }

    #[test]
    fn exposure_labels_and_clamp() {
        let img = GrayImage::filled(8, 8, 128.0).unwrap();
        let s = generate_exposure_series(&img);
        let labels: Vec<&str> = s.iter().map(|(c, _)| c.parameter.as_str()).collect();
        assert_eq!(labels, ["-7", "-4", "+4", "+7"]);
        assert!(s.iter().all(|(c, _)| c.ground_truth == Some(Homography::identity())));
        assert!(s[2].1.data().iter().all(|&v| v == 255.0));
        assert_eq!(exposure_series(&img, &[0.0])[0].1, img);
    }

    #[test]
    fn viewpoint_oracle() {
        let (w, h) = (256usize, 200usize);
        let t = 20f64.to_radians();
        let f = w as f64;
        let (cx, cy) = (127.5, 99.5);
        // K R K^-1 with the principal point at the image centre.
        let k = [[f, 0.0, cx], [0.0, f, cy], [0.0, 0.0, 1.0]];
        let kinv = [[1.0 / f, 0.0, -cx / f], [0.0, 1.0 / f, -cy / f], [0.0, 0.0, 1.0]];
        let r = [[t.cos(), 0.0, t.sin()], [0.0, 1.0, 0.0], [-t.sin(), 0.0, t.cos()]];
        let mul = |a: [[f64; 3]; 3], b: [[f64; 3]; 3]| {
            let mut c = [[0.0; 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    c[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
                }
            }
            c
        };
        let m = mul(mul(k, r), kinv);
        // Recentre: shift x so the centre maps to itself.
        let wc = m[2][0] * cx + m[2][1] * cy + m[2][2];
        let xc = (m[0][0] * cx + m[0][1] * cy + m[0][2]) / wc;
        let yc = (m[1][0] * cx + m[1][1] * cy + m[1][2]) / wc;
        let shift = [[1.0, 0.0, cx - xc], [0.0, 1.0, cy - yc], [0.0, 0.0, 1.0]];
        let m = mul(shift, m);
        let got = viewpoint_homography(20.0, w, h).unwrap();
        for (i, g) in got.matrix().iter().enumerate() {
            let want = m[i / 3][i % 3] / m[2][2];
            assert!((g - want).abs() < 1e-9, "entry {i}: {g} vs {want}");
        }
        for d in [-60.0, -40.0, -20.0, 0.0, 20.0, 40.0, 60.0] {
            let (x, y) = viewpoint_homography(d, w, h).unwrap().apply(cx, cy).unwrap();
            assert!((x - cx).abs() < 1e-6 && (y - cy).abs() < 1e-6);
        }
        assert!(viewpoint_homography(0.0, w, h).unwrap().is_identity());
    }

    #[test]
    fn right_angle_rotation_is_a_permutation() {
        let img = asym();
        let s = rotation_series(&img, &[90.0]).unwrap();
        let (spec, out) = &s[0];
        assert_eq!((out.width(), out.height()), (3, 3));
        let h = spec.ground_truth.unwrap();
        for y in 0..3 {
            for x in 0..3 {
                let (px, py) = h.apply(x as f64, y as f64).unwrap();
                assert_eq!(out.get(px as usize, py as usize), img.get(x, y));
            }
        }
    }

    #[test]
    fn rotation_45_corner() {
        let (h, w, hh) = rotation_homography(45.0, 256, 256).unwrap();
        let c = 127.5;
        let t = 45f64.to_radians();
        // Corner (0, 0) about the centre, then the canvas shift.
        let rx = c + t.cos() * -c - t.sin() * -c;
        let ry = c + t.sin() * -c + t.cos() * -c;
        let ext = 255.0 * std::f64::consts::SQRT_2;
        let (x, y) = h.apply(0.0, 0.0).unwrap();
        let lo_x = c - 0.5 * ext;
        assert!((x - (rx - lo_x)).abs() < 1e-9 && (y - (ry - (c - 0.5 * ext))).abs() < 1e-9);
        assert_eq!((w, hh), (ext.floor() as usize + 1, ext.floor() as usize + 1));
    }

    #[test]
    fn ground_truth_reproduces_test_images() {
        let img = synthetic_texture(3, 96, 80).unwrap();
        let mut all = generate_exposure_series(&img);
        all.extend(generate_viewpoint_series(&img).unwrap());
        all.extend(generate_rotation_series(&img).unwrap());
        all.extend(generate_scale_series(&img).unwrap());
        assert_eq!(all.len(), 4 + 6 + 4 + 4);
        for (spec, out) in all {
            let h = spec.ground_truth.unwrap();
            let inv = h.inverse().unwrap();
            for y in 0..out.height() {
                for x in 0..out.width() {
                    let Some((sx, sy)) = inv.apply(x as f64, y as f64) else {
                        continue;
                    };
                    if sx < 1.0 || sy < 1.0 || sx > 94.0 || sy > 78.0 {
                        continue;
                    }
                    let want = img.sample_bilinear(sx, sy).unwrap();
                    let want = if spec.family == ConditionFamily::Exposure {
                        adjust_exposure(&GrayImage::filled(1, 1, want).unwrap(), spec.value.unwrap()).get(0, 0)
                    } else {
                        want
                    };
                    assert!((out.get(x, y) - want).abs() <= 2.0);
                }
            }
        }
    }

    #[test]
    fn scale_canvases() {
        let img = synthetic_texture(1, 64, 48).unwrap();
        let s = generate_scale_series(&img).unwrap();
        let dims: Vec<(usize, usize)> = s.iter().map(|(_, i)| (i.width(), i.height())).collect();
        assert_eq!(dims, [(32, 24), (45, 34), (89, 67), (127, 95)]);
    }

    #[test]
    fn texture_is_seeded() {
        let a = synthetic_texture(7, 64, 64).unwrap();
        assert_eq!(a, synthetic_texture(7, 64, 64).unwrap());
        assert_ne!(a, synthetic_texture(8, 64, 64).unwrap());
        assert!(a.data().iter().all(|v| (0.0..=255.0).contains(v)));
    }
}
