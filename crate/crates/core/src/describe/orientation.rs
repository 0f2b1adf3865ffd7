use std::f64::consts::PI;

use crate::detect::Keypoint;
use crate::image::{gradient_unchecked, GrayImage};

const BINS: usize = 36;
const PEAK_RATIO: f64 = 0.8;

/// Wraps an angle into `(-pi, pi]`.
pub(crate) fn wrap_angle(a: f64) -> f64 {
    let mut a = a % (2.0 * PI);
    if a <= -PI {
        a += 2.0 * PI;
    } else if a > PI {
        a -= 2.0 * PI;
    }
    a
}

/// Dominant gradient orientations around `kp`, given in `level`'s own
/// pixel units.
///
/// A 36-bin histogram of gradient magnitudes over the disc of radius
/// `4.5 * scale`, Gaussian-weighted with sigma `1.5 * scale`. The highest
/// peak and every other local peak reaching 80% of it each yield a copy of
/// `kp`, with the angle refined by a parabola through the peak bin and its
/// neighbours. Empty when the disc leaves the image or has no gradient.
pub fn assign_orientation(level: &GrayImage, kp: &Keypoint) -> Vec<Keypoint> {
    let sigma_w = 1.5 * kp.scale;
    let r = (3.0 * sigma_w).round().max(1.0) as isize;
    let (cx, cy) = (kp.x.round() as isize, kp.y.round() as isize);
    let (w, h) = (level.width() as isize, level.height() as isize);
    if !kp.x.is_finite() || !kp.y.is_finite() || cx - r < 1 || cy - r < 1 || cx + r > w - 2 || cy + r > h - 2 {
        return Vec::new();
    }
    let mut hist = [0.0f64; BINS];
    let denom = 2.0 * sigma_w * sigma_w;
    for dy in -r..=r {
        for dx in -r..=r {
            let d2 = (dx * dx + dy * dy) as f64;
            if d2 > (r * r) as f64 {
                continue;
            }
            let (m, theta) = gradient_unchecked(level, (cx + dx) as usize, (cy + dy) as usize);
            if m == 0.0 {
                continue;
            }
            let bin = (theta * BINS as f64 / (2.0 * PI)).round().rem_euclid(BINS as f64) as usize % BINS;
            hist[bin] += m * (-d2 / denom).exp();
        }
    }
    let max = hist.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return Vec::new();
    }
    let mut out = Vec::new();
    for k in 0..BINS {
        let (l, c, rr) = (hist[(k + BINS - 1) % BINS], hist[k], hist[(k + 1) % BINS]);
        if c < PEAK_RATIO * max || c <= l || c < rr {
            continue;
        }
        let curv = l - 2.0 * c + rr;
        let off = if curv < 0.0 { 0.5 * (l - rr) / curv } else { 0.0 };
        let angle = wrap_angle((k as f64 + off) * 2.0 * PI / BINS as f64);
        out.push(Keypoint {
            orientation: angle,
            ..*kp
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detect::DetectorKind;

    fn kp(x: f64, y: f64, s: f64) -> Keypoint {
        Keypoint::new(x, y, s, DetectorKind::Dog)
    }

    #[test]
    fn ramp_points_along_x() {
        let img = GrayImage::from_fn(40, 40, |x, _| 3.0 * x as f64).unwrap();
        let o = assign_orientation(&img, &kp(20.0, 20.0, 2.0));
        assert_eq!(o.len(), 1);
        assert!(o[0].orientation.abs() < 5f64.to_radians());
    }

    #[test]
    fn rotated_ramp_points_along_y() {
        let img = GrayImage::from_fn(40, 40, |_, y| 3.0 * y as f64).unwrap();
        let o = assign_orientation(&img, &kp(20.0, 20.0, 2.0));
        assert_eq!(o.len(), 1);
        assert!((o[0].orientation - PI / 2.0).abs() < 5f64.to_radians());
    }

    #[test]
    fn oblique_ramp_interpolates() {
        let a = 0.3f64;
        let img = GrayImage::from_fn(60, 60, |x, y| 2.0 * (x as f64 * a.cos() + y as f64 * a.sin())).unwrap();
        let o = assign_orientation(&img, &kp(30.0, 30.0, 2.0));
        assert_eq!(o.len(), 1);
        assert!((o[0].orientation - a).abs() < 5f64.to_radians());
    }

    #[test]
    fn constant_patch_and_border() {
        let img = GrayImage::filled(40, 40, 90.0).unwrap();
        assert!(assign_orientation(&img, &kp(20.0, 20.0, 2.0)).is_empty());
        let ramp = GrayImage::from_fn(40, 40, |x, _| x as f64).unwrap();
        assert!(assign_orientation(&ramp, &kp(3.0, 20.0, 2.0)).is_empty());
    }

    #[test]
    fn wrap() {
        assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(0.5) - 0.5).abs() < 1e-15);
    }
}
