use std::f64::consts::PI;
use std::sync::OnceLock;

use super::{BinaryDescriptor, DescriptorKind, BINARY_BITS};
use crate::detect::Keypoint;
use crate::error::{Error, Result};
use crate::image::IntegralImage;

/// BRISK ring radii and point counts, in pattern units.
const BRISK_RADII: [f64; 5] = [0.0, 2.9, 4.9, 7.4, 10.8];
const BRISK_COUNTS: [usize; 5] = [1, 10, 14, 15, 20];
/// Bound the 512 kept short pairs fall under.
#[cfg(test)]
const BRISK_D_MAX: f64 = 9.75;
const BRISK_D_MIN: f64 = 13.67;
/// Pixels per BRISK pattern unit per unit of keypoint scale.
const BRISK_UNIT: f64 = 0.55;

const FREAK_RINGS: usize = 7;
const FREAK_PER_RING: usize = 6;
/// Pixels per FREAK pattern unit per unit of keypoint scale.
const FREAK_UNIT: f64 = 9.0;
const FREAK_USAGE_STEP: usize = 12;
/// Orientation pairs within each of the five outer rings.
const FREAK_ORI_PAIRS: [(usize, usize); 9] = [(0, 3), (1, 4), (2, 5), (0, 2), (1, 3), (2, 4), (3, 5), (4, 0), (5, 1)];

/// Smoothed-sample layout shared by all keypoints of one descriptor kind.
#[derive(Clone, Debug)]
pub struct SamplingPattern {
    /// `(x, y, sigma)` in pattern units.
    pub points: Vec<(f64, f64, f64)>,
    /// Pairs whose comparisons form the 512 bits, in bit order.
    pub short_pairs: Vec<(usize, usize)>,
    /// Pairs averaged into the pattern orientation.
    pub long_pairs: Vec<(usize, usize)>,
    /// Pixels per pattern unit at keypoint scale 1.
    pub unit: f64,
}

fn dist(points: &[(f64, f64, f64)], i: usize, j: usize) -> f64 {
    (points[i].0 - points[j].0).hypot(points[i].1 - points[j].1)
}

/// Distance rounded to a fixed grid so symmetric pairs tie exactly.
fn dist_key(points: &[(f64, f64, f64)], i: usize, j: usize) -> i64 {
    (dist(points, i, j) * 1e9).round() as i64
}

fn all_pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |i| (i + 1..n).map(move |j| (i, j)))
}

impl SamplingPattern {
    pub fn brisk() -> &'static SamplingPattern {
        static P: OnceLock<SamplingPattern> = OnceLock::new();
        P.get_or_init(|| {
            let mut points = Vec::new();
            let ring1_sigma = BRISK_RADII[1] * (PI / BRISK_COUNTS[1] as f64).sin();
            for (&r, &n) in BRISK_RADII.iter().zip(&BRISK_COUNTS) {
                let sigma = if r == 0.0 {
                    0.5 * ring1_sigma
                } else {
                    r * (PI / n as f64).sin()
                };
                for k in 0..n {
                    let a = 2.0 * PI * k as f64 / n as f64;
                    points.push((r * a.cos(), r * a.sin(), sigma));
                }
            }
            let mut short: Vec<(usize, usize)> = all_pairs(points.len())
                .filter(|&(i, j)| dist(&points, i, j) < BRISK_D_MIN)
                .collect();
            short.sort_by_key(|&(i, j)| (dist_key(&points, i, j), i, j));
            short.truncate(BINARY_BITS);
            let long = all_pairs(points.len())
                .filter(|&(i, j)| dist(&points, i, j) > BRISK_D_MIN)
                .collect();
            SamplingPattern {
                points,
                short_pairs: short,
                long_pairs: long,
                unit: BRISK_UNIT,
            }
        })
    }

    pub fn freak() -> &'static SamplingPattern {
        static P: OnceLock<SamplingPattern> = OnceLock::new();
        P.get_or_init(|| {
            let big = 2.0 / 3.0;
            let small = 2.0 / 24.0;
            let u = (big - small) / 21.0;
            let radii = [
                big,
                big - 6.0 * u,
                big - 11.0 * u,
                big - 15.0 * u,
                big - 18.0 * u,
                big - 20.0 * u,
                small,
            ];
            let mut points = Vec::new();
            for (i, &r) in radii.iter().enumerate() {
                let offset = if i % 2 == 1 { PI / FREAK_PER_RING as f64 } else { 0.0 };
                for k in 0..FREAK_PER_RING {
                    let a = 2.0 * PI * k as f64 / FREAK_PER_RING as f64 + offset;
                    points.push((r * a.cos(), r * a.sin(), 0.5 * r));
                }
            }
            points.push((0.0, 0.0, 0.5 * small));
            debug_assert_eq!(points.len(), FREAK_RINGS * FREAK_PER_RING + 1);

            // Coarse pairs first; endpoints may serve in at most 12 pairs per
            // pass, and each later pass lifts that cap by 12 until 512 pairs
            // are kept.
            let long: Vec<(usize, usize)> = (0..5)
                .flat_map(|ring| {
                    FREAK_ORI_PAIRS.iter().map(move |&(a, b)| {
                        let (a, b) = (ring * FREAK_PER_RING + a, ring * FREAK_PER_RING + b);
                        (a.min(b), a.max(b))
                    })
                })
                .collect();
            let mut order: Vec<(usize, usize)> = all_pairs(points.len()).filter(|p| !long.contains(p)).collect();
            order.sort_by_key(|&(i, j)| (-dist_key(&points, i, j), i, j));
            let mut used = vec![0usize; points.len()];
            let mut taken = vec![false; order.len()];
            let mut kept = Vec::with_capacity(BINARY_BITS);
            let mut cap = FREAK_USAGE_STEP;
            while kept.len() < BINARY_BITS {
                for (idx, &(i, j)) in order.iter().enumerate() {
                    if kept.len() == BINARY_BITS {
                        break;
                    }
                    if !taken[idx] && used[i] < cap && used[j] < cap {
                        taken[idx] = true;
                        used[i] += 1;
                        used[j] += 1;
                        kept.push(idx);
                    }
                }
                cap += FREAK_USAGE_STEP;
            }
            kept.sort_unstable();
            let short = kept.into_iter().map(|idx| order[idx]).collect();
            SamplingPattern {
                points,
                short_pairs: short,
                long_pairs: long,
                unit: FREAK_UNIT,
            }
        })
    }

    /// Largest extent of any smoothing box, in pattern units.
    fn reach(&self) -> f64 {
        self.points.iter().map(|&(x, y, s)| x.hypot(y) + s).fold(0.0, f64::max)
    }
}

fn check_bounds(ii: &IntegralImage, kp: &Keypoint, pattern: &SamplingPattern, who: &str) -> Result<f64> {
    let px = pattern.unit * kp.scale;
    let reach = pattern.reach() * px;
    let (w, h) = (ii.width() as f64, ii.height() as f64);
    if !(px > 0.0) || kp.x - reach < -0.5 || kp.y - reach < -0.5 || kp.x + reach > w - 0.5 || kp.y + reach > h - 0.5 {
        return Err(Error::OutOfBounds(format!(
            "{who} pattern of reach {reach:.1} at ({:.2}, {:.2}) leaves the {w}x{h} image",
            kp.x, kp.y
        )));
    }
    Ok(px)
}

/// Rounding bound of a box mean read from `ii`: differences below it
/// count as ties. Scales exactly with any power-of-two gain.
fn tie_tolerance(ii: &IntegralImage, pattern: &SamplingPattern, px: f64) -> f64 {
    let r_min = pattern
        .points
        .iter()
        .map(|&(_, _, s)| (s * px).max(0.5))
        .fold(f64::INFINITY, f64::min);
    let total = ii.at(ii.width(), ii.height()).abs();
    16.0 * f64::EPSILON * total / (4.0 * r_min * r_min)
}

fn sample(ii: &IntegralImage, kp: &Keypoint, pattern: &SamplingPattern, px: f64, angle: f64) -> Vec<f64> {
    let (sin, cos) = angle.sin_cos();
    pattern
        .points
        .iter()
        .map(|&(x, y, s)| {
            let (x, y) = (x * px, y * px);
            ii.box_mean(kp.x + cos * x - sin * y, kp.y + sin * x + cos * y, (s * px).max(0.5))
        })
        .collect()
}

/// Mean local gradient over the long pairs of the unrotated pattern, as an
/// angle; 0 when the mean gradient vanishes.
pub fn pattern_orientation(ii: &IntegralImage, kp: &Keypoint, pattern: &SamplingPattern) -> Result<f64> {
    let px = check_bounds(ii, kp, pattern, "sampling")?;
    let values = sample(ii, kp, pattern, px, 0.0);
    Ok(orientation_from(&values, pattern, px, tie_tolerance(ii, pattern, px)))
}

fn orientation_from(values: &[f64], pattern: &SamplingPattern, px: f64, tol: f64) -> f64 {
    let (mut gx, mut gy) = (0.0, 0.0);
    for &(i, j) in &pattern.long_pairs {
        let (pi, pj) = (pattern.points[i], pattern.points[j]);
        let (dx, dy) = ((pj.0 - pi.0) * px, (pj.1 - pi.1) * px);
        let diff = values[j] - values[i];
        if diff.abs() <= tol {
            continue;
        }
        let k = diff / (dx * dx + dy * dy);
        gx += k * dx;
        gy += k * dy;
    }
    let n = pattern.long_pairs.len() as f64;
    let (gx, gy) = (gx / n, gy / n);
    if gx == 0.0 && gy == 0.0 {
        0.0
    } else {
        gy.atan2(gx)
    }
}

fn describe_binary(
    ii: &IntegralImage,
    kp: &Keypoint,
    pattern: &SamplingPattern,
    kind: DescriptorKind,
) -> Result<(BinaryDescriptor, f64)> {
    let px = check_bounds(ii, kp, pattern, kind.tag())?;
    let tol = tie_tolerance(ii, pattern, px);
    let angle = orientation_from(&sample(ii, kp, pattern, px, 0.0), pattern, px, tol);
    let values = sample(ii, kp, pattern, px, angle);
    let bits: Vec<bool> = pattern
        .short_pairs
        .iter()
        .map(|&(i, j)| values[j] - values[i] > tol)
        .collect();
    Ok((BinaryDescriptor::from_bits(kind, &bits)?, angle))
}

/// BRISK bits and the pattern angle they were sampled at.
pub fn describe_brisk(ii: &IntegralImage, kp: &Keypoint) -> Result<(BinaryDescriptor, f64)> {
    describe_binary(ii, kp, SamplingPattern::brisk(), DescriptorKind::Brisk)
}

/// FREAK bits and the pattern angle they were sampled at.
pub fn describe_freak(ii: &IntegralImage, kp: &Keypoint) -> Result<(BinaryDescriptor, f64)> {
    describe_binary(ii, kp, SamplingPattern::freak(), DescriptorKind::Freak)
}
