use std::f64::consts::PI;

use super::{DescriptorKind, FloatDescriptor};
use crate::detect::Keypoint;
use crate::error::{Error, Result};
use crate::image::{gradient_unchecked, GrayImage};

const CELLS: usize = 4;
const ORI_BINS: usize = 8;
const CLAMP: f64 = 0.2;

/// 4x4x8 gradient histogram around `kp`, given in `level`'s pixel units.
///
/// Cells are `3 * scale` wide and aligned with `kp.orientation`. Samples
/// are Gaussian-weighted (sigma of half the window) and spread
/// trilinearly over neighbouring cells and orientation bins.
pub fn describe_sift(level: &GrayImage, kp: &Keypoint) -> Result<FloatDescriptor> {
    let cell = 3.0 * kp.scale;
    let r = (cell * std::f64::consts::SQRT_2 * (CELLS + 1) as f64 * 0.5)
        .round()
        .max(1.0) as isize;
    let (cx, cy) = (kp.x.round() as isize, kp.y.round() as isize);
    let (w, h) = (level.width() as isize, level.height() as isize);
    if !(cell > 0.0) || cx - r < 1 || cy - r < 1 || cx + r > w - 2 || cy + r > h - 2 {
        return Err(Error::OutOfBounds(format!(
            "sift window of radius {r} at ({:.2}, {:.2}) leaves the {w}x{h} level",
            kp.x, kp.y
        )));
    }
    let (sin, cos) = kp.orientation.sin_cos();
    // Padded by one cell on each side so trilinear spill needs no checks.
    const P: usize = CELLS + 2;
    let mut hist = [0.0f64; P * P * ORI_BINS];
    let half = 0.5 * CELLS as f64;
    let denom = 2.0 * half * half;
    for py in cy - r..=cy + r {
        for px in cx - r..=cx + r {
            let (dx, dy) = (px as f64 - kp.x, py as f64 - kp.y);
            let rx = (cos * dx + sin * dy) / cell;
            let ry = (-sin * dx + cos * dy) / cell;
            let cbin = rx + half - 0.5;
            let rbin = ry + half - 0.5;
            if cbin <= -1.0 || rbin <= -1.0 || cbin >= CELLS as f64 || rbin >= CELLS as f64 {
                continue;
            }
            let (m, theta) = gradient_unchecked(level, px as usize, py as usize);
            if m == 0.0 {
                continue;
            }
            let mag = m * (-(rx * rx + ry * ry) / denom).exp();
            let obin = (theta - kp.orientation).rem_euclid(2.0 * PI) * ORI_BINS as f64 / (2.0 * PI);
            let (r0, c0, o0) = (rbin.floor(), cbin.floor(), obin.floor());
            let (fr, fc, fo) = (rbin - r0, cbin - c0, obin - o0);
            for (ri, wr) in [(0, 1.0 - fr), (1, fr)] {
                for (ci, wc) in [(0, 1.0 - fc), (1, fc)] {
                    for (oi, wo) in [(0, 1.0 - fo), (1, fo)] {
                        let row = (r0 as isize + 1 + ri) as usize;
                        let col = (c0 as isize + 1 + ci) as usize;
                        let ob = (o0 as usize + oi) % ORI_BINS;
                        hist[(row * P + col) * ORI_BINS + ob] += mag * wr * wc * wo;
                    }
                }
            }
        }
    }
    let mut raw = Vec::with_capacity(CELLS * CELLS * ORI_BINS);
    for row in 1..=CELLS {
        for col in 1..=CELLS {
            raw.extend_from_slice(&hist[(row * P + col) * ORI_BINS..(row * P + col + 1) * ORI_BINS]);
        }
    }
    let unit = FloatDescriptor::normalized(DescriptorKind::Sift, raw)?;
    FloatDescriptor::normalized(DescriptorKind::Sift, clamp_unit(unit.values(), CLAMP)?)
}

/// Caps entries of a unit vector so that after renormalization none
/// exceeds `cap`: solves for the cut level `c` such that
/// `c / |min(v, c)| = cap`. Needs more than `1 / cap^2` non-zero entries.
fn clamp_unit(v: &[f64], cap: f64) -> Result<Vec<f64>> {
    if v.iter().all(|&x| x <= cap) {
        return Ok(v.to_vec());
    }
    let mut sorted: Vec<f64> = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let cap2 = cap * cap;
    // suffix[k] = sum of squares of sorted[k..]
    let mut suffix = vec![0.0; sorted.len() + 1];
    for k in (0..sorted.len()).rev() {
        suffix[k] = suffix[k + 1] + sorted[k] * sorted[k];
    }
    for k in 1..sorted.len() {
        let free = 1.0 - cap2 * k as f64;
        if free <= 0.0 {
            break;
        }
        let c = (cap2 * suffix[k] / free).sqrt();
        if c > 0.0 && c <= sorted[k - 1] && c >= sorted[k] {
            return Ok(v.iter().map(|&x| x.min(c)).collect());
        }
    }
    Err(Error::DegenerateDescriptor(format!(
        "sift: too few non-zero bins to cap entries at {cap}"
    )))
}
