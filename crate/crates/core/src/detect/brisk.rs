use serde::{Deserialize, Serialize};

use super::{sort_keypoints, too_small, DetectorKind, Keypoint};
use crate::error::{Error, Result};
use crate::image::GrayImage;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BriskParams {
    /// FAST intensity threshold on the `[0, 255]` scale.
    pub fast_threshold: f64,
    /// Number of octaves; each contributes an octave and an intra-octave layer.
    pub octaves: usize,
}

impl Default for BriskParams {
    fn default() -> Self {
        Self {
            fast_threshold: 30.0,
            octaves: 3,
        }
    }
}

impl BriskParams {
    pub fn validate(&self) -> Result<()> {
        if self.octaves < 1 {
            return Err(Error::InvalidParameter("brisk: octaves must be >= 1".into()));
        }
        if !(self.fast_threshold >= 0.0) {
            return Err(Error::InvalidParameter(
                "brisk: fast_threshold must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Bresenham circle of radius 3, clockwise from 12 o'clock.
pub const FAST_CIRCLE: [(isize, isize); 16] = [
    (0, -3),
    (1, -3),
    (2, -2),
    (3, -1),
    (3, 0),
    (3, 1),
    (2, 2),
    (1, 3),
    (0, 3),
    (-1, 3),
    (-2, 2),
    (-3, 1),
    (-3, 0),
    (-3, -1),
    (-2, -2),
    (-1, -3),
];

const FAST_ARC: usize = 9;
const FAST_BORDER: usize = 3;
/// Keypoint sigma per unit of layer scale.
const BRISK_BASE_SCALE: f64 = 2.0;

/// FAST-9/16 score at `(x, y)`: 0 unless nine contiguous circle pixels are
/// all brighter than `p + t` or all darker than `p - t`; otherwise the
/// larger qualifying sum of `|I_k - p| - t` over that class.
pub fn fast_score(img: &GrayImage, x: usize, y: usize, t: f64) -> f64 {
    let p = img.get(x, y);
    let mut class = [0i8; 16];
    for (c, &(dx, dy)) in class.iter_mut().zip(FAST_CIRCLE.iter()) {
        let v = img.get((x as isize + dx) as usize, (y as isize + dy) as usize);
        *c = if v > p + t {
            1
        } else if v < p - t {
            -1
        } else {
            0
        };
    }
    let mut best = 0.0f64;
    for polarity in [1i8, -1] {
        let mut run = 0;
        let mut longest = 0;
        for i in 0..32 {
            if class[i % 16] == polarity {
                run += 1;
                longest = longest.max(run);
            } else {
                run = 0;
            }
        }
        if longest.min(16) >= FAST_ARC {
            let sum: f64 = FAST_CIRCLE
                .iter()
                .zip(class.iter())
                .filter(|(_, &c)| c == polarity)
                .map(|(&(dx, dy), _)| (img.get((x as isize + dx) as usize, (y as isize + dy) as usize) - p).abs() - t)
                .sum();
            best = best.max(sum);
        }
    }
    best
}

/// Area-weighted resampling by a factor of 1.5 or 2.
fn area_downsample(img: &GrayImage, factor: f64) -> Option<GrayImage> {
    let ow = (img.width() as f64 / factor).floor() as usize;
    let oh = (img.height() as f64 / factor).floor() as usize;
    if ow == 0 || oh == 0 {
        return None;
    }
    // per output index: list of (source index, weight)
    let taps = |n: usize| -> Vec<Vec<(usize, f64)>> {
        (0..n)
            .map(|j| {
                let (a, b) = (j as f64 * factor, (j + 1) as f64 * factor);
                let mut v = Vec::new();
                let mut i = a.floor() as usize;
                while (i as f64) < b {
                    let overlap = (b.min(i as f64 + 1.0) - a.max(i as f64)).max(0.0);
                    if overlap > 0.0 {
                        v.push((i, overlap / factor));
                    }
                    i += 1;
                }
                v
            })
            .collect()
    };
    let (tx, ty) = (taps(ow), taps(oh));
    let mut data = Vec::with_capacity(ow * oh);
    for row in &ty {
        for col in &tx {
            let mut s = 0.0;
            for &(sy, wy) in row {
                for &(sx, wx) in col {
                    s += wy * wx * img.get(sx, sy);
                }
            }
            data.push(s);
        }
    }
    Some(GrayImage::from_raw(ow, oh, data))
}

/// Octave layers `c_i` (scale `2^i`) interleaved with intra-octave layers
/// `d_i` (scale `1.5 * 2^i`), each with its FAST score map.
pub struct BriskScaleSpace {
    pub layers: Vec<GrayImage>,
    pub scales: Vec<f64>,
    pub scores: Vec<Vec<f64>>,
}

impl BriskScaleSpace {
    pub fn new(img: &GrayImage, p: &BriskParams) -> Self {
        let mut layers = vec![img.clone()];
        let mut scales = vec![1.0];
        if let Some(d0) = area_downsample(img, 1.5) {
            layers.push(d0);
            scales.push(1.5);
        }
        while layers.len() < 2 * p.octaves {
            let prev = &layers[layers.len() - 2];
            match area_downsample(prev, 2.0) {
                Some(next) => {
                    scales.push(scales[scales.len() - 2] * 2.0);
                    layers.push(next);
                }
                None => break,
            }
        }
        while layers.len() > 1 && layers.last().is_some_and(|l| l.width().min(l.height()) < 16) {
            layers.pop();
            scales.pop();
        }
        let scores = layers.iter().map(|l| score_map(l, p.fast_threshold)).collect();
        Self { layers, scales, scores }
    }

    fn score(&self, layer: usize, x: usize, y: usize) -> f64 {
        self.scores[layer][y * self.layers[layer].width() + x]
    }

    /// Largest score of `layer` over the patch covering pixel `(x, y)` of
    /// layer `from`.
    fn patch_max(&self, layer: usize, from: usize, x: f64, y: f64) -> f64 {
        let ratio = self.scales[from] / self.scales[layer];
        let lx = ratio * (x + 0.5) - 0.5;
        let ly = ratio * (y + 0.5) - 0.5;
        let r = ratio.max(1.0);
        let l = &self.layers[layer];
        let x0 = (lx - r).ceil().max(0.0) as usize;
        let y0 = (ly - r).ceil().max(0.0) as usize;
        let x1 = ((lx + r).floor() as isize).min(l.width() as isize - 1);
        let y1 = ((ly + r).floor() as isize).min(l.height() as isize - 1);
        let mut best = 0.0f64;
        for yy in y0 as isize..=y1 {
            for xx in x0 as isize..=x1 {
                best = best.max(self.score(layer, xx as usize, yy as usize));
            }
        }
        best
    }
}

fn score_map(img: &GrayImage, t: f64) -> Vec<f64> {
    let (w, h) = (img.width(), img.height());
    let mut out = vec![0.0; w * h];
    if w <= 2 * FAST_BORDER || h <= 2 * FAST_BORDER {
        return out;
    }
    for y in FAST_BORDER..h - FAST_BORDER {
        for x in FAST_BORDER..w - FAST_BORDER {
            out[y * w + x] = fast_score(img, x, y, t);
        }
    }
    out
}

/// Vertex offset of the parabola through `(-1, a), (0, b), (1, c)`, clamped.
fn parabola_offset(a: f64, b: f64, c: f64) -> f64 {
    let denom = a - 2.0 * b + c;
    if denom >= 0.0 {
        return 0.0;
    }
    (0.5 * (a - c) / denom).clamp(-0.5, 0.5)
}

/// FAST corners maximal in space and across the layer stack.
pub fn detect_brisk_corners(img: &GrayImage, p: &BriskParams) -> Result<Vec<Keypoint>> {
    p.validate()?;
    if too_small(img, "brisk") {
        return Ok(Vec::new());
    }
    let space = BriskScaleSpace::new(img, p);
    let n_layers = space.layers.len();
    let mut out = Vec::new();
    for i in 0..n_layers {
        let layer = &space.layers[i];
        let (w, h) = (layer.width(), layer.height());
        if w <= 2 * FAST_BORDER + 2 || h <= 2 * FAST_BORDER + 2 {
            continue;
        }
        for y in FAST_BORDER + 1..h - FAST_BORDER - 1 {
            for x in FAST_BORDER + 1..w - FAST_BORDER - 1 {
                let s = space.score(i, x, y);
                if s <= 0.0 {
                    continue;
                }
                let spatial_max = (-1isize..=1).all(|dy| {
                    (-1isize..=1).all(|dx| {
                        (dx == 0 && dy == 0)
                            || space.score(i, (x as isize + dx) as usize, (y as isize + dy) as usize) < s
                    })
                });
                if !spatial_max {
                    continue;
                }
                // Ties across scale go to the finer layer.
                let below = (i > 0).then(|| space.patch_max(i - 1, i, x as f64, y as f64));
                let above = (i + 1 < n_layers).then(|| space.patch_max(i + 1, i, x as f64, y as f64));
                if below.is_some_and(|b| b >= s) || above.is_some_and(|a| a > s) {
                    continue;
                }

                let ox = parabola_offset(space.score(i, x - 1, y), s, space.score(i, x + 1, y));
                let oy = parabola_offset(space.score(i, x, y - 1), s, space.score(i, x, y + 1));
                let f = space.scales[i];
                let kx = f * (x as f64 + ox + 0.5) - 0.5;
                let ky = f * (y as f64 + oy + 0.5) - 0.5;
                // Continuous scale from a parabola over (below, here, above).
                let os = match (below, above) {
                    (Some(b), Some(a)) => parabola_offset(b, s, a),
                    _ => 0.0,
                };
                let log_scale = if os >= 0.0 && i + 1 < n_layers {
                    f.ln() + os * (space.scales[i + 1] / f).ln()
                } else if os < 0.0 && i > 0 {
                    f.ln() + os * (f / space.scales[i - 1]).ln()
                } else {
                    f.ln()
                };
                if !(kx >= 0.0 && ky >= 0.0 && kx < img.width() as f64 && ky < img.height() as f64) {
                    continue;
                }
                out.push(Keypoint {
                    x: kx,
                    y: ky,
                    scale: BRISK_BASE_SCALE * log_scale.exp(),
                    orientation: 0.0,
                    response: s,
                    octave: i,
                    detector: DetectorKind::Brisk,
                });
            }
        }
    }
    sort_keypoints(&mut out);
    Ok(out)
}
