use serde::{Deserialize, Serialize};

use super::{solve3, sort_keypoints, too_small, DetectorKind, Keypoint};
use crate::error::{Error, Result};
use crate::image::{GrayImage, IntegralImage};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FastHessianParams {
    pub octaves: usize,
    /// Filter sizes per octave (at least 3).
    pub levels: usize,
    /// Minimum determinant response on intensities normalized to `[0, 1]`.
    pub hessian_threshold: f64,
    /// Relative weight of the mixed derivative.
    pub w: f64,
}

impl Default for FastHessianParams {
    fn default() -> Self {
        Self {
            octaves: 4,
            levels: 4,
            hessian_threshold: 0.0004,
            w: 0.9,
        }
    }
}

impl FastHessianParams {
    pub fn validate(&self) -> Result<()> {
        if self.octaves < 1 || self.levels < 3 {
            return Err(Error::InvalidParameter(
                "fast_hessian: need octaves >= 1 and levels >= 3".into(),
            ));
        }
        if !(self.hessian_threshold >= 0.0) || !(self.w >= 0.0) {
            return Err(Error::InvalidParameter(
                "fast_hessian: thresholds must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Box filter side for `level` of `octave`: 9, 15, 21, 27 in octave 0, with
/// the size increment doubling every octave.
pub fn filter_size(octave: usize, level: usize) -> usize {
    let step = 6usize << octave;
    let first = 3 * ((1usize << (octave + 1)) + 1);
    first + level * step
}

/// Approximated Hessian determinant `Dxx * Dyy - (w * Dxy)^2`.
#[inline]
pub fn hessian_determinant(dxx: f64, dyy: f64, dxy: f64, w: f64) -> f64 {
    dxx * dyy - (w * dxy) * (w * dxy)
}

/// Area-normalized box-filter second derivatives `(Dxx, Dyy, Dxy)` of side
/// `size` centered on pixel `(x, y)`.
#[inline]
pub fn box_hessian(ii: &IntegralImage, x: i64, y: i64, size: usize) -> (f64, f64, f64) {
    let l = (size / 3) as i64;
    let b = ((size - 1) / 2) as i64;
    let s = size as i64;
    let inv_area = 1.0 / (size * size) as f64;
    // rect(x0, y0, w, h)
    let rect = |x0: i64, y0: i64, w: i64, h: i64| ii.rect_sum(x0, y0, x0 + w, y0 + h);
    let dxx = rect(x - b, y - l + 1, s, 2 * l - 1) - 3.0 * rect(x - l / 2, y - l + 1, l, 2 * l - 1);
    let dyy = rect(x - l + 1, y - b, 2 * l - 1, s) - 3.0 * rect(x - l + 1, y - l / 2, 2 * l - 1, l);
    let dxy = rect(x + 1, y - l, l, l) + rect(x - l, y + 1, l, l) - rect(x - l, y - l, l, l) - rect(x + 1, y + 1, l, l);
    (dxx * inv_area, dyy * inv_area, dxy * inv_area)
}

struct ResponseLayer {
    size: usize,
    /// Row-major over the octave's sampling grid.
    values: Vec<f64>,
}

/// Determinant-of-Hessian blobs over box-filter scale space.
pub fn detect_fast_hessian(img: &GrayImage, p: &FastHessianParams) -> Result<Vec<Keypoint>> {
    p.validate()?;
    if too_small(img, "fast_hessian") {
        return Ok(Vec::new());
    }
    let normalized = img.map(|v| v / 255.0);
    let ii = IntegralImage::new(&normalized);
    let (w, h) = (img.width() as i64, img.height() as i64);

    let mut out = Vec::new();
    let mut finer: Vec<(i64, i64, Vec<ResponseLayer>)> = Vec::new();
    for o in 0..p.octaves {
        let step = 1i64 << o;
        let (gw, gh) = ((w + step - 1) / step, (h + step - 1) / step);
        let layers: Vec<ResponseLayer> = (0..p.levels)
            .map(|l| {
                let size = filter_size(o, l);
                let mut values = Vec::with_capacity((gw * gh) as usize);
                for gy in 0..gh {
                    for gx in 0..gw {
                        let (dxx, dyy, dxy) = box_hessian(&ii, gx * step, gy * step, size);
                        values.push(hessian_determinant(dxx, dyy, dxy, p.w));
                    }
                }
                ResponseLayer { size, values }
            })
            .collect();
        let at = |l: usize, gx: i64, gy: i64| layers[l].values[(gy * gw + gx) as usize];

        for l in 1..p.levels - 1 {
            // Every filter of the 3x3x3 neighborhood must lie inside the image.
            let margin = (layers[l + 1].size as i64 + 1) / 2 + step;
            let g_lo = (margin + step - 1) / step;
            let gx_hi = (w - 1 - margin) / step;
            let gy_hi = (h - 1 - margin) / step;
            for gy in g_lo..=gy_hi {
                for gx in g_lo..=gx_hi {
                    let v = at(l, gx, gy);
                    if v <= p.hessian_threshold {
                        continue;
                    }
                    let mut is_max = true;
                    'nbhd: for dl in [l - 1, l, l + 1] {
                        for dy in -1..=1 {
                            for dx in -1..=1 {
                                if dl == l && dx == 0 && dy == 0 {
                                    continue;
                                }
                                if at(dl, gx + dx, gy + dy) >= v {
                                    is_max = false;
                                    break 'nbhd;
                                }
                            }
                        }
                    }
                    if !is_max {
                        continue;
                    }
                    // Finer octaves sample scale more densely; their
                    // intermediate filter sizes take part in suppression.
                    let (lo_size, hi_size) = (layers[l - 1].size, layers[l + 1].size);
                    let beaten = finer.iter().any(|(fstep, fgw, flayers)| {
                        flayers
                            .iter()
                            .filter(|fl| fl.size > lo_size && fl.size < hi_size && fl.size != layers[l].size)
                            .any(|fl| {
                                let (cx, cy) = (gx * step / fstep, gy * step / fstep);
                                (-1..=1)
                                    .any(|dy| (-1..=1).any(|dx| fl.values[((cy + dy) * fgw + cx + dx) as usize] >= v))
                            })
                    });
                    if beaten {
                        continue;
                    }
                    let d = |dl: isize, dx: i64, dy: i64| at((l as isize + dl) as usize, gx + dx, gy + dy);
                    let g = [
                        0.5 * (d(0, 1, 0) - d(0, -1, 0)),
                        0.5 * (d(0, 0, 1) - d(0, 0, -1)),
                        0.5 * (d(1, 0, 0) - d(-1, 0, 0)),
                    ];
                    let dxx = d(0, 1, 0) + d(0, -1, 0) - 2.0 * v;
                    let dyy = d(0, 0, 1) + d(0, 0, -1) - 2.0 * v;
                    let dss = d(1, 0, 0) + d(-1, 0, 0) - 2.0 * v;
                    let dxy = 0.25 * (d(0, 1, 1) - d(0, -1, 1) - d(0, 1, -1) + d(0, -1, -1));
                    let dxs = 0.25 * (d(1, 1, 0) - d(1, -1, 0) - d(-1, 1, 0) + d(-1, -1, 0));
                    let dys = 0.25 * (d(1, 0, 1) - d(1, 0, -1) - d(-1, 0, 1) + d(-1, 0, -1));
                    let Some(step3) = solve3([[dxx, dxy, dxs], [dxy, dyy, dys], [dxs, dys, dss]], g) else {
                        continue;
                    };
                    let off = [-step3[0], -step3[1], -step3[2]];
                    if off.iter().any(|o| o.abs() >= 0.5) {
                        continue;
                    }
                    let size_step = (layers[l + 1].size - layers[l].size) as f64;
                    let x = (gx as f64 + off[0]) * step as f64;
                    let y = (gy as f64 + off[1]) * step as f64;
                    out.push(Keypoint {
                        x,
                        y,
                        scale: 1.2 * (layers[l].size as f64 + off[2] * size_step) / 9.0,
                        orientation: 0.0,
                        response: v,
                        octave: o,
                        detector: DetectorKind::FastHessian,
                    });
                }
            }
        }
        finer.push((step, gw, layers));
    }
    sort_keypoints(&mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_sum(img: &GrayImage, x0: i64, y0: i64, w: i64, h: i64) -> f64 {
        let mut s = 0.0;
        for y in y0.max(0)..(y0 + h).min(img.height() as i64) {
            for x in x0.max(0)..(x0 + w).min(img.width() as i64) {
                s += img.get(x as usize, y as usize);
            }
        }
        s
    }

    /// Same lobes as `box_hessian`, written as explicit pixel loops.
    fn naive_response(img: &GrayImage, x: i64, y: i64, size: usize, w: f64) -> f64 {
        let l = (size / 3) as i64;
        let b = ((size - 1) / 2) as i64;
        let s = size as i64;
        let a = (size * size) as f64;
        let dxx = (naive_sum(img, x - b, y - l + 1, s, 2 * l - 1)
            - 3.0 * naive_sum(img, x - l / 2, y - l + 1, l, 2 * l - 1))
            / a;
        let dyy = (naive_sum(img, x - l + 1, y - b, 2 * l - 1, s)
            - 3.0 * naive_sum(img, x - l + 1, y - l / 2, 2 * l - 1, l))
            / a;
        let dxy = (naive_sum(img, x + 1, y - l, l, l) + naive_sum(img, x - l, y + 1, l, l)
            - naive_sum(img, x - l, y - l, l, l)
            - naive_sum(img, x + 1, y + 1, l, l))
            / a;
        hessian_determinant(dxx, dyy, dxy, w)
    }

    fn blob(size: usize, c: f64, sigma: f64) -> GrayImage {
        GrayImage::from_fn(size, size, |x, y| {
            let (dx, dy) = (x as f64 - c, y as f64 - c);
            100.0 * (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp()
        })
        .unwrap()
    }

    #[test]
    fn determinant_spot_value() {
        assert!((hessian_determinant(2.0, 3.0, 1.0, 0.9) - 5.19).abs() < 1e-12);
    }

    #[test]
    fn filter_schedule() {
        let sizes: Vec<usize> = (0..4).map(|l| filter_size(0, l)).collect();
        assert_eq!(sizes, vec![9, 15, 21, 27]);
        let sizes: Vec<usize> = (0..4).map(|l| filter_size(1, l)).collect();
        assert_eq!(sizes, vec![15, 27, 39, 51]);
        assert_eq!(filter_size(2, 0), 27);
        assert_eq!(filter_size(2, 1), 51);
    }

    #[test]
    fn box_filter_lobes() {
        // A vertical line of ones: Dxx sees the -2 center lobe only.
        let img = GrayImage::from_fn(31, 31, |x, _| if x == 15 { 1.0 } else { 0.0 }).unwrap();
        let ii = IntegralImage::new(&img);
        let (dxx, dyy, dxy) = box_hessian(&ii, 15, 15, 9);
        assert!((dxx - (-2.0 * 5.0) / 81.0).abs() < 1e-12);
        assert!((dyy - 0.0).abs() < 1e-12);
        assert_eq!(dxy, 0.0);
    }

    #[test]
    fn constant_image_gives_nothing() {
        let img = GrayImage::filled(96, 96, 90.0).unwrap();
        assert!(detect_fast_hessian(&img, &FastHessianParams::default())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn responses_match_naive_box_filters() {
        let img = blob(96, 47.0, 5.0).map(|v| v / 255.0);
        let ii = IntegralImage::new(&img);
        for &(x, y, size) in &[(47, 47, 9), (40, 50, 15), (47, 47, 27), (30, 60, 21), (5, 5, 27)] {
            let (dxx, dyy, dxy) = box_hessian(&ii, x, y, size);
            let fast = hessian_determinant(dxx, dyy, dxy, 0.9);
            let slow = naive_response(&img, x, y, size, 0.9);
            assert!((fast - slow).abs() <= 0.01 * slow.abs().max(1e-12), "{fast} vs {slow}");
        }
    }

    #[test]
    fn single_blob_single_keypoint() {
        let img = blob(128, 64.0, 4.0);
        let kps = detect_fast_hessian(&img, &FastHessianParams::default()).unwrap();
        assert_eq!(kps.len(), 1, "{kps:?}");
        assert!(((kps[0].x - 64.0).powi(2) + (kps[0].y - 64.0).powi(2)).sqrt() <= 2.0);

        // Oracle: dense naive response grid around the center at the
        // detected filter sizes peaks at the blob center as well.
        let norm = img.map(|v| v / 255.0);
        let mut best = (0, 0, f64::MIN);
        for y in 56..=72 {
            for x in 56..=72 {
                let r = naive_response(&norm, x, y, 27, 0.9);
                if r > best.2 {
                    best = (x, y, r);
                }
            }
        }
        assert_eq!((best.0, best.1), (64, 64));
    }
}
