use serde::{Deserialize, Serialize};

use super::{solve3, sort_keypoints, too_small, DetectorKind, Keypoint};
use crate::error::{Error, Result};
use crate::image::{build_gaussian_pyramid, difference_of_gaussians, GrayImage};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DogParams {
    pub octaves: usize,
    /// Scale intervals per octave; the pyramid holds `intervals + 3` levels.
    pub intervals: usize,
    pub base_sigma: f64,
    /// Minimum |DoG| on intensities normalized to `[0, 1]`.
    pub contrast_threshold: f64,
    pub edge_ratio: f64,
}

impl Default for DogParams {
    fn default() -> Self {
        Self {
            octaves: 4,
            intervals: 3,
            base_sigma: 1.6,
            contrast_threshold: 0.03,
            edge_ratio: 10.0,
        }
    }
}

impl DogParams {
    pub fn validate(&self) -> Result<()> {
        if self.octaves < 1 || self.intervals < 1 {
            return Err(Error::InvalidParameter(
                "dog: octaves and intervals must be >= 1".into(),
            ));
        }
        if !(self.base_sigma > 0.0) || !(self.contrast_threshold >= 0.0) || !(self.edge_ratio > 0.0) {
            return Err(Error::InvalidParameter("dog: thresholds must be non-negative".into()));
        }
        Ok(())
    }

    pub fn k(&self) -> f64 {
        2f64.powf(1.0 / self.intervals as f64)
    }
}

const BORDER: usize = 5;
const MAX_RELOCALIZATIONS: usize = 5;

/// Scale-space extrema of the difference-of-Gaussians stack.
pub fn detect_dog(img: &GrayImage, p: &DogParams) -> Result<Vec<Keypoint>> {
    p.validate()?;
    if too_small(img, "dog") {
        return Ok(Vec::new());
    }
    let k = p.k();
    let pyr = build_gaussian_pyramid(img, p.octaves, p.intervals + 3, p.base_sigma, k)?;
    let dog = difference_of_gaussians(&pyr);
    let threshold = p.contrast_threshold * 255.0;
    let edge_limit = (p.edge_ratio + 1.0).powi(2) / p.edge_ratio;

    let mut out = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (o, layers) in dog.iter().enumerate() {
        let (w, h) = (layers[0].width(), layers[0].height());
        if w <= 2 * BORDER || h <= 2 * BORDER {
            continue;
        }
        for l in 1..=p.intervals {
            for y in BORDER..h - BORDER {
                for x in BORDER..w - BORDER {
                    let v = layers[l].get(x, y);
                    if v.abs() <= 0.5 * threshold || !is_extremum(layers, l, x, y) {
                        continue;
                    }
                    let Some(found) = refine(layers, p.intervals, x, y, l) else {
                        continue;
                    };
                    if found.value.abs() < threshold
                        || !passes_edge_test(&layers[found.l], found.x, found.y, edge_limit)
                    {
                        continue;
                    }
                    if !seen.insert((o, found.l, found.x, found.y)) {
                        continue;
                    }
                    let factor = (1u64 << o) as f64;
                    let kx = (found.x as f64 + found.offset[0]) * factor;
                    let ky = (found.y as f64 + found.offset[1]) * factor;
                    if !(kx >= 0.0 && ky >= 0.0 && kx < img.width() as f64 && ky < img.height() as f64) {
                        continue;
                    }
                    out.push(Keypoint {
                        x: kx,
                        y: ky,
                        scale: pyr.sigma(o, found.l as f64 + found.offset[2]),
                        orientation: 0.0,
                        response: found.value.abs(),
                        octave: o,
                        detector: DetectorKind::Dog,
                    });
                }
            }
        }
    }
    sort_keypoints(&mut out);
    Ok(out)
}

fn is_extremum(layers: &[GrayImage], l: usize, x: usize, y: usize) -> bool {
    let v = layers[l].get(x, y);
    let (mut is_max, mut is_min) = (true, true);
    for layer in &layers[l - 1..=l + 1] {
        for yy in y - 1..=y + 1 {
            for xx in x - 1..=x + 1 {
                if std::ptr::eq(layer, &layers[l]) && xx == x && yy == y {
                    continue;
                }
                let n = layer.get(xx, yy);
                is_max &= v > n;
                is_min &= v < n;
                if !is_max && !is_min {
                    return false;
                }
            }
        }
    }
    is_max || is_min
}

struct Refined {
    x: usize,
    y: usize,
    l: usize,
    offset: [f64; 3],
    value: f64,
}

fn derivatives(layers: &[GrayImage], x: usize, y: usize, l: usize) -> ([f64; 3], [[f64; 3]; 3]) {
    let d = |dl: isize, dx: isize, dy: isize| {
        layers[(l as isize + dl) as usize].get((x as isize + dx) as usize, (y as isize + dy) as usize)
    };
    let c = d(0, 0, 0);
    let g = [
        0.5 * (d(0, 1, 0) - d(0, -1, 0)),
        0.5 * (d(0, 0, 1) - d(0, 0, -1)),
        0.5 * (d(1, 0, 0) - d(-1, 0, 0)),
    ];
    let dxx = d(0, 1, 0) + d(0, -1, 0) - 2.0 * c;
    let dyy = d(0, 0, 1) + d(0, 0, -1) - 2.0 * c;
    let dss = d(1, 0, 0) + d(-1, 0, 0) - 2.0 * c;
    let dxy = 0.25 * (d(0, 1, 1) - d(0, -1, 1) - d(0, 1, -1) + d(0, -1, -1));
    let dxs = 0.25 * (d(1, 1, 0) - d(1, -1, 0) - d(-1, 1, 0) + d(-1, -1, 0));
    let dys = 0.25 * (d(1, 0, 1) - d(1, 0, -1) - d(-1, 0, 1) + d(-1, 0, -1));
    (g, [[dxx, dxy, dxs], [dxy, dyy, dys], [dxs, dys, dss]])
}

/// Quadratic interpolation of the extremum, moving to the neighboring
/// sample whenever the offset exceeds half a sample.
fn refine(layers: &[GrayImage], intervals: usize, x: usize, y: usize, l: usize) -> Option<Refined> {
    let (w, h) = (layers[0].width(), layers[0].height());
    let (mut x, mut y, mut l) = (x, y, l);
    for _ in 0..MAX_RELOCALIZATIONS {
        let (g, hess) = derivatives(layers, x, y, l);
        let step = solve3(hess, g)?;
        let offset = [-step[0], -step[1], -step[2]];
        if offset.iter().all(|o| o.abs() < 0.5) {
            let value = layers[l].get(x, y) + 0.5 * (g[0] * offset[0] + g[1] * offset[1] + g[2] * offset[2]);
            return Some(Refined { x, y, l, offset, value });
        }
        if offset.iter().any(|o| o.abs() > 1e3) {
            return None;
        }
        let nx = x as isize + offset[0].round() as isize;
        let ny = y as isize + offset[1].round() as isize;
        let nl = l as isize + offset[2].round() as isize;
        if nl < 1 || nl > intervals as isize {
            return None;
        }
        if nx < BORDER as isize || ny < BORDER as isize || nx >= (w - BORDER) as isize || ny >= (h - BORDER) as isize {
            return None;
        }
        (x, y, l) = (nx as usize, ny as usize, nl as usize);
    }
    None
}

/// Principal-curvature ratio test on the 2-D Hessian of one DoG layer.
fn passes_edge_test(layer: &GrayImage, x: usize, y: usize, limit: f64) -> bool {
    let c = layer.get(x, y);
    let dxx = layer.get(x + 1, y) + layer.get(x - 1, y) - 2.0 * c;
    let dyy = layer.get(x, y + 1) + layer.get(x, y - 1) - 2.0 * c;
    let dxy =
        0.25 * (layer.get(x + 1, y + 1) - layer.get(x - 1, y + 1) - layer.get(x + 1, y - 1) + layer.get(x - 1, y - 1));
    let tr = dxx + dyy;
    let det = dxx * dyy - dxy * dxy;
    det > 0.0 && tr * tr / det < limit
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::gaussian_blur;

    fn blob(size: usize, cx: f64, cy: f64, sigma: f64, amp: f64) -> GrayImage {
        GrayImage::from_fn(size, size, |x, y| {
            let (dx, dy) = (x as f64 - cx, y as f64 - cy);
            amp * (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp()
        })
        .unwrap()
    }

    #[test]
    fn constant_image_has_no_keypoints() {
        let img = GrayImage::filled(64, 64, 120.0).unwrap();
        assert!(detect_dog(&img, &DogParams::default()).unwrap().is_empty());
    }

    #[test]
    fn tiny_image_is_empty_not_error() {
        let img = GrayImage::filled(12, 40, 1.0).unwrap();
        assert!(detect_dog(&img, &DogParams::default()).unwrap().is_empty());
    }

    #[test]
    fn single_blob_single_keypoint_at_oracle_scale() {
        let img = blob(128, 64.0, 64.0, 4.0, 100.0);
        let p = DogParams::default();
        let kps = detect_dog(&img, &p).unwrap();
        assert_eq!(kps.len(), 1, "{kps:?}");
        let kp = kps[0];
        assert!(((kp.x - 64.0).powi(2) + (kp.y - 64.0).powi(2)).sqrt() <= 1.0, "{kp:?}");

        // Oracle: brute-force DoG magnitude at the blob center over a dense
        // sigma grid, each sigma blurred from scratch.
        let k = p.k();
        let blur_abs = |s: f64| gaussian_blur(&img, (s * s - 0.25).sqrt()).unwrap().get(64, 64);
        let mut best = (0.0, 0.0);
        let mut s = 1.0;
        while s < 12.0 {
            let d = (blur_abs(s * k) - blur_abs(s)).abs();
            if d > best.1 {
                best = (s, d);
            }
            s *= 1.01;
        }
        let levels_apart = (kp.scale / best.0).ln().abs() / k.ln();
        assert!(levels_apart <= 1.0, "detected {} vs oracle {}", kp.scale, best.0);
    }

    #[test]
    fn step_edge_is_rejected() {
        let img = GrayImage::from_fn(128, 128, |x, _| if x < 64 { 0.0 } else { 255.0 }).unwrap();
        // Oracle: along the edge the DoG Hessian is rank-deficient, so
        // trace^2 / det blows past (r + 1)^2 / r.
        let pyr = build_gaussian_pyramid(&img, 1, 6, 1.6, DogParams::default().k()).unwrap();
        let dog = difference_of_gaussians(&pyr);
        let limit = 11.0 * 11.0 / 10.0;
        for y in 10..118 {
            assert!(!passes_edge_test(&dog[0][2], 63, y, limit));
            assert!(!passes_edge_test(&dog[0][2], 64, y, limit));
        }
        let kps = detect_dog(
            &img,
            &DogParams {
                edge_ratio: 10.0,
                ..DogParams::default()
            },
        )
        .unwrap();
        assert!(kps.iter().all(|k| (k.x - 63.5).abs() > 3.0), "{kps:?}");
    }
}
