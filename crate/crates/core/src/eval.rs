//! Homography ground truth: correspondences, repeatability and match
//! correctness.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::detect::Keypoint;
use crate::error::{Error, Result};
use crate::image::Homography;
use crate::matching::MatchPair;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSettings {
    /// Maximum centre distance in pixels of image b.
    pub eps_pos: f64,
    /// Allowed scale ratio band `[1 / tau, tau]`.
    pub tau: f64,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self { eps_pos: 2.5, tau: 2.0 }
    }
}

impl EvalSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps_pos > 0.0) || !(self.tau >= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "eval: need eps_pos > 0 and tau >= 1, got {} and {}",
                self.eps_pos, self.tau
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Correspondence {
    pub index_a: usize,
    pub index_b: usize,
    pub projection_error: f64,
    /// Projected a-scale over b-scale.
    pub scale_ratio: f64,
}

/// Maps position through `h`; scale grows by the square root of the local
/// area change.
pub fn project_keypoint(kp: &Keypoint, h: &Homography) -> Result<Keypoint> {
    let (x, y, w) = h.apply_homogeneous(kp.x, kp.y);
    if w.abs() <= 1e-9 {
        return Err(Error::Projection(w));
    }
    let det = h.jacobian_det(kp.x, kp.y).ok_or(Error::Projection(w))?;
    Ok(Keypoint {
        x: x / w,
        y: y / w,
        scale: kp.scale * det.abs().sqrt(),
        ..*kp
    })
}

/// Border margin a keypoint of this scale needs.
fn margin(scale: f64) -> f64 {
    (2.0 * scale).ceil()
}

fn inside(kp: &Keypoint, (w, h): (usize, usize)) -> bool {
    let m = margin(kp.scale);
    kp.x >= m && kp.y >= m && kp.x <= w as f64 - 1.0 - m && kp.y <= h as f64 - 1.0 - m
}

/// Keypoints of `kps` inside their own image and, once mapped by `h`,
/// inside the other image; projections are returned alongside.
fn visible(kps: &[Keypoint], h: &Homography, own: (usize, usize), other: (usize, usize)) -> Vec<(usize, Keypoint)> {
    kps.iter()
        .enumerate()
        .filter(|(_, k)| inside(k, own))
        .filter_map(|(i, k)| project_keypoint(k, h).ok().filter(|p| inside(p, other)).map(|p| (i, p)))
        .collect()
}

/// Correspondences plus the visible-set sizes behind a repeatability value.
#[derive(Clone, Debug, PartialEq)]
pub struct RepeatabilityResult {
    pub correspondences: Vec<Correspondence>,
    pub visible_a: usize,
    pub visible_b: usize,
}

impl RepeatabilityResult {
    /// `|correspondences| / min(visible_a, visible_b)`, 0 for an empty side.
    pub fn repeatability(&self) -> f64 {
        let denom = self.visible_a.min(self.visible_b);
        if denom == 0 {
            0.0
        } else {
            self.correspondences.len() as f64 / denom as f64
        }
    }
}

/// Greedy one-to-one assignment between the visible keypoints of `a`
/// (mapped into b by `h`) and of `b`, best pairs first.
///
/// A pair qualifies when the centres are within `eps_pos` and the scale
/// ratio lies in `[1 / tau, tau]`. Pairs are taken in increasing order of
/// centre error, then of scale disagreement, then of indices.
pub fn evaluate(
    kps_a: &[Keypoint],
    kps_b: &[Keypoint],
    h: &Homography,
    size_a: (usize, usize),
    size_b: (usize, usize),
    s: &EvalSettings,
) -> Result<RepeatabilityResult> {
    s.validate()?;
    let h_inv = h.inverse()?;
    let vis_a = visible(kps_a, h, size_a, size_b);
    let vis_b = visible(kps_b, &h_inv, size_b, size_a);

    let cell = s.eps_pos;
    let key = |x: f64, y: f64| ((x / cell).floor() as i64, (y / cell).floor() as i64);
    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for &(j, _) in &vis_b {
        grid.entry(key(kps_b[j].x, kps_b[j].y)).or_default().push(j);
    }
    let mut cands: Vec<(f64, f64, usize, usize)> = Vec::new();
    for &(i, ref p) in &vis_a {
        let (gx, gy) = key(p.x, p.y);
        for dy in -1..=1 {
            for dx in -1..=1 {
                let Some(list) = grid.get(&(gx + dx, gy + dy)) else {
                    continue;
                };
                for &j in list {
                    let b = &kps_b[j];
                    let err = (p.x - b.x).hypot(p.y - b.y);
                    let ratio = p.scale / b.scale;
                    if err <= s.eps_pos && ratio >= 1.0 / s.tau && ratio <= s.tau {
                        cands.push((err, ratio, i, j));
                    }
                }
            }
        }
    }
    cands.sort_by(|x, y| {
        x.0.total_cmp(&y.0)
            .then(x.1.ln().abs().total_cmp(&y.1.ln().abs()))
            .then(x.2.cmp(&y.2))
            .then(x.3.cmp(&y.3))
    });
    let mut used_a = vec![false; kps_a.len()];
    let mut used_b = vec![false; kps_b.len()];
    let mut out = Vec::new();
    for (err, ratio, i, j) in cands {
        if used_a[i] || used_b[j] {
            continue;
        }
        used_a[i] = true;
        used_b[j] = true;
        out.push(Correspondence {
            index_a: i,
            index_b: j,
            projection_error: err,
            scale_ratio: ratio,
        });
    }
    Ok(RepeatabilityResult {
        correspondences: out,
        visible_a: vis_a.len(),
        visible_b: vis_b.len(),
    })
}

pub fn find_correspondences(
    kps_a: &[Keypoint],
    kps_b: &[Keypoint],
    h: &Homography,
    size_a: (usize, usize),
    size_b: (usize, usize),
    s: &EvalSettings,
) -> Result<Vec<Correspondence>> {
    Ok(evaluate(kps_a, kps_b, h, size_a, size_b, s)?.correspondences)
}

pub fn repeatability(
    kps_a: &[Keypoint],
    kps_b: &[Keypoint],
    h: &Homography,
    size_a: (usize, usize),
    size_b: (usize, usize),
    s: &EvalSettings,
) -> Result<f64> {
    Ok(evaluate(kps_a, kps_b, h, size_a, size_b, s)?.repeatability())
}

/// `(n_correct, n_total)`: a pair is correct when its query keypoint,
/// mapped by `h`, lands within `eps_pos` of its train keypoint.
pub fn score_matches(
    pairs: &[MatchPair],
    kps_a: &[Keypoint],
    kps_b: &[Keypoint],
    h: &Homography,
    eps_pos: f64,
) -> Result<(usize, usize)> {
    let mut correct = 0;
    for p in pairs {
        let (Some(a), Some(b)) = (kps_a.get(p.query_index), kps_b.get(p.train_index)) else {
            return Err(Error::InvalidInput(format!(
                "match ({}, {}) outside keypoint lists of {} and {}",
                p.query_index,
                p.train_index,
                kps_a.len(),
                kps_b.len()
            )));
        };
        if let Some((x, y)) = h.apply(a.x, a.y) {
            if (x - b.x).hypot(y - b.y) <= eps_pos {
                correct += 1;
            }
        }
    }
    Ok((correct, pairs.len()))
}
