use serde::{Deserialize, Serialize};

use super::{sort_keypoints, DetectorKind, Keypoint};
use crate::error::{Error, Result};
use crate::image::GrayImage;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MserParams {
    /// Gray-level step used by the stability measure.
    pub delta: u8,
    pub min_area: usize,
    /// Absolute area cap; `None` means 1% of the image area.
    pub max_area: Option<usize>,
    pub max_variation: f64,
}

impl Default for MserParams {
    fn default() -> Self {
        Self {
            delta: 5,
            min_area: 30,
            max_area: None,
            max_variation: 0.25,
        }
    }
}

impl MserParams {
    pub fn validate(&self) -> Result<()> {
        if self.delta == 0 {
            return Err(Error::InvalidParameter("mser: delta must be >= 1".into()));
        }
        if let Some(max) = self.max_area {
            if self.min_area >= max {
                return Err(Error::InvalidParameter(format!(
                    "mser: min_area {} must be below max_area {max}",
                    self.min_area
                )));
            }
        }
        if !(self.max_variation >= 0.0) {
            return Err(Error::InvalidParameter(
                "mser: max_variation must be non-negative".into(),
            ));
        }
        Ok(())
    }

    pub fn max_area_for(&self, width: usize, height: usize) -> usize {
        self.max_area.unwrap_or((width * height) / 100)
    }
}

/// Regions from the dark-on-bright sweep and from the bright-on-dark sweep.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MserRegions {
    pub dark: Vec<Keypoint>,
    pub bright: Vec<Keypoint>,
}

/// Stability floor so a perfectly stable region has a finite response.
const MIN_STABILITY: f64 = 1e-6;

pub fn detect_mser_regions(img: &GrayImage, p: &MserParams) -> Result<MserRegions> {
    p.validate()?;
    let (w, h) = (img.width(), img.height());
    let max_area = p.max_area_for(w, h);
    let levels = img.to_u8();
    let inverted: Vec<u8> = levels.iter().map(|v| 255 - v).collect();
    let to_kps = |regions: Vec<Region>| {
        let mut kps: Vec<Keypoint> = regions
            .into_iter()
            .map(|r| Keypoint {
                x: r.cx,
                y: r.cy,
                scale: (r.area as f64 / std::f64::consts::PI).sqrt(),
                orientation: 0.0,
                response: 1.0 / r.stability.max(MIN_STABILITY),
                octave: 0,
                detector: DetectorKind::Mser,
            })
            .collect();
        sort_keypoints(&mut kps);
        kps
    };
    Ok(MserRegions {
        dark: to_kps(stable_regions(&levels, w, h, p, max_area)),
        bright: to_kps(stable_regions(&inverted, w, h, p, max_area)),
    })
}

/// Maximally stable extremal regions of both polarities, one keypoint per
/// region at its centroid with scale `sqrt(area / pi)`.
pub fn detect_mser(img: &GrayImage, p: &MserParams) -> Result<Vec<Keypoint>> {
    let MserRegions { mut dark, bright } = detect_mser_regions(img, p)?;
    dark.extend(bright);
    sort_keypoints(&mut dark);
    Ok(dark)
}

#[derive(Clone, Debug)]
pub(crate) struct Region {
    pub cx: f64,
    pub cy: f64,
    pub area: usize,
    pub stability: f64,
}

#[derive(Clone, Debug)]
struct Node {
    level: u8,
    area: usize,
    sum_x: f64,
    sum_y: f64,
    min_index: usize,
    parent: Option<usize>,
    main_child: Option<usize>,
}

/// Union-find over pixels added in increasing intensity; every level at
/// which a component grows opens a new tree node.
fn build_tree(levels: &[u8], w: usize, h: usize) -> Vec<Node> {
    let n = w * h;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| levels[i]);

    let mut parent: Vec<usize> = (0..n).collect();
    let mut added = vec![false; n];
    let mut area = vec![0usize; n];
    let mut sum_x = vec![0.0f64; n];
    let mut sum_y = vec![0.0f64; n];
    let mut min_index = vec![usize::MAX; n];
    let mut node_of: Vec<Option<usize>> = vec![None; n];
    let mut touched_at: Vec<i32> = vec![-1; n];
    let mut pending: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut nodes: Vec<Node> = Vec::new();

    fn find(parent: &mut [usize], mut i: usize) -> usize {
        let mut root = i;
        while parent[root] != root {
            root = parent[root];
        }
        while parent[i] != root {
            let next = parent[i];
            parent[i] = root;
            i = next;
        }
        root
    }

    let mut start = 0;
    while start < n {
        let t = levels[order[start]];
        let mut end = start;
        while end < n && levels[order[end]] == t {
            end += 1;
        }
        let mut touched = Vec::new();
        let mut touch =
            |r: usize, touched_at: &mut [i32], node_of: &mut [Option<usize>], pending: &mut [Vec<usize>]| {
                if touched_at[r] != t as i32 {
                    touched_at[r] = t as i32;
                    if let Some(nd) = node_of[r].take() {
                        pending[r].push(nd);
                    }
                    touched.push(r);
                }
            };
        for &p in &order[start..end] {
            added[p] = true;
            area[p] = 1;
            sum_x[p] = (p % w) as f64;
            sum_y[p] = (p / w) as f64;
            min_index[p] = p;
            touch(p, &mut touched_at, &mut node_of, &mut pending);
            let (x, y) = (p % w, p / w);
            let mut neighbors = [usize::MAX; 4];
            if x > 0 {
                neighbors[0] = p - 1;
            }
            if x + 1 < w {
                neighbors[1] = p + 1;
            }
            if y > 0 {
                neighbors[2] = p - w;
            }
            if y + 1 < h {
                neighbors[3] = p + w;
            }
            for q in neighbors {
                if q == usize::MAX || !added[q] {
                    continue;
                }
                let rp = find(&mut parent, p);
                let rq = find(&mut parent, q);
                if rp == rq {
                    continue;
                }
                touch(rq, &mut touched_at, &mut node_of, &mut pending);
                let (big, small) = if area[rp] >= area[rq] { (rp, rq) } else { (rq, rp) };
                parent[small] = big;
                area[big] += area[small];
                sum_x[big] += sum_x[small];
                sum_y[big] += sum_y[small];
                min_index[big] = min_index[big].min(min_index[small]);
                let moved = std::mem::take(&mut pending[small]);
                pending[big].extend(moved);
            }
        }
        for r in touched {
            if find(&mut parent, r) != r {
                continue;
            }
            let id = nodes.len();
            let children = std::mem::take(&mut pending[r]);
            let main_child = children.iter().copied().max_by(|&a, &b| {
                nodes[a]
                    .area
                    .cmp(&nodes[b].area)
                    .then(nodes[b].min_index.cmp(&nodes[a].min_index))
            });
            for &c in &children {
                nodes[c].parent = Some(id);
            }
            nodes.push(Node {
                level: t,
                area: area[r],
                sum_x: sum_x[r],
                sum_y: sum_y[r],
                min_index: min_index[r],
                parent: None,
                main_child,
            });
            node_of[r] = Some(id);
        }
        start = end;
    }
    nodes
}

fn last_level(nodes: &[Node], n: usize) -> u8 {
    nodes[n].parent.map_or(255, |p| nodes[p].level - 1)
}

/// `(|R(t + delta)| - |R(t - delta)|) / |R(t)|` for the region `n` at level `t`.
fn stability_at(nodes: &[Node], n: usize, t: u8, delta: u8) -> f64 {
    let up = t as usize + delta as usize;
    let mut hi = n;
    while let Some(p) = nodes[hi].parent {
        if nodes[p].level as usize > up {
            break;
        }
        hi = p;
    }
    let lower_area = if (t as usize) < delta as usize {
        0
    } else {
        let down = t - delta;
        let mut lo = Some(n);
        while let Some(c) = lo {
            if nodes[c].level <= down {
                break;
            }
            lo = nodes[c].main_child;
        }
        lo.map_or(0, |c| nodes[c].area)
    };
    (nodes[hi].area - lower_area) as f64 / nodes[n].area as f64
}

pub(crate) fn stable_regions(levels: &[u8], w: usize, h: usize, p: &MserParams, max_area: usize) -> Vec<Region> {
    let nodes = build_tree(levels, w, h);
    let mut out = Vec::new();
    for (n, node) in nodes.iter().enumerate() {
        if node.area < p.min_area || node.area > max_area {
            continue;
        }
        let best = (node.level..=last_level(&nodes, n))
            .map(|t| stability_at(&nodes, n, t, p.delta))
            .fold(f64::INFINITY, f64::min);
        if best > p.max_variation {
            continue;
        }
        if let Some(par) = node.parent {
            if best >= stability_at(&nodes, par, nodes[par].level, p.delta) {
                continue;
            }
        }
        if let Some(c) = node.main_child {
            if best > stability_at(&nodes, c, node.level - 1, p.delta) {
                continue;
            }
        }
        out.push(Region {
            cx: node.sum_x / node.area as f64,
            cy: node.sum_y / node.area as f64,
            area: node.area,
            stability: best,
        });
    }
    out
}
