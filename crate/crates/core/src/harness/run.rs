use std::collections::HashMap;
use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use super::aloi::{family_codes, load_aloi_subset, load_manifest, pairs_from_entries, AloiPair};
use super::config::BenchmarkConfig;
use super::synth::{generate_series, parameter_label, synthetic_texture, ConditionFamily};
use crate::describe::{describe_keypoints, Described, DescriptorKind};
use crate::detect::{detect, DetectorKind, Keypoint};
use crate::error::{Error, Result};
use crate::eval::{evaluate, score_matches};
use crate::image::io::load_image;
use crate::image::{GrayImage, Homography};
use crate::matching::{knn2_match, ratio_filter, MatchPair};

/// One row of `results.csv`: a (condition, detector, descriptor,
/// resolution) cell summed over every source image of the condition.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RepeatabilityRecord {
    pub family: ConditionFamily,
    pub parameter: String,
    /// Numeric parameter of synthetic conditions.
    pub value: Option<f64>,
    pub detector: DetectorKind,
    pub descriptor: DescriptorKind,
    pub resolution: f64,
    pub n_kp_ref: usize,
    pub n_kp_test: usize,
    /// `None` when the condition has no ground truth.
    pub n_correspondences: Option<usize>,
    /// Pooled: total correspondences over total `min(visible_a, visible_b)`.
    pub repeatability: Option<f64>,
    pub n_matches: usize,
    pub n_correct: Option<usize>,
    pub runtime_ms: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellFailure {
    pub family: ConditionFamily,
    pub parameter: String,
    pub detector: DetectorKind,
    pub descriptor: DescriptorKind,
    pub resolution: f64,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellTime {
    pub family: ConditionFamily,
    pub parameter: String,
    pub detector: DetectorKind,
    pub descriptor: DescriptorKind,
    pub resolution: f64,
    pub ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunMeta {
    pub config_digest: String,
    pub toolkit_version: String,
    pub threads: usize,
    pub total_cells: usize,
    pub failed_cells: usize,
    pub wall_time_ms: f64,
    pub cell_times: Vec<CellTime>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchmarkReport {
    pub records: Vec<RepeatabilityRecord>,
    pub failures: Vec<CellFailure>,
    pub meta: RunMeta,
}

impl BenchmarkReport {
    /// More than half of the cells failed.
    pub fn run_failed(&self) -> bool {
        2 * self.meta.failed_cells > self.meta.total_cells
    }

    pub fn empty(digest: String) -> Self {
        Self {
            records: Vec::new(),
            failures: Vec::new(),
            meta: RunMeta {
                config_digest: digest,
                toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
                threads: 0,
                total_cells: 0,
                failed_cells: 0,
                wall_time_ms: 0.0,
                cell_times: Vec::new(),
            },
        }
    }
}

#[derive(Clone, Debug)]
struct ConditionKey {
    family: ConditionFamily,
    label: String,
    value: Option<f64>,
    rank: usize,
}

enum RefSource {
    Texture(u64),
    File(PathBuf),
}

enum TestSource {
    Synthetic { family: ConditionFamily, value: f64 },
    File { path: PathBuf, h: Option<Homography> },
}

struct Unit {
    cond: usize,
    reference: usize,
    test: TestSource,
}

struct Plan {
    conditions: Vec<ConditionKey>,
    references: Vec<RefSource>,
    units: Vec<Unit>,
}

fn plan(cfg: &BenchmarkConfig) -> Result<Plan> {
    let mut conditions: Vec<ConditionKey> = Vec::new();
    let mut references = Vec::new();
    let mut units = Vec::new();

    let mut synthetic_refs = Vec::new();
    if cfg.families_of(true).next().is_some() {
        for p in &cfg.inputs.images {
            synthetic_refs.push(references.len());
            references.push(RefSource::File(p.clone()));
        }
        if let Some(s) = &cfg.inputs.synthetic {
            for k in 0..s.count {
                synthetic_refs.push(references.len());
                references.push(RefSource::Texture(cfg.seed.wrapping_add(k as u64)));
            }
        }
        if synthetic_refs.is_empty() {
            return Err(Error::Config(
                "synthetic families need input images or generated textures".into(),
            ));
        }
    }
    for fc in cfg.families_of(true) {
        for v in fc.parameters() {
            let label = parameter_label(fc.family, v);
            if conditions.iter().any(|c| c.family == fc.family && c.label == label) {
                continue;
            }
            let cond = conditions.len();
            conditions.push(ConditionKey {
                family: fc.family,
                label,
                value: Some(v),
                rank: 0,
            });
            for &r in &synthetic_refs {
                units.push(Unit {
                    cond,
                    reference: r,
                    test: TestSource::Synthetic {
                        family: fc.family,
                        value: v,
                    },
                });
            }
        }
    }

    if cfg.families_of(false).next().is_some() {
        let aloi = cfg
            .inputs
            .aloi
            .as_ref()
            .ok_or_else(|| Error::Config("ALOI families need [inputs.aloi]".into()))?;
        let wanted: Vec<ConditionFamily> = cfg.families_of(false).map(|f| f.family).collect();
        let pairs: Vec<AloiPair> = if let Some(m) = &aloi.manifest {
            pairs_from_entries(&load_manifest(m)?)?
                .into_iter()
                .filter(|p| wanted.contains(&p.reference.family))
                .collect()
        } else {
            let root = aloi
                .root
                .as_ref()
                .ok_or_else(|| Error::Config("[inputs.aloi] needs a root or a manifest".into()))?;
            let mut all = Vec::new();
            for &f in &wanted {
                match load_aloi_subset(root, f, &aloi.objects) {
                    Ok(p) => all.extend(p),
                    Err(Error::DatasetNotFound(m)) => log::warn!("aloi: {m}"),
                    Err(e) => return Err(e),
                }
            }
            all
        };
        if pairs.is_empty() {
            return Err(Error::DatasetNotFound(
                "no ALOI pairs for the configured families".into(),
            ));
        }
        let mut ref_index: HashMap<PathBuf, usize> = HashMap::new();
        for p in pairs {
            let family = p.reference.family;
            let label = p.label();
            let (_, codes) = family_codes(family)?;
            let rank = codes
                .iter()
                .position(|(r, t)| {
                    *t == p.test.condition_code
                        && (family != ConditionFamily::AloiStereo || *r == p.reference.condition_code)
                })
                .unwrap_or(codes.len());
            let cond = match conditions.iter().position(|c| c.family == family && c.label == label) {
                Some(c) => c,
                None => {
                    conditions.push(ConditionKey {
                        family,
                        label,
                        value: None,
                        rank,
                    });
                    conditions.len() - 1
                }
            };
            let reference = *ref_index.entry(p.reference.path.clone()).or_insert_with(|| {
                references.push(RefSource::File(p.reference.path.clone()));
                references.len() - 1
            });
            units.push(Unit {
                cond,
                reference,
                test: TestSource::File {
                    path: p.test.path,
                    h: p.ground_truth,
                },
            });
        }
    }
    Ok(Plan {
        conditions,
        references,
        units,
    })
}

/// Maps full-resolution pixel centres to those of a 2x2-averaged image.
fn halving() -> Homography {
    Homography::new([0.5, 0.0, -0.25, 0.0, 0.5, -0.25, 0.0, 0.0, 1.0]).expect("non-singular")
}

fn downsample(img: GrayImage, halvings: usize) -> Result<GrayImage> {
    let mut img = img;
    for _ in 0..halvings {
        img = img.half_average().ok_or_else(|| {
            Error::InvalidInput(format!("{}x{} image is too small to halve", img.width(), img.height()))
        })?;
    }
    Ok(img)
}

fn conjugate(h: &Homography, halvings: usize) -> Result<Homography> {
    let mut out = *h;
    let s = halving();
    let s_inv = s.inverse()?;
    for _ in 0..halvings {
        out = s * out * s_inv;
    }
    Ok(out)
}

fn halvings(resolution: f64) -> usize {
    (1.0 / resolution).log2().round() as usize
}

struct Features {
    keypoints: Vec<Keypoint>,
    described: Vec<std::result::Result<Described, String>>,
}

struct RefFeatures {
    size: (usize, usize),
    per_detector: Vec<std::result::Result<Features, String>>,
}

fn extract(cfg: &BenchmarkConfig, img: &GrayImage, det: DetectorKind) -> Result<Features> {
    let mut keypoints = detect(det, img, &cfg.detector_params)?;
    if cfg.max_keypoints > 0 {
        keypoints.truncate(cfg.max_keypoints);
    }
    let described = cfg
        .descriptors
        .iter()
        .map(|&d| describe_keypoints(d, img, &keypoints).map_err(|e| e.to_string()))
        .collect();
    Ok(Features { keypoints, described })
}

/// Partial counts of one cell from one source image.
#[derive(Clone, Copy, Default)]
struct Partial {
    n_kp_ref: usize,
    n_kp_test: usize,
    correspondences: Option<(usize, usize)>,
    n_matches: usize,
    n_correct: Option<usize>,
    ms: f64,
}

type CellResult = std::result::Result<Partial, String>;

fn match_pairs(q: &Described, t: &Described, ratio: f64) -> Result<Vec<MatchPair>> {
    if t.descriptors.len() < 2 || q.descriptors.is_empty() {
        return Ok(Vec::new());
    }
    ratio_filter(&knn2_match(&q.descriptors, &t.descriptors)?, ratio)
}

fn run_unit(
    cfg: &BenchmarkConfig,
    unit: &Unit,
    refs: &[RefFeatures],
    images: &[GrayImage],
    halv: usize,
) -> Vec<CellResult> {
    let n_cells = cfg.detectors.len() * cfg.descriptors.len();
    let reference = &refs[unit.reference];
    let prepared = (|| -> Result<(GrayImage, Option<Homography>)> {
        let (img, h) = match &unit.test {
            TestSource::Synthetic { family, value } => {
                let mut series = generate_series(&images[unit.reference], *family, &[*value])?;
                let (spec, img) = series
                    .pop()
                    .ok_or_else(|| Error::InvalidInput("empty condition series".into()))?;
                (img, spec.ground_truth)
            }
            TestSource::File { path, h } => (load_image(path)?, *h),
        };
        let h = h.map(|h| conjugate(&h, halv)).transpose()?;
        Ok((downsample(img, halv)?, h))
    })();
    let (img, h) = match prepared {
        Ok(v) => v,
        Err(e) => return vec![Err(e.to_string()); n_cells],
    };
    let size = (img.width(), img.height());
    let mut out = Vec::with_capacity(n_cells);
    for (di, &det) in cfg.detectors.iter().enumerate() {
        let start = Instant::now();
        let rf = match &reference.per_detector[di] {
            Ok(f) => f,
            Err(e) => {
                out.extend(std::iter::repeat_n(
                    Err(format!("reference: {e}")),
                    cfg.descriptors.len(),
                ));
                continue;
            }
        };
        let tf = match extract(cfg, &img, det) {
            Ok(f) => f,
            Err(e) => {
                out.extend(std::iter::repeat_n(Err(e.to_string()), cfg.descriptors.len()));
                continue;
            }
        };
        let corr = match &h {
            Some(h) => match evaluate(
                &rf.keypoints,
                &tf.keypoints,
                h,
                reference.size,
                size,
                &cfg.eval_settings(),
            ) {
                Ok(r) => Some(Ok((r.correspondences.len(), r.visible_a.min(r.visible_b)))),
                Err(e) => Some(Err(e.to_string())),
            },
            None => None,
        };
        let detect_ms = start.elapsed().as_secs_f64() * 1e3;
        for k in 0..cfg.descriptors.len() {
            let start = Instant::now();
            let cell = (|| -> std::result::Result<Partial, String> {
                let correspondences = corr.clone().transpose()?;
                let q = rf.described[k].as_ref().map_err(|e| format!("reference: {e}"))?;
                let t = tf.described[k].as_ref().map_err(|e| e.clone())?;
                let pairs = match_pairs(q, t, cfg.ratio).map_err(|e| e.to_string())?;
                let n_correct = match &h {
                    Some(h) => Some(
                        score_matches(&pairs, &q.keypoints, &t.keypoints, h, cfg.eps_pos)
                            .map_err(|e| e.to_string())?
                            .0,
                    ),
                    None => None,
                };
                Ok(Partial {
                    n_kp_ref: rf.keypoints.len(),
                    n_kp_test: tf.keypoints.len(),
                    correspondences,
                    n_matches: pairs.len(),
                    n_correct,
                    ms: 0.0,
                })
            })();
            let ms = detect_ms + start.elapsed().as_secs_f64() * 1e3;
            out.push(cell.map(|p| Partial { ms, ..p }));
        }
    }
    out
}

fn with_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Runs the detector x descriptor grid over every configured condition and
/// resolution. Cell-level errors become [`CellFailure`]s; only setup errors
/// (bad config, unreadable inputs) fail the call.
pub fn run_benchmark(cfg: &BenchmarkConfig) -> Result<BenchmarkReport> {
    let started = Instant::now();
    cfg.validate()?;
    let mut cfg = cfg.clone();
    cfg.detectors.sort();
    cfg.detectors.dedup();
    cfg.descriptors.sort();
    cfg.descriptors.dedup();
    cfg.resolutions.sort_by(|a, b| b.total_cmp(a));
    cfg.resolutions.dedup();
    let threads = cfg.effective_threads()?;
    let cfg = &cfg;

    let Plan {
        conditions,
        references,
        units,
    } = plan(cfg)?;
    let n_det = cfg.detectors.len();
    let n_desc = cfg.descriptors.len();
    let n_res = cfg.resolutions.len();

    let (images, refs, results) = with_pool(threads, || -> Result<_> {
        // Full-resolution synthetic references, needed to regenerate test images.
        let images: Vec<GrayImage> = references
            .par_iter()
            .map(|r| match r {
                RefSource::Texture(seed) => {
                    let s = cfg.inputs.synthetic.as_ref().map_or(256, |s| s.size);
                    synthetic_texture(*seed, s, s)
                }
                RefSource::File(p) => load_image(p),
            })
            .collect::<Result<_>>()?;
        let jobs: Vec<(usize, usize)> = (0..n_res)
            .flat_map(|ri| (0..references.len()).map(move |r| (ri, r)))
            .collect();
        let refs: Vec<RefFeatures> = jobs
            .par_iter()
            .map(|&(ri, r)| {
                let img = downsample(images[r].clone(), halvings(cfg.resolutions[ri]))?;
                Ok(RefFeatures {
                    size: (img.width(), img.height()),
                    per_detector: cfg
                        .detectors
                        .iter()
                        .map(|&d| extract(cfg, &img, d).map_err(|e| e.to_string()))
                        .collect(),
                })
            })
            .collect::<Result<_>>()?;
        let work: Vec<(usize, usize)> = (0..units.len())
            .flat_map(|u| (0..n_res).map(move |ri| (u, ri)))
            .collect();
        let results: Vec<Vec<CellResult>> = work
            .par_iter()
            .map(|&(u, ri)| {
                let unit = &units[u];
                let refs_at = &refs[ri * references.len()..(ri + 1) * references.len()];
                let r = run_unit(cfg, unit, refs_at, &images, halvings(cfg.resolutions[ri]));
                log::debug!("unit {u} at resolution {} done", cfg.resolutions[ri]);
                r
            })
            .collect();
        Ok((images, refs, results))
    })??;
    drop((images, refs));

    // Accumulate per cell: (cond, det, desc, res).
    let cell_index = |c: usize, d: usize, k: usize, r: usize| ((c * n_det + d) * n_desc + k) * n_res + r;
    let n_cells = conditions.len() * n_det * n_desc * n_res;
    let mut acc: Vec<std::result::Result<Option<Partial>, String>> = vec![Ok(None); n_cells];
    let work = (0..units.len()).flat_map(|u| (0..n_res).map(move |ri| (u, ri)));
    for ((u, ri), cells) in work.zip(results) {
        for (slot, cell) in cells.into_iter().enumerate() {
            let idx = cell_index(units[u].cond, slot / n_desc, slot % n_desc, ri);
            let merged = match (&acc[idx], cell) {
                (Err(_), _) => continue,
                (_, Err(e)) => Err(e),
                (Ok(None), Ok(p)) => Ok(Some(p)),
                (Ok(Some(a)), Ok(p)) => Ok(Some(Partial {
                    n_kp_ref: a.n_kp_ref + p.n_kp_ref,
                    n_kp_test: a.n_kp_test + p.n_kp_test,
                    correspondences: a
                        .correspondences
                        .zip(p.correspondences)
                        .map(|(x, y)| (x.0 + y.0, x.1 + y.1)),
                    n_matches: a.n_matches + p.n_matches,
                    n_correct: a.n_correct.zip(p.n_correct).map(|(x, y)| x + y),
                    ms: a.ms + p.ms,
                })),
            };
            acc[idx] = merged;
        }
    }

    let mut order: Vec<usize> = (0..conditions.len()).collect();
    order.sort_by(|&a, &b| {
        let (x, y) = (&conditions[a], &conditions[b]);
        x.family
            .cmp(&y.family)
            .then(match (x.value, y.value) {
                (Some(p), Some(q)) => p.total_cmp(&q),
                _ => x.rank.cmp(&y.rank),
            })
            .then(x.label.cmp(&y.label))
    });

    let mut records = Vec::new();
    let mut failures = Vec::new();
    let mut cell_times = Vec::new();
    for &c in &order {
        let cond = &conditions[c];
        for (d, &detector) in cfg.detectors.iter().enumerate() {
            for (k, &descriptor) in cfg.descriptors.iter().enumerate() {
                for (r, &resolution) in cfg.resolutions.iter().enumerate() {
                    match &acc[cell_index(c, d, k, r)] {
                        Ok(Some(p)) => {
                            cell_times.push(CellTime {
                                family: cond.family,
                                parameter: cond.label.clone(),
                                detector,
                                descriptor,
                                resolution,
                                ms: p.ms,
                            });
                            records.push(RepeatabilityRecord {
                                family: cond.family,
                                parameter: cond.label.clone(),
                                value: cond.value,
                                detector,
                                descriptor,
                                resolution,
                                n_kp_ref: p.n_kp_ref,
                                n_kp_test: p.n_kp_test,
                                n_correspondences: p.correspondences.map(|c| c.0),
                                repeatability: p.correspondences.map(|(n, vis)| {
                                    if vis == 0 {
                                        0.0
                                    } else {
                                        n as f64 / vis as f64
                                    }
                                }),
                                n_matches: p.n_matches,
                                n_correct: p.n_correct,
                                runtime_ms: cfg.record_timing.then_some(p.ms),
                            });
                        }
                        Ok(None) => failures.push(CellFailure {
                            family: cond.family,
                            parameter: cond.label.clone(),
                            detector,
                            descriptor,
                            resolution,
                            reason: "no source image produced this cell".into(),
                        }),
                        Err(reason) => {
                            log::warn!(
                                "cell {} {} {detector}+{descriptor} @{resolution} failed: {reason}",
                                cond.family,
                                cond.label
                            );
                            failures.push(CellFailure {
                                family: cond.family,
                                parameter: cond.label.clone(),
                                detector,
                                descriptor,
                                resolution,
                                reason: reason.clone(),
                            })
                        }
                    }
                }
            }
        }
    }
    let failed_cells = failures.len();
    let report = BenchmarkReport {
        records,
        failures,
        meta: RunMeta {
            config_digest: cfg.digest(),
            toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
            threads: if threads == 0 {
                rayon::current_num_threads()
            } else {
                threads
            },
            total_cells: n_cells,
            failed_cells,
            wall_time_ms: started.elapsed().as_secs_f64() * 1e3,
            cell_times,
        },
    };
    if report.run_failed() {
        log::error!("{failed_cells} of {n_cells} cells failed");
    }
    Ok(report)
}
