//! Exhaustive two-nearest-neighbour matching and the ratio test.

use std::cmp::Ordering;
use std::io::Write;

use rayon::prelude::*;

use crate::describe::Descriptor;
use crate::error::{Error, Result};

pub const DEFAULT_RATIO: f64 = 0.75;
/// Neighbours retrieved per query by [`knn2_match`].
pub const KNN_K: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KnnCandidate {
    pub query_index: usize,
    pub best_index: usize,
    pub best_distance: f64,
    pub second_index: usize,
    pub second_distance: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MatchPair {
    pub query_index: usize,
    pub train_index: usize,
    pub distance: f64,
}

/// L2 for float descriptors, Hamming count for binary ones.
pub fn distance(a: &Descriptor, b: &Descriptor) -> Result<f64> {
    match (a, b) {
        (Descriptor::Float(x), Descriptor::Float(y)) if x.kind() == y.kind() => Ok(x
            .values()
            .iter()
            .zip(y.values())
            .map(|(p, q)| (p - q) * (p - q))
            .sum::<f64>()
            .sqrt()),
        (Descriptor::Binary(x), Descriptor::Binary(y)) if x.kind() == y.kind() => Ok(x
            .words()
            .iter()
            .zip(y.words())
            .map(|(p, q)| (p ^ q).count_ones())
            .sum::<u32>() as f64),
        _ => Err(Error::IncompatibleDescriptor(format!(
            "cannot compare {} with {}",
            a.kind(),
            b.kind()
        ))),
    }
}

/// 64-bit FNV-1a over the kind code and the descriptor payload.
pub fn content_hash(d: &Descriptor) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut feed = |bytes: &[u8]| {
        for &b in bytes {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    };
    feed(&[d.kind() as u8]);
    match d {
        Descriptor::Float(f) => f.values().iter().for_each(|v| feed(&v.to_le_bytes())),
        Descriptor::Binary(b) => feed(&b.to_bytes()),
    }
    h
}

/// For every query, the two closest train descriptors. Ties in distance go
/// to the smaller content hash, then to the lower index, so the result does
/// not depend on the train order except between identical descriptors.
pub fn knn2_match(queries: &[Descriptor], train: &[Descriptor]) -> Result<Vec<KnnCandidate>> {
    if train.len() < 2 {
        return Err(Error::InsufficientTrainSet(train.len()));
    }
    let kind = train[0].kind();
    if let Some(d) = queries.iter().chain(train).find(|d| d.kind() != kind) {
        return Err(Error::IncompatibleDescriptor(format!("{} mixed with {kind}", d.kind())));
    }
    let hashes: Vec<u64> = train.iter().map(content_hash).collect();
    let key = |d: f64, j: usize| (d, hashes[j], j);
    let less = |a: (f64, u64, usize), b: (f64, u64, usize)| {
        a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)) == Ordering::Less
    };
    queries
        .par_iter()
        .enumerate()
        .map(|(qi, q)| {
            let mut best = key(f64::INFINITY, 0);
            let mut second = key(f64::INFINITY, 0);
            for (j, t) in train.iter().enumerate() {
                let k = key(distance(q, t)?, j);
                if j == 0 || less(k, best) {
                    if j > 0 {
                        second = best;
                    }
                    best = k;
                } else if j == 1 || less(k, second) {
                    second = k;
                }
            }
            Ok(KnnCandidate {
                query_index: qi,
                best_index: best.2,
                best_distance: best.0,
                second_index: second.2,
                second_distance: second.0,
            })
        })
        .collect()
}

/// Keeps candidates with `best < ratio * second`, in input order.
pub fn ratio_filter(candidates: &[KnnCandidate], ratio: f64) -> Result<Vec<MatchPair>> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "ratio must lie in (0, 1), got {ratio}"
        )));
    }
    Ok(candidates
        .iter()
        .filter(|c| c.best_distance < ratio * c.second_distance)
        .map(|c| MatchPair {
            query_index: c.query_index,
            train_index: c.best_index,
            distance: c.best_distance,
        })
        .collect())
}

pub const MATCH_CSV_HEADER: [&str; 3] = ["query_index", "train_index", "distance"];

pub fn write_matches_csv<W: Write>(out: W, pairs: &[MatchPair]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(MATCH_CSV_HEADER)?;
    for p in pairs {
        w.write_record([
            p.query_index.to_string(),
            p.train_index.to_string(),
            crate::detect::format_sig(p.distance, 6),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<matches>", e))?;
    Ok(())
}
