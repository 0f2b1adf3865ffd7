//! Float (SIFT, SURF) and binary (BRISK, FREAK) descriptors.

mod export;
mod orientation;
mod pattern;
mod sift;
mod surf;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use export::{read_descriptors, write_descriptors, DescriptorSet};
pub use orientation::assign_orientation;
pub use pattern::{describe_brisk, describe_freak, pattern_orientation, SamplingPattern};
pub use sift::describe_sift;
pub use surf::{describe_surf, surf_subregion};

use crate::detect::Keypoint;
use crate::error::{Error, Result};
use crate::image::{build_gaussian_pyramid, GaussianPyramid, GrayImage, IntegralImage};

pub const BINARY_BITS: usize = 512;
const BINARY_WORDS: usize = BINARY_BITS / 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DescriptorKind {
    Sift,
    Surf,
    Brisk,
    Freak,
}

impl DescriptorKind {
    pub const ALL: [DescriptorKind; 4] = [
        DescriptorKind::Sift,
        DescriptorKind::Surf,
        DescriptorKind::Brisk,
        DescriptorKind::Freak,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            DescriptorKind::Sift => "sift",
            DescriptorKind::Surf => "surf",
            DescriptorKind::Brisk => "brisk",
            DescriptorKind::Freak => "freak",
        }
    }

    pub fn is_binary(self) -> bool {
        matches!(self, DescriptorKind::Brisk | DescriptorKind::Freak)
    }

    /// Vector length for float kinds, bit count for binary kinds.
    pub fn dim(self) -> usize {
        match self {
            DescriptorKind::Sift => 128,
            DescriptorKind::Surf => 64,
            DescriptorKind::Brisk | DescriptorKind::Freak => BINARY_BITS,
        }
    }

    pub(crate) fn code(self) -> u8 {
        self as u8
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        DescriptorKind::ALL.get(code as usize).copied()
    }
}

impl fmt::Display for DescriptorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for DescriptorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DescriptorKind::ALL
            .into_iter()
            .find(|k| k.tag() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown descriptor {s:?} (sift, surf, brisk, freak)")))
    }
}

/// Unit-norm real vector.
#[derive(Clone, Debug, PartialEq)]
pub struct FloatDescriptor {
    kind: DescriptorKind,
    values: Vec<f64>,
}

impl FloatDescriptor {
    /// L2-normalizes `raw`; an all-zero vector is rejected.
    pub fn normalized(kind: DescriptorKind, mut raw: Vec<f64>) -> Result<Self> {
        if kind.is_binary() || raw.len() != kind.dim() {
            return Err(Error::InvalidInput(format!(
                "{kind} expects {} values, got {}",
                kind.dim(),
                raw.len()
            )));
        }
        if raw.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("{kind}: non-finite descriptor entry")));
        }
        let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::DegenerateDescriptor(format!("{kind}: zero vector")));
        }
        raw.iter_mut().for_each(|v| *v /= norm);
        Ok(Self { kind, values: raw })
    }

    /// Wraps stored values as-is (used when reading exported descriptors).
    pub fn from_values(kind: DescriptorKind, values: Vec<f64>) -> Result<Self> {
        if kind.is_binary() || values.len() != kind.dim() {
            return Err(Error::InvalidInput(format!(
                "{kind} expects {} values, got {}",
                kind.dim(),
                values.len()
            )));
        }
        Ok(Self { kind, values })
    }

    pub fn kind(&self) -> DescriptorKind {
        self.kind
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// 512 comparison bits; bit `k` lives in word `k / 64` at position `k % 64`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BinaryDescriptor {
    kind: DescriptorKind,
    words: [u64; BINARY_WORDS],
}

impl BinaryDescriptor {
    pub fn from_bits(kind: DescriptorKind, bits: &[bool]) -> Result<Self> {
        if !kind.is_binary() || bits.len() != BINARY_BITS {
            return Err(Error::InvalidInput(format!(
                "{kind} expects {BINARY_BITS} bits, got {}",
                bits.len()
            )));
        }
        let mut words = [0u64; BINARY_WORDS];
        for (k, &b) in bits.iter().enumerate() {
            if b {
                words[k / 64] |= 1 << (k % 64);
            }
        }
        Ok(Self { kind, words })
    }

    pub fn from_words(kind: DescriptorKind, words: [u64; BINARY_WORDS]) -> Result<Self> {
        if !kind.is_binary() {
            return Err(Error::InvalidInput(format!("{kind} is not a binary descriptor")));
        }
        Ok(Self { kind, words })
    }

    pub fn kind(&self) -> DescriptorKind {
        self.kind
    }

    pub fn words(&self) -> &[u64; BINARY_WORDS] {
        &self.words
    }

    pub fn bit(&self, k: usize) -> bool {
        self.words[k / 64] >> (k % 64) & 1 == 1
    }

    pub fn count_ones(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    /// Packed bytes, least-significant bit first.
    pub fn to_bytes(&self) -> [u8; BINARY_BITS / 8] {
        let mut out = [0u8; BINARY_BITS / 8];
        for (i, w) in self.words.iter().enumerate() {
            out[i * 8..i * 8 + 8].copy_from_slice(&w.to_le_bytes());
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Descriptor {
    Float(FloatDescriptor),
    Binary(BinaryDescriptor),
}

impl Descriptor {
    pub fn kind(&self) -> DescriptorKind {
        match self {
            Descriptor::Float(d) => d.kind,
            Descriptor::Binary(d) => d.kind,
        }
    }

    pub fn dim(&self) -> usize {
        self.kind().dim()
    }
}

impl From<FloatDescriptor> for Descriptor {
    fn from(d: FloatDescriptor) -> Self {
        Descriptor::Float(d)
    }
}

impl From<BinaryDescriptor> for Descriptor {
    fn from(d: BinaryDescriptor) -> Self {
        Descriptor::Binary(d)
    }
}

/// Output of [`describe_keypoints`]: one entry per described keypoint.
///
/// `keypoints[i]` carries the orientation used for `descriptors[i]` and
/// `source[i]` indexes the input keypoint it came from. Orientation
/// assignment can emit several entries per input keypoint.
#[derive(Clone, Debug, Default)]
pub struct Described {
    pub keypoints: Vec<Keypoint>,
    pub descriptors: Vec<Descriptor>,
    pub source: Vec<usize>,
    /// Input keypoints that produced no descriptor.
    pub skipped: usize,
}

/// Blur schedule of the pyramid used for gradient orientations and SIFT.
const PYR_BASE_SIGMA: f64 = 1.6;
const PYR_INTERVALS: usize = 3;
const PYR_MAX_OCTAVES: usize = 8;

/// Per-image state shared by every keypoint of one describe call.
pub struct DescribeContext {
    pyramid: Option<GaussianPyramid>,
    integral: Option<IntegralImage>,
}

impl DescribeContext {
    pub fn new(kind: DescriptorKind, img: &GrayImage) -> Result<Self> {
        let pyramid = match kind {
            DescriptorKind::Sift | DescriptorKind::Surf => Some(build_gaussian_pyramid(
                img,
                PYR_MAX_OCTAVES,
                PYR_INTERVALS + 3,
                PYR_BASE_SIGMA,
                2f64.powf(1.0 / PYR_INTERVALS as f64),
            )?),
            _ => None,
        };
        let integral = match kind {
            DescriptorKind::Sift => None,
            _ => Some(IntegralImage::new(img)),
        };
        Ok(Self { pyramid, integral })
    }

    /// Oriented copies of `kp` from the gradient histogram at the pyramid
    /// level nearest its scale, in original-image coordinates.
    fn oriented(&self, kp: &Keypoint) -> Vec<(Keypoint, (usize, usize))> {
        let pyr = self.pyramid.as_ref().expect("pyramid built for gradient descriptors");
        let (o, l) = pyr.nearest_level(kp.scale);
        let f = (1u64 << o) as f64;
        let local = to_level(kp, f);
        assign_orientation(pyr.level(o, l), &local)
            .into_iter()
            .map(|k| {
                (
                    Keypoint {
                        orientation: k.orientation,
                        ..*kp
                    },
                    (o, l),
                )
            })
            .collect()
    }

    pub fn describe(&self, kind: DescriptorKind, kp: &Keypoint) -> Result<Vec<(Keypoint, Descriptor)>> {
        match kind {
            DescriptorKind::Sift => {
                let pyr = self.pyramid.as_ref().expect("pyramid built for sift");
                self.oriented(kp)
                    .into_iter()
                    .map(|(k, (o, l))| {
                        let local = to_level(&k, (1u64 << o) as f64);
                        Ok((k, describe_sift(pyr.level(o, l), &local)?.into()))
                    })
                    .collect()
            }
            DescriptorKind::Surf => {
                let ii = self.integral.as_ref().expect("integral image built for surf");
                self.oriented(kp)
                    .into_iter()
                    .map(|(k, _)| Ok((k, describe_surf(ii, &k)?.into())))
                    .collect()
            }
            DescriptorKind::Brisk | DescriptorKind::Freak => {
                let ii = self
                    .integral
                    .as_ref()
                    .expect("integral image built for binary descriptors");
                let (d, angle) = if kind == DescriptorKind::Brisk {
                    describe_brisk(ii, kp)?
                } else {
                    describe_freak(ii, kp)?
                };
                Ok(vec![(
                    Keypoint {
                        orientation: angle,
                        ..*kp
                    },
                    d.into(),
                )])
            }
        }
    }
}

/// Keypoint in the pixel grid of an octave decimated by `f`.
fn to_level(kp: &Keypoint, f: f64) -> Keypoint {
    Keypoint {
        x: kp.x / f,
        y: kp.y / f,
        scale: kp.scale / f,
        ..*kp
    }
}

/// Describes every keypoint that admits a descriptor; the rest are counted
/// in [`Described::skipped`].
pub fn describe_keypoints(kind: DescriptorKind, img: &GrayImage, kps: &[Keypoint]) -> Result<Described> {
    let ctx = DescribeContext::new(kind, img)?;
    let mut out = Described::default();
    for (i, kp) in kps.iter().enumerate() {
        match ctx.describe(kind, kp) {
            Ok(list) if !list.is_empty() => {
                for (k, d) in list {
                    out.keypoints.push(k);
                    out.descriptors.push(d);
                    out.source.push(i);
                }
            }
            Ok(_) => out.skipped += 1,
            Err(e @ (Error::OutOfBounds(_) | Error::DegenerateDescriptor(_))) => {
                log::trace!("{kind}: keypoint {i} skipped: {e}");
                out.skipped += 1;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kind_tags_round_trip() {
        for k in DescriptorKind::ALL {
            assert_eq!(k.tag().parse::<DescriptorKind>().unwrap(), k);
            assert_eq!(DescriptorKind::from_code(k.code()), Some(k));
        }
        assert!("orb".parse::<DescriptorKind>().is_err());
    }

    #[test]
    fn float_normalization() {
        let mut raw = vec![0.0; 64];
        raw[0] = 3.0;
        raw[1] = 4.0;
        let d = FloatDescriptor::normalized(DescriptorKind::Surf, raw).unwrap();
        assert!((d.values()[0] - 0.6).abs() < 1e-15 && (d.values()[1] - 0.8).abs() < 1e-15);
        assert!(matches!(
            FloatDescriptor::normalized(DescriptorKind::Surf, vec![0.0; 64]),
            Err(Error::DegenerateDescriptor(_))
        ));
        assert!(FloatDescriptor::normalized(DescriptorKind::Sift, vec![1.0; 64]).is_err());
    }

    #[test]
    fn bit_packing_is_lsb_first() {
        let mut bits = vec![false; BINARY_BITS];
        bits[0] = true;
        bits[9] = true;
        bits[511] = true;
        let d = BinaryDescriptor::from_bits(DescriptorKind::Brisk, &bits).unwrap();
        let bytes = d.to_bytes();
        assert_eq!(bytes[0], 0b0000_0001);
        assert_eq!(bytes[1], 0b0000_0010);
        assert_eq!(bytes[63], 0b1000_0000);
        assert!(d.bit(9) && !d.bit(8));
        assert_eq!(d.count_ones(), 3);
    }
}
