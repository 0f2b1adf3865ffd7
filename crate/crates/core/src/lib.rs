//! Keypoint detection, description and matching toolkit with a
//! homography-based repeatability benchmark.
//!
//! Four detectors (difference-of-Gaussians, fast-Hessian, MSER and
//! BRISK scale-space corners) and four descriptors (SIFT, SURF, BRISK and
//! FREAK) share one [`Keypoint`] format, so every detector can be paired
//! with every descriptor. The [`harness`] module runs the full
//! detector × descriptor grid over synthetic or ALOI conditions.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod describe;
pub mod detect;
mod error;
pub mod eval;
pub mod harness;
pub mod image;
pub mod matching;

pub use describe::{BinaryDescriptor, Descriptor, DescriptorKind, FloatDescriptor};
pub use detect::{DetectorKind, DetectorParams, Keypoint};
pub use error::{Error, Result};
pub use eval::{Correspondence, EvalSettings};
pub use image::{GrayImage, Homography, IntegralImage};
pub use matching::{KnnCandidate, MatchPair};
