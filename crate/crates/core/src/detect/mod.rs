//! Keypoint detectors sharing one [`Keypoint`] format.

mod brisk;
mod dog;
mod hessian;
mod mser;

use std::cmp::Ordering;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use brisk::{detect_brisk_corners, fast_score, BriskParams, BriskScaleSpace, FAST_CIRCLE};
pub use dog::{detect_dog, DogParams};
pub use hessian::{box_hessian, detect_fast_hessian, filter_size, hessian_determinant, FastHessianParams};
pub use mser::{detect_mser, detect_mser_regions, MserParams, MserRegions};

use crate::error::{Error, Result};
use crate::image::GrayImage;

/// Detectors refuse images with a side shorter than this.
pub const MIN_DETECT_DIM: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorKind {
    Dog,
    FastHessian,
    Mser,
    Brisk,
}

impl DetectorKind {
    pub const ALL: [DetectorKind; 4] = [
        DetectorKind::Dog,
        DetectorKind::FastHessian,
        DetectorKind::Mser,
        DetectorKind::Brisk,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            DetectorKind::Dog => "dog",
            DetectorKind::FastHessian => "fast_hessian",
            DetectorKind::Mser => "mser",
            DetectorKind::Brisk => "brisk",
        }
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for DetectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DetectorKind::ALL
            .into_iter()
            .find(|k| k.tag() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown detector {s:?} (dog, fast_hessian, mser, brisk)")))
    }
}

/// Interest point in original-image pixel coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    /// Characteristic sigma in original-image pixels.
    pub scale: f64,
    /// Radians in `(-pi, pi]`; 0 when unassigned.
    pub orientation: f64,
    pub response: f64,
    pub octave: usize,
    pub detector: DetectorKind,
}

impl Keypoint {
    pub fn new(x: f64, y: f64, scale: f64, detector: DetectorKind) -> Self {
        Self {
            x,
            y,
            scale,
            orientation: 0.0,
            response: 0.0,
            octave: 0,
            detector,
        }
    }
}

/// Response descending, then `(y, x, scale)` ascending.
pub fn keypoint_order(a: &Keypoint, b: &Keypoint) -> Ordering {
    b.response
        .total_cmp(&a.response)
        .then(a.y.total_cmp(&b.y))
        .then(a.x.total_cmp(&b.x))
        .then(a.scale.total_cmp(&b.scale))
}

pub fn sort_keypoints(kps: &mut [Keypoint]) {
    kps.sort_by(keypoint_order);
}

/// Parameters for all four detectors.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorParams {
    pub dog: DogParams,
    pub fast_hessian: FastHessianParams,
    pub mser: MserParams,
    pub brisk: BriskParams,
}

impl DetectorParams {
    pub fn validate(&self) -> Result<()> {
        self.dog.validate()?;
        self.fast_hessian.validate()?;
        self.mser.validate()?;
        self.brisk.validate()
    }
}

/// Runs one detector; the result is sorted by [`keypoint_order`].
pub fn detect(kind: DetectorKind, img: &GrayImage, params: &DetectorParams) -> Result<Vec<Keypoint>> {
    match kind {
        DetectorKind::Dog => detect_dog(img, &params.dog),
        DetectorKind::FastHessian => detect_fast_hessian(img, &params.fast_hessian),
        DetectorKind::Mser => detect_mser(img, &params.mser),
        DetectorKind::Brisk => detect_brisk_corners(img, &params.brisk),
    }
}

pub(crate) fn too_small(img: &GrayImage, who: &str) -> bool {
    if img.width().min(img.height()) < MIN_DETECT_DIM {
        log::debug!(
            "{who}: {}x{} image is below the {MIN_DETECT_DIM}px minimum, no keypoints",
            img.width(),
            img.height()
        );
        return true;
    }
    false
}

/// `%g`-style formatting with `digits` significant digits.
pub fn format_sig(v: f64, digits: usize) -> String {
    if v == 0.0 || !v.is_finite() {
        return if v.is_finite() { "0".into() } else { v.to_string() };
    }
    let exp = v.abs().log10().floor() as i32;
    // Rounding can carry into the next decade (e.g. 999999.7).
    let exp = {
        let rounded = format!("{:.*e}", digits - 1, v);
        rounded
            .split('e')
            .nth(1)
            .and_then(|e| e.parse::<i32>().ok())
            .unwrap_or(exp)
    };
    if exp < -5 || exp >= digits as i32 {
        let s = format!("{:.*e}", digits - 1, v);
        let (mant, e) = s.split_once('e').expect("exponent");
        format!("{}e{}", trim_zeros(mant), e)
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, v)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub const KEYPOINT_CSV_HEADER: &str = "x,y,scale,orientation,response,octave,detector";

pub fn write_keypoints_csv(kps: &[Keypoint], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(KEYPOINT_CSV_HEADER.split(','))?;
    for kp in kps {
        w.write_record([
            format_sig(kp.x, 6),
            format_sig(kp.y, 6),
            format_sig(kp.scale, 6),
            format_sig(kp.orientation, 6),
            format_sig(kp.response, 6),
            kp.octave.to_string(),
            kp.detector.tag().to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<keypoint csv>", e))?;
    Ok(())
}

/// Solves the 3x3 system `a * x = b` by Cramer's rule.
pub(crate) fn solve3(a: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let det = |m: [[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(a);
    if d.abs() < 1e-12 || !d.is_finite() {
        return None;
    }
    let mut x = [0.0; 3];
    for (c, xc) in x.iter_mut().enumerate() {
        let mut m = a;
        for r in 0..3 {
            m[r][c] = b[r];
        }
        *xc = det(m) / d;
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig_formatting() {
        assert_eq!(format_sig(0.0, 6), "0");
        assert_eq!(format_sig(12.5, 6), "12.5");
        assert_eq!(format_sig(1.0 / 3.0, 6), "0.333333");
        assert_eq!(format_sig(123456.7, 6), "123457");
        assert_eq!(format_sig(999999.7, 6), "1e6");
        assert_eq!(format_sig(-2.0e-7, 6), "-2e-7");
        assert_eq!(format_sig(1.23456789, 6), "1.23457");
    }

    #[test]
    fn ordering_contract() {
        let mut a = Keypoint::new(5.0, 1.0, 2.0, DetectorKind::Dog);
        a.response = 1.0;
        let mut b = a;
        b.response = 3.0;
        let mut c = a;
        c.x = 2.0;
        let mut v = vec![a, b, c];
        sort_keypoints(&mut v);
        assert_eq!(v, vec![b, c, a]);
    }

    #[test]
    fn csv_export() {
        let mut kp = Keypoint::new(10.25, 3.0, 1.6, DetectorKind::Mser);
        kp.response = 2.0;
        let mut buf = Vec::new();
        write_keypoints_csv(&[kp], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "x,y,scale,orientation,response,octave,detector\n10.25,3,1.6,0,2,0,mser\n"
        );
    }

    #[test]
    fn params_round_trip_and_tags() {
        let p = DetectorParams::default();
        let text = toml::to_string(&p).unwrap();
        assert_eq!(toml::from_str::<DetectorParams>(&text).unwrap(), p);
        for k in DetectorKind::ALL {
            assert_eq!(k.tag().parse::<DetectorKind>().unwrap(), k);
        }
        assert!("sift".parse::<DetectorKind>().is_err());
    }

    #[test]
    fn cramer_solver() {
        let x = solve3([[2.0, 0.0, 0.0], [0.0, 4.0, 1.0], [0.0, 1.0, 3.0]], [2.0, 5.0, 4.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12 && (x[2] - 1.0).abs() < 1e-12);
        assert!(solve3([[1.0, 2.0, 3.0], [2.0, 4.0, 6.0], [0.0, 0.0, 1.0]], [1.0, 1.0, 1.0]).is_none());
    }
}
