use std::fmt;
use std::ops::Mul;

use super::GrayImage;
use crate::error::{Error, Result};

/// Projective 3x3 map, row-major, scaled so the bottom-right entry is 1
/// whenever it is nonzero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Homography {
    m: [f64; 9],
}

const SINGULAR_EPS: f64 = 1e-12;

impl Homography {
    pub fn new(m: [f64; 9]) -> Result<Self> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("homography entries must be finite".into()));
        }
        let mut m = m;
        if m[8] != 0.0 {
            let s = m[8];
            m.iter_mut().for_each(|v| *v /= s);
        }
        let h = Self { m };
        if h.determinant().abs() <= SINGULAR_EPS {
            return Err(Error::InvalidParameter("singular homography".into()));
        }
        Ok(h)
    }

    pub fn identity() -> Self {
        Self {
            m: [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
        }
    }

    pub fn translation(tx: f64, ty: f64) -> Self {
        Self {
            m: [1.0, 0.0, tx, 0.0, 1.0, ty, 0.0, 0.0, 1.0],
        }
    }

    pub fn scaling(s: f64) -> Result<Self> {
        Self::new([s, 0.0, 0.0, 0.0, s, 0.0, 0.0, 0.0, 1.0])
    }

    /// In-plane rotation by `theta` radians about `(cx, cy)`. Angles that are
    /// multiples of 90 degrees produce exact 0/±1 entries.
    pub fn rotation_about(theta: f64, cx: f64, cy: f64) -> Self {
        let snap = |v: f64| if v.abs() < 1e-12 { 0.0 } else { v };
        let (s, c) = (snap(theta.sin()), snap(theta.cos()));
        let r = Self {
            m: [c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0],
        };
        Self::translation(cx, cy) * r * Self::translation(-cx, -cy)
    }

    pub fn matrix(&self) -> &[f64; 9] {
        &self.m
    }

    pub fn determinant(&self) -> f64 {
        let m = &self.m;
        m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) + m[2] * (m[3] * m[7] - m[4] * m[6])
    }

    pub fn inverse(&self) -> Result<Self> {
        let m = &self.m;
        let det = self.determinant();
        if det.abs() <= SINGULAR_EPS {
            return Err(Error::InvalidParameter("singular homography".into()));
        }
        let adj = [
            m[4] * m[8] - m[5] * m[7],
            m[2] * m[7] - m[1] * m[8],
            m[1] * m[5] - m[2] * m[4],
            m[5] * m[6] - m[3] * m[8],
            m[0] * m[8] - m[2] * m[6],
            m[2] * m[3] - m[0] * m[5],
            m[3] * m[7] - m[4] * m[6],
            m[1] * m[6] - m[0] * m[7],
            m[0] * m[4] - m[1] * m[3],
        ];
        Self::new(adj.map(|v| v / det))
    }

    /// Homogeneous image of `(x, y)` before division: `(u, v, w)`.
    #[inline]
    pub fn apply_homogeneous(&self, x: f64, y: f64) -> (f64, f64, f64) {
        let m = &self.m;
        (
            m[0] * x + m[1] * y + m[2],
            m[3] * x + m[4] * y + m[5],
            m[6] * x + m[7] * y + m[8],
        )
    }

    /// Maps a point; `None` when it lands at infinity (`|w| <= 1e-9`).
    #[inline]
    pub fn apply(&self, x: f64, y: f64) -> Option<(f64, f64)> {
        let (u, v, w) = self.apply_homogeneous(x, y);
        if w.abs() <= 1e-9 {
            return None;
        }
        Some((u / w, v / w))
    }

    /// Determinant of the 2x2 Jacobian of the projective map at `(x, y)`.
    pub fn jacobian_det(&self, x: f64, y: f64) -> Option<f64> {
        let (_, _, w) = self.apply_homogeneous(x, y);
        if w.abs() <= 1e-9 {
            return None;
        }
        // d(u/w, v/w)/d(x, y) has determinant det(H) / w^3.
        Some(self.determinant() / (w * w * w))
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::identity()
    }

    /// Nine whitespace-separated decimals, row-major.
    pub fn parse(text: &str) -> Result<Self> {
        let vals: Vec<f64> = text
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|e| Error::InvalidInput(format!("homography entry {t:?}: {e}")))
            })
            .collect::<Result<_>>()?;
        let m: [f64; 9] = vals
            .try_into()
            .map_err(|v: Vec<f64>| Error::InvalidInput(format!("homography needs 9 entries, got {}", v.len())))?;
        Self::new(m)
    }
}

impl Mul for Homography {
    type Output = Homography;

    fn mul(self, rhs: Homography) -> Homography {
        let (a, b) = (&self.m, &rhs.m);
        let mut out = [0.0; 9];
        for r in 0..3 {
            for c in 0..3 {
                out[r * 3 + c] = (0..3).map(|i| a[r * 3 + i] * b[i * 3 + c]).sum();
            }
        }
        if out[8] != 0.0 && out[8] != 1.0 {
            let s = out[8];
            out.iter_mut().for_each(|v| *v /= s);
        }
        Homography { m: out }
    }
}

impl fmt::Display for Homography {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in 0..3 {
            writeln!(f, "{} {} {}", self.m[r * 3], self.m[r * 3 + 1], self.m[r * 3 + 2])?;
        }
        Ok(())
    }
}

/// Warp output plus which destination pixels had a source.
#[derive(Clone, Debug)]
pub struct Warped {
    pub image: GrayImage,
    pub mask: Vec<bool>,
}

impl Warped {
    pub fn is_valid(&self, x: usize, y: usize) -> bool {
        self.mask[y * self.image.width() + x]
    }
}

/// Inverse-mapped bilinear warp of `img` by `h` onto an `out_w x out_h`
/// canvas. Pixels without a source are zero and flagged invalid.
pub fn warp_homography(img: &GrayImage, h: &Homography, out_w: usize, out_h: usize) -> Result<Warped> {
    let inv = h.inverse()?;
    let mut data = vec![0.0; out_w * out_h];
    let mut mask = vec![false; out_w * out_h];
    for y in 0..out_h {
        for x in 0..out_w {
            if let Some((sx, sy)) = inv.apply(x as f64, y as f64) {
                if let Some(v) = img.sample_bilinear(sx, sy) {
                    data[y * out_w + x] = v;
                    mask[y * out_w + x] = true;
                }
            }
        }
    }
    Ok(Warped {
        image: GrayImage::from_vec(out_w, out_h, data)?,
        mask,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn checkerboard(n: usize, block: usize) -> GrayImage {
        GrayImage::from_fn(n, n, |x, y| {
            if (x / block + y / block).is_multiple_of(2) {
                200.0
            } else {
                30.0
            }
        })
        .unwrap()
    }

    #[test]
    fn canonical_scaling_and_singularity() {
        let h = Homography::new([2.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 2.0]).unwrap();
        assert!(h.is_identity());
        assert!(Homography::new([1.0, 2.0, 0.0, 2.0, 4.0, 0.0, 0.0, 0.0, 1.0]).is_err());
    }

    #[test]
    fn inverse_round_trip() {
        let h = Homography::new([1.1, 0.2, 3.0, -0.1, 0.9, 4.0, 1e-4, 2e-4, 1.0]).unwrap();
        let id = h * h.inverse().unwrap();
        for (a, b) in id.matrix().iter().zip(Homography::identity().matrix()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_warp_is_exact() {
        let img = checkerboard(24, 3);
        let w = warp_homography(&img, &Homography::identity(), 24, 24).unwrap();
        assert_eq!(w.image, img);
        assert!(w.mask.iter().all(|&m| m));
    }

    #[test]
    fn translation_warp() {
        let img = GrayImage::from_fn(20, 10, |x, y| (x * 7 + y * 13) as f64).unwrap();
        let w = warp_homography(&img, &Homography::translation(5.0, 0.0), 20, 10).unwrap();
        for y in 0..10 {
            for x in 0..20 {
                if x >= 5 {
                    assert_eq!(w.image.get(x, y), img.get(x - 5, y));
                    assert!(w.is_valid(x, y));
                } else {
                    assert_eq!(w.image.get(x, y), 0.0);
                    assert!(!w.is_valid(x, y));
                }
            }
        }
    }

    #[test]
    fn singular_warp_rejected() {
        let img = checkerboard(8, 2);
        let h = Homography { m: [0.0; 9] };
        assert!(warp_homography(&img, &h, 8, 8).is_err());
    }

    #[test]
    fn scale_two_round_trip() {
        let img = checkerboard(32, 4);
        let h = Homography::scaling(2.0).unwrap();
        let up = warp_homography(&img, &h, 64, 64).unwrap();
        // block size doubles
        assert_eq!(up.image.get(0, 0), 200.0);
        assert_eq!(up.image.get(6, 0), 200.0);
        assert_eq!(up.image.get(8, 0), 30.0);
        assert_eq!(up.image.get(14, 0), 30.0);
        assert_eq!(up.image.get(16, 0), 200.0);
        let back = warp_homography(&up.image, &h.inverse().unwrap(), 32, 32).unwrap();
        for y in 1..31 {
            for x in 1..31 {
                assert!((back.image.get(x, y) - img.get(x, y)).abs() <= 2.0);
            }
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let h = Homography::new([1.1, 0.2, 3.0, -0.1, 0.9, 4.0, 1e-3, 2e-3, 1.0]).unwrap();
        let (x, y, e) = (17.0, 9.0, 1e-5);
        let p = |x, y| h.apply(x, y).unwrap();
        let (ux1, uy1) = p(x + e, y);
        let (ux0, uy0) = p(x - e, y);
        let (vx1, vy1) = p(x, y + e);
        let (vx0, vy0) = p(x, y - e);
        let (a, c) = ((ux1 - ux0) / (2.0 * e), (uy1 - uy0) / (2.0 * e));
        let (b, d) = ((vx1 - vx0) / (2.0 * e), (vy1 - vy0) / (2.0 * e));
        let fd = a * d - b * c;
        assert!((fd - h.jacobian_det(x, y).unwrap()).abs() < 1e-6);
    }

    #[test]
    fn parse_and_display_round_trip() {
        let h = Homography::new([1.5, 0.25, -3.0, 0.0, 0.75, 2.0, 1e-4, 0.0, 1.0]).unwrap();
        let back = Homography::parse(&h.to_string()).unwrap();
        assert_eq!(h, back);
        assert!(Homography::parse("1 0 0 0 1 0 0 0").is_err());
        assert!(Homography::parse("1 0 0 0 1 0 0 0 x").is_err());
    }
}
