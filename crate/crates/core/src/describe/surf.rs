use super::{DescriptorKind, FloatDescriptor};
use crate::detect::Keypoint;
use crate::error::{Error, Result};
use crate::image::IntegralImage;

const SUBREGIONS: usize = 4;
const SAMPLES: usize = 5;
const SIDE: usize = SUBREGIONS * SAMPLES;

/// Haar responses `(dx, dy)` of side `2h` centred on `(x, y)`, as
/// differences of box means.
fn haar(ii: &IntegralImage, x: f64, y: f64, h: f64) -> (f64, f64) {
    // Pixel i spans table coordinates [i, i + 1].
    let span = |x0: f64, y0: f64, x1: f64, y1: f64| {
        let (x0, x1, y0, y1) = (x0 + 0.5, x1 + 0.5, y0 + 0.5, y1 + 0.5);
        ii.area_at(x1, y1) - ii.area_at(x0, y1) - ii.area_at(x1, y0) + ii.area_at(x0, y0)
    };
    let area = 2.0 * h * h;
    let dx = (span(x, y - h, x + h, y + h) - span(x - h, y - h, x, y + h)) / area;
    let dy = (span(x - h, y, x + h, y + h) - span(x - h, y - h, x + h, y)) / area;
    (dx, dy)
}

/// `(sum dx, sum dy, sum |dx|, sum |dy|)` over one subregion's samples.
pub fn surf_subregion(responses: &[(f64, f64)]) -> [f64; 4] {
    responses.iter().fold([0.0; 4], |acc, &(dx, dy)| {
        [acc[0] + dx, acc[1] + dy, acc[2] + dx.abs(), acc[3] + dy.abs()]
    })
}

/// 64-d Haar-wavelet descriptor over a `20 * scale` square aligned with
/// `kp.orientation`, in original-image pixels.
pub fn describe_surf(ii: &IntegralImage, kp: &Keypoint) -> Result<FloatDescriptor> {
    let s = kp.scale;
    let h = s.max(0.5);
    let reach = 0.5 * (SIDE as f64 - 1.0) * s * std::f64::consts::SQRT_2 + h;
    let (w, hgt) = (ii.width() as f64, ii.height() as f64);
    if !(s > 0.0) || kp.x - reach < -0.5 || kp.y - reach < -0.5 || kp.x + reach > w - 0.5 || kp.y + reach > hgt - 0.5 {
        return Err(Error::OutOfBounds(format!(
            "surf window of reach {reach:.1} at ({:.2}, {:.2}) leaves the {w}x{hgt} image",
            kp.x, kp.y
        )));
    }
    let (sin, cos) = kp.orientation.sin_cos();
    let sigma = 3.3 * s;
    let denom = 2.0 * sigma * sigma;
    let mut raw = Vec::with_capacity(SUBREGIONS * SUBREGIONS * 4);
    let mut samples = Vec::with_capacity(SAMPLES * SAMPLES);
    for j in 0..SUBREGIONS {
        for i in 0..SUBREGIONS {
            samples.clear();
            for v in j * SAMPLES..(j + 1) * SAMPLES {
                for u in i * SAMPLES..(i + 1) * SAMPLES {
                    let a = (u as f64 - 9.5) * s;
                    let b = (v as f64 - 9.5) * s;
                    let x = kp.x + cos * a - sin * b;
                    let y = kp.y + sin * a + cos * b;
                    let (dx, dy) = haar(ii, x, y, h);
                    let g = (-(a * a + b * b) / denom).exp();
                    samples.push((g * (cos * dx + sin * dy), g * (-sin * dx + cos * dy)));
                }
            }
            raw.extend_from_slice(&surf_subregion(&samples));
        }
    }
    FloatDescriptor::normalized(DescriptorKind::Surf, raw)
}
