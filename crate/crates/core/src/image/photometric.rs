use super::GrayImage;

/// Gain for an exposure offset: `2^(ev / 4)`, so ±4 doubles or halves.
pub fn exposure_gain(ev: f64) -> f64 {
    2f64.powf(ev / 4.0)
}

/// Scales intensities by [`exposure_gain`] and clamps to `[0, 255]`.
pub fn adjust_exposure(img: &GrayImage, ev: f64) -> GrayImage {
    if ev == 0.0 {
        return img.clone();
    }
    let g = exposure_gain(ev);
    img.map(|v| (v * g).clamp(0.0, 255.0))
}

/// Unclamped multiplicative gain.
pub fn apply_gain(img: &GrayImage, gain: f64) -> GrayImage {
    img.map(|v| v * gain)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_ev_is_identity() {
        let img = GrayImage::from_fn(5, 5, |x, y| (x * 40 + y) as f64).unwrap();
        assert_eq!(adjust_exposure(&img, 0.0), img);
    }

    #[test]
    fn anchor_values() {
        let img = GrayImage::from_vec(2, 1, vec![60.0, 200.0]).unwrap();
        assert_eq!(adjust_exposure(&img, 4.0).get(0, 0), 120.0);
        let dark = adjust_exposure(&img, -7.0).get(1, 0);
        assert!((dark - 200.0 * 2f64.powf(-1.75)).abs() < 1e-12);
        assert!((dark - 59.46).abs() < 0.01);
        assert_eq!(dark.round(), 59.0);
        let mid = GrayImage::filled(3, 3, 128.0).unwrap();
        assert!(adjust_exposure(&mid, 4.0).data().iter().all(|&v| v == 255.0));
    }

    proptest! {
        #[test]
        fn exposure_is_monotone(a in 0.0f64..255.0, b in 0.0f64..255.0, ev in -8.0f64..8.0) {
            let img = GrayImage::from_vec(2, 1, vec![a, b]).unwrap();
            let out = adjust_exposure(&img, ev);
            let (oa, ob) = (out.get(0, 0), out.get(1, 0));
            prop_assert!((0.0..=255.0).contains(&oa) && (0.0..=255.0).contains(&ob));
            if a <= b { prop_assert!(oa <= ob); } else { prop_assert!(oa >= ob); }
        }
    }
}
