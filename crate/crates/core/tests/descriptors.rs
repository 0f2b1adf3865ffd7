use featbench_core::describe::{
    describe_keypoints, read_descriptors, write_descriptors, DescribeContext, Descriptor, DescriptorKind, DescriptorSet,
};
use featbench_core::detect::{detect, DetectorKind, DetectorParams, Keypoint};
use featbench_core::eval::project_keypoint;
use featbench_core::harness::{rotation_series, synthetic_texture};
use featbench_core::matching::distance;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn keypoints(img: &featbench_core::GrayImage) -> Vec<Keypoint> {
    let mut kps = detect(DetectorKind::Dog, img, &DetectorParams::default()).unwrap();
    kps.truncate(80);
    kps
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn shape_and_norm(seed in any::<u64>()) {
        let img = synthetic_texture(seed, 128, 128).unwrap();
        let kps = keypoints(&img);
        for kind in DescriptorKind::ALL {
            let d = describe_keypoints(kind, &img, &kps).unwrap();
            prop_assert_eq!(d.keypoints.len(), d.descriptors.len());
            prop_assert!(d.source.windows(2).all(|w| w[0] <= w[1]));
            for desc in &d.descriptors {
                prop_assert_eq!(desc.kind(), kind);
                match desc {
                    Descriptor::Float(f) => {
                        prop_assert_eq!(f.values().len(), kind.dim());
                        let norm = f.values().iter().map(|v| v * v).sum::<f64>().sqrt();
                        prop_assert!((norm - 1.0).abs() < 1e-9);
                        if kind == DescriptorKind::Sift {
                            prop_assert!(f.values().iter().all(|&v| v <= 0.2 + 1e-12));
                        }
                    }
                    Descriptor::Binary(b) => prop_assert_eq!(b.to_bytes().len() * 8, 512),
                }
            }
        }
    }
}

fn min_distance(a: &[Descriptor], b: &[Descriptor]) -> f64 {
    a.iter()
        .flat_map(|x| b.iter().map(move |y| distance(x, y).unwrap()))
        .fold(f64::INFINITY, f64::min)
}

fn all_of(ctx: &DescribeContext, kind: DescriptorKind, kp: &Keypoint) -> Vec<Descriptor> {
    ctx.describe(kind, kp)
        .map(|v| v.into_iter().map(|(_, d)| d).collect())
        .unwrap_or_default()
}

#[test]
fn rotation_self_match() {
    let params = DetectorParams::default();
    for angle in [15.0, 45.0] {
        for kind in [DescriptorKind::Sift, DescriptorKind::Brisk, DescriptorKind::Freak] {
            for t in 0..5u64 {
                let img = synthetic_texture(300 + t, 256, 256).unwrap();
                let kps = detect(DetectorKind::Dog, &img, &params).unwrap();
                let (spec, rotated) = rotation_series(&img, &[angle]).unwrap().remove(0);
                let h = spec.ground_truth.unwrap();
                let (ca, cb) = (
                    DescribeContext::new(kind, &img).unwrap(),
                    DescribeContext::new(kind, &rotated).unwrap(),
                );
                // First central keypoint whose window fits in both images.
                let (kp, a, b) = kps
                    .iter()
                    .filter(|k| (k.x - 128.0).hypot(k.y - 128.0) < 60.0 && k.scale > 2.0)
                    .map(|k| {
                        (
                            *k,
                            all_of(&ca, kind, k),
                            all_of(&cb, kind, &project_keypoint(k, &h).unwrap()),
                        )
                    })
                    .find(|(_, a, b)| !a.is_empty() && !b.is_empty())
                    .unwrap();
                let self_d = min_distance(&a, &b);

                let other = synthetic_texture(7000 + t, 256, 256).unwrap();
                let ctx = DescribeContext::new(kind, &other).unwrap();
                let mut rng = ChaCha8Rng::seed_from_u64(t);
                let mut random = Vec::new();
                while random.len() < 50 {
                    let rk = Keypoint {
                        x: rng.random_range(64.0..192.0),
                        y: rng.random_range(64.0..192.0),
                        ..kp
                    };
                    let r = all_of(&ctx, kind, &rk);
                    if !r.is_empty() {
                        random.push(min_distance(&a, &r));
                    }
                }
                random.sort_by(f64::total_cmp);
                let median = 0.5 * (random[24] + random[25]);
                assert!(
                    self_d < median,
                    "{kind} at {angle} deg, trial {t}: {self_d} vs {median}"
                );
            }
        }
    }
}

#[test]
fn deterministic_across_threads() {
    let img = synthetic_texture(8, 160, 160).unwrap();
    let kps = keypoints(&img);
    for kind in DescriptorKind::ALL {
        let first = describe_keypoints(kind, &img, &kps).unwrap();
        let handles: Vec<_> = (0..3)
            .map(|_| {
                let (img, kps) = (img.clone(), kps.clone());
                std::thread::spawn(move || describe_keypoints(kind, &img, &kps).unwrap())
            })
            .collect();
        for h in handles {
            let other = h.join().unwrap();
            assert_eq!(other.descriptors, first.descriptors, "{kind}");
            assert_eq!(other.keypoints, first.keypoints, "{kind}");
        }
    }
}

#[test]
fn export_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let img = synthetic_texture(9, 128, 128).unwrap();
    let kps = keypoints(&img);
    for kind in DescriptorKind::ALL {
        let d = describe_keypoints(kind, &img, &kps).unwrap();
        let set = DescriptorSet::new(kind, d.descriptors.clone()).unwrap();
        let path = dir.path().join(format!("{kind}.fdsc"));
        write_descriptors(&path, &set).unwrap();
        let back = read_descriptors(&path).unwrap();
        assert_eq!(back.kind, kind);
        assert_eq!(back.descriptors.len(), d.descriptors.len());
        if kind.is_binary() {
            assert_eq!(back.descriptors, d.descriptors);
        } else {
            for (x, y) in back.descriptors.iter().zip(&d.descriptors) {
                assert!(distance(x, y).unwrap() < 1e-6);
            }
        }
    }
}
