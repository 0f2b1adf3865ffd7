use std::fs;
use std::path::Path;

use featbench_core::harness::{
    load_aloi_subset, load_manifest, pairs_from_entries, run_benchmark, synthetic_texture, write_report, AloiInputs,
    BenchmarkConfig, ConditionFamily, FamilyConfig, Inputs, Role, RESULTS_HEADER,
};
use featbench_core::{DescriptorKind, DetectorKind, Error, Homography};

fn save_png(path: &Path, seed: u64) {
    fs::create_dir_all(path.parent().unwrap()).unwrap();
    let img = synthetic_texture(seed, 96, 72).unwrap();
    image::save_buffer(path, &img.to_u8(), 96, 72, image::ExtendedColorType::L8).unwrap();
}

fn aloi_object(root: &Path, object: &str, codes: &[String]) {
    for (k, code) in codes.iter().enumerate() {
        save_png(&root.join(object).join(format!("{object}_{code}.png")), k as u64);
    }
}

#[test]
fn illumination_direction_layout() {
    let dir = tempfile::tempdir().unwrap();
    let codes: Vec<String> = (1..=8)
        .flat_map(|l| (1..=3).map(move |c| format!("l{l}c{c}")))
        .collect();
    aloi_object(dir.path(), "7", &codes);
    let pairs = load_aloi_subset(dir.path(), ConditionFamily::AloiIllumDir, &["7".into()]).unwrap();
    assert_eq!(pairs.len(), 24);
    assert!(pairs
        .iter()
        .all(|p| p.reference.condition_code == "l8c1" && p.ground_truth == Some(Homography::identity())));
}

#[test]
fn stereo_and_missing_files() {
    let dir = tempfile::tempdir().unwrap();
    aloi_object(dir.path(), "3", &["c".into(), "l".into(), "r".into()]);
    let pairs = load_aloi_subset(dir.path(), ConditionFamily::AloiStereo, &["3".into()]).unwrap();
    let labels: Vec<String> = pairs.iter().map(|p| p.label()).collect();
    assert_eq!(labels, ["c-l", "c-r", "l-r"]);
    assert!(pairs.iter().all(|p| p.ground_truth.is_none()));

    // Without the reference every pair is skipped.
    aloi_object(dir.path(), "4", &["i110".into(), "i120".into()]);
    let err = load_aloi_subset(dir.path(), ConditionFamily::AloiIllumColor, &["4".into()]).unwrap_err();
    assert!(matches!(err, Error::DatasetNotFound(_)));
    // The reference pairs with itself as well.
    aloi_object(dir.path(), "4", &["i250".into()]);
    let codes: Vec<String> = load_aloi_subset(dir.path(), ConditionFamily::AloiIllumColor, &["4".into()])
        .unwrap()
        .iter()
        .map(|p| p.label())
        .collect();
    assert_eq!(codes, ["i110", "i120", "i250"]);
}

fn write_manifest(dir: &Path) -> std::path::PathBuf {
    for name in ["a_c.png", "a_l.png", "a_r.png"] {
        save_png(
            &dir.join("imgs").join(name),
            name.len() as u64 + name.as_bytes()[2] as u64,
        );
    }
    let manifest = dir.join("manifest.json");
    fs::write(
        &manifest,
        r#"[
  {"path": "imgs/a_c.png", "object_id": "a", "family": "aloi_stereo", "condition_code": "c", "role": "reference"},
  {"path": "imgs/a_l.png", "object_id": "a", "family": "aloi_stereo", "condition_code": "l", "role": "test"},
  {"path": "imgs/a_r.png", "object_id": "a", "family": "aloi_stereo", "condition_code": "r", "role": "test"}
]"#,
    )
    .unwrap();
    manifest
}

#[test]
fn manifest_overrides_layout() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_manifest(dir.path());
    let entries = load_manifest(&manifest).unwrap();
    assert_eq!(entries.len(), 3);
    assert_eq!(entries[0].role, Role::Reference);
    assert!(entries.iter().all(|e| e.path.is_file()));
    let pairs = pairs_from_entries(&entries).unwrap();
    assert_eq!(pairs.len(), 2);

    let bad = dir.path().join("bad.json");
    fs::write(
        &bad,
        r#"[{"path": "x.png", "object_id": "a", "family": "aloi_view", "condition_code": "l1c1", "role": "test"}]"#,
    )
    .unwrap();
    assert!(load_manifest(&bad).is_err());
}

#[test]
fn stereo_benchmark_reports_match_counts_only() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_manifest(dir.path());
    let cfg = BenchmarkConfig {
        detectors: vec![DetectorKind::Dog, DetectorKind::Brisk],
        descriptors: vec![DescriptorKind::Sift, DescriptorKind::Freak],
        families: vec![FamilyConfig {
            family: ConditionFamily::AloiStereo,
            parameters: vec![],
        }],
        inputs: Inputs {
            images: vec![],
            synthetic: None,
            aloi: Some(AloiInputs {
                root: None,
                objects: vec![],
                manifest: Some(manifest),
            }),
        },
        threads: 2,
        ..Default::default()
    };
    let report = run_benchmark(&cfg).unwrap();
    assert_eq!(report.records.len(), 8);
    assert!(report
        .records
        .iter()
        .all(|r| r.repeatability.is_none() && r.n_correct.is_none()));
    assert_eq!(report.records[0].parameter, "c-l");

    let out = dir.path().join("out");
    write_report(&report, &out).unwrap();
    let svg = fs::read_to_string(out.join("aloi_stereo.svg")).unwrap();
    assert!(svg.contains(">matches<"));
    let csv = fs::read_to_string(out.join("results.csv")).unwrap();
    assert!(csv.starts_with(&RESULTS_HEADER.join(",")));
    assert!(csv.lines().skip(1).all(|l| l.split(',').nth(8) == Some("")));
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("run_meta.json")).unwrap()).unwrap();
    assert_eq!(meta["total_cells"], 8);
    assert_eq!(meta["config_digest"].as_str().unwrap().len(), 64);
}

#[test]
fn config_file_and_timing() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bench.toml");
    fs::write(
        &path,
        r#"
detectors = ["fast_hessian"]
descriptors = ["surf", "brisk"]
resolutions = [0.5]
record_timing = true

[[families]]
family = "scale"
parameters = [1.41]

[inputs.synthetic]
count = 2
size = 128
"#,
    )
    .unwrap();
    let cfg = BenchmarkConfig::load(&path).unwrap();
    let report = run_benchmark(&cfg).unwrap();
    assert_eq!(report.records.len(), 2);
    for r in &report.records {
        assert_eq!(r.resolution, 0.5);
        assert!(r.runtime_ms.is_some_and(|t| t >= 0.0));
        assert!(r.repeatability.is_some_and(|v| (0.0..=1.0).contains(&v)));
        assert!(r.n_correct.unwrap() <= r.n_matches);
    }
    assert!(!report.run_failed());
}
