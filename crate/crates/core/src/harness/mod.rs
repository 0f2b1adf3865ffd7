//! Benchmark orchestration: condition generators, ALOI ingestion, the
//! detector x descriptor grid and report output.

mod aloi;
mod config;
mod report;
mod run;
mod synth;

pub use aloi::{
    family_codes, load_aloi_subset, load_manifest, pairs_from_entries, valid_code, AloiEntry, AloiPair, FamilyCodes,
    Role,
};
pub use config::{
    AloiInputs, BenchmarkConfig, FamilyConfig, Inputs, SyntheticInputs, ALLOWED_RESOLUTIONS, THREADS_ENV,
};
pub use report::{write_report, RESULTS_HEADER};
pub use run::{run_benchmark, BenchmarkReport, CellFailure, CellTime, RepeatabilityRecord, RunMeta};
pub use synth::{
    exposure_series, generate_exposure_series, generate_rotation_series, generate_scale_series, generate_series,
    generate_viewpoint_series, parameter_label, rotation_homography, rotation_series, scale_series, synthetic_texture,
    viewpoint_homography, viewpoint_series, ConditionFamily, ConditionSpec,
};
