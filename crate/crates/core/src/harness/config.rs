use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::synth::ConditionFamily;
use crate::describe::DescriptorKind;
use crate::detect::{DetectorKind, DetectorParams};
use crate::error::{Error, Result};
use crate::eval::EvalSettings;
use crate::matching::DEFAULT_RATIO;

/// Environment variable that overrides [`BenchmarkConfig::threads`].
pub const THREADS_ENV: &str = "FEATBENCH_THREADS";

pub const ALLOWED_RESOLUTIONS: [f64; 3] = [1.0, 0.5, 0.25];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyConfig {
    pub family: ConditionFamily,
    /// Synthetic families only; empty means the family's default grid.
    #[serde(default)]
    pub parameters: Vec<f64>,
}

impl FamilyConfig {
    pub fn parameters(&self) -> Vec<f64> {
        if self.parameters.is_empty() {
            self.family.default_parameters()
        } else {
            self.parameters.clone()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticInputs {
    pub count: usize,
    pub size: usize,
}

impl Default for SyntheticInputs {
    fn default() -> Self {
        Self { count: 3, size: 256 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AloiInputs {
    /// Dataset root with one directory per object.
    pub root: Option<PathBuf>,
    pub objects: Vec<String>,
    /// JSON manifest used instead of scanning `root`.
    pub manifest: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Inputs {
    /// Reference images for the synthetic families.
    pub images: Vec<PathBuf>,
    /// Generated textures added to `images`; `None` disables them.
    pub synthetic: Option<SyntheticInputs>,
    pub aloi: Option<AloiInputs>,
}

impl Default for Inputs {
    fn default() -> Self {
        Self {
            images: Vec::new(),
            synthetic: Some(SyntheticInputs::default()),
            aloi: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub detectors: Vec<DetectorKind>,
    pub descriptors: Vec<DescriptorKind>,
    pub families: Vec<FamilyConfig>,
    pub resolutions: Vec<f64>,
    pub eps_pos: f64,
    pub tau: f64,
    pub ratio: f64,
    pub inputs: Inputs,
    pub output_dir: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    pub threads: usize,
    pub seed: u64,
    /// Strongest keypoints kept per image; 0 keeps all.
    pub max_keypoints: usize,
    /// Writes per-cell wall times into `runtime_ms`, which makes the CSV
    /// vary between runs.
    pub record_timing: bool,
    pub detector_params: DetectorParams,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            detectors: DetectorKind::ALL.to_vec(),
            descriptors: DescriptorKind::ALL.to_vec(),
            families: ConditionFamily::SYNTHETIC
                .iter()
                .map(|&family| FamilyConfig {
                    family,
                    parameters: Vec::new(),
                })
                .collect(),
            resolutions: vec![1.0],
            eps_pos: EvalSettings::default().eps_pos,
            tau: EvalSettings::default().tau,
            ratio: DEFAULT_RATIO,
            inputs: Inputs::default(),
            output_dir: None,
            threads: 0,
            seed: 0,
            max_keypoints: 500,
            record_timing: false,
            detector_params: DetectorParams::default(),
        }
    }
}

impl BenchmarkConfig {
    /// Parses TOML, or JSON when the file ends in `.json`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            Self::from_json(&text)
        } else {
            Self::from_toml(&text)
        }
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.detectors.is_empty()
            || self.descriptors.is_empty()
            || self.families.is_empty()
            || self.resolutions.is_empty()
        {
            return bad("detectors, descriptors, families and resolutions must be non-empty".into());
        }
        if let Some(r) = self.resolutions.iter().find(|r| !ALLOWED_RESOLUTIONS.contains(r)) {
            return bad(format!("resolution {r} is not one of 1, 0.5, 0.25"));
        }
        for f in &self.families {
            if f.family.is_synthetic() && f.parameters().is_empty() {
                return bad(format!("{} has an empty parameter grid", f.family));
            }
            if !f.family.is_synthetic() && !f.parameters.is_empty() {
                return bad(format!(
                    "{} takes its conditions from the dataset, not a parameter grid",
                    f.family
                ));
            }
            if f.family == ConditionFamily::Scale && f.parameters().iter().any(|&s| !(s > 0.0)) {
                return bad("scale factors must be positive".into());
            }
        }
        if !(self.ratio > 0.0 && self.ratio < 1.0) {
            return bad(format!("ratio must lie in (0, 1), got {}", self.ratio));
        }
        self.eval_settings().validate()?;
        self.detector_params.validate()?;
        let has_aloi_family = self.families.iter().any(|f| !f.family.is_synthetic());
        if has_aloi_family && self.inputs.aloi.is_none() {
            return bad("ALOI families need [inputs.aloi]".into());
        }
        if let Some(a) = &self.inputs.aloi {
            if a.root.is_none() && a.manifest.is_none() {
                return bad("[inputs.aloi] needs a root or a manifest".into());
            }
        }
        Ok(())
    }

    /// Thread count after the environment override; 0 means all cores.
    pub fn effective_threads(&self) -> Result<usize> {
        match std::env::var(THREADS_ENV) {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{THREADS_ENV}={v:?} is not a thread count"))),
            Err(_) => Ok(self.threads),
        }
    }

    /// SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }

    pub fn eval_settings(&self) -> EvalSettings {
        EvalSettings {
            eps_pos: self.eps_pos,
            tau: self.tau,
        }
    }

    /// Configured families that are (or are not) synthetic.
    pub fn families_of(&self, synthetic: bool) -> impl Iterator<Item = &FamilyConfig> {
        self.families
            .iter()
            .filter(move |f| f.family.is_synthetic() == synthetic)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = BenchmarkConfig::default();
        assert_eq!(c.ratio, 0.75);
        assert_eq!(c.detectors.len() * c.descriptors.len(), 16);
        assert_eq!(c.detector_params.dog.octaves, 4);
        c.validate().unwrap();
    }

    #[test]
    fn toml_and_json() {
        let t = r#"
            detectors = ["dog", "brisk"]
            descriptors = ["sift"]
            resolutions = [1.0, 0.5]
            eps_pos = 3.0
            seed = 9
            [[families]]
            family = "rotation"
            parameters = [10.0]
            [inputs]
            synthetic = { count = 1, size = 64 }
            [detector_params.dog]
            octaves = 3
        "#;
        let c = BenchmarkConfig::from_toml(t).unwrap();
        c.validate().unwrap();
        assert_eq!(c.eps_pos, 3.0);
        assert_eq!(c.tau, 2.0);
        assert_eq!(c.detector_params.dog.octaves, 3);
        let j = serde_json::to_string(&c).unwrap();
        assert_eq!(BenchmarkConfig::from_json(&j).unwrap(), c);
        assert_eq!(c.digest(), BenchmarkConfig::from_json(&j).unwrap().digest());
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(BenchmarkConfig::from_toml("bogus = 1").is_err());
        let c = BenchmarkConfig {
            resolutions: vec![0.3],
            ..Default::default()
        };
        assert!(c.validate().is_err());
        let mut c = BenchmarkConfig::default();
        c.detectors.clear();
        assert!(c.validate().is_err());
        let mut c = BenchmarkConfig::default();
        c.families.push(FamilyConfig {
            family: ConditionFamily::AloiStereo,
            parameters: vec![],
        });
        assert!(c.validate().is_err());
    }
}
