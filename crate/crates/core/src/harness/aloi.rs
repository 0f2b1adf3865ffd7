use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::synth::ConditionFamily;
use crate::error::{Error, Result};
use crate::image::Homography;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Reference,
    Test,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AloiEntry {
    pub path: PathBuf,
    pub object_id: String,
    pub family: ConditionFamily,
    pub condition_code: String,
    pub role: Role,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AloiPair {
    pub reference: AloiEntry,
    pub test: AloiEntry,
    /// Identity for same-pose photometric pairs, `None` for pose changes.
    pub ground_truth: Option<Homography>,
}

impl AloiPair {
    /// Report label: the test code, or `ref-test` for stereo pairs.
    pub fn label(&self) -> String {
        if self.reference.family == ConditionFamily::AloiStereo {
            format!("{}-{}", self.reference.condition_code, self.test.condition_code)
        } else {
            self.test.condition_code.clone()
        }
    }
}

/// Whether `code` follows the naming grammar of `family`.
pub fn valid_code(family: ConditionFamily, code: &str) -> bool {
    let num = |s: &str| s.parse::<u32>().ok().filter(|_| !s.starts_with('+') && !s.is_empty());
    match family {
        ConditionFamily::AloiIllumDir => code
            .strip_prefix('l')
            .and_then(|rest| rest.split_once('c'))
            .is_some_and(|(l, c)| {
                num(l).is_some_and(|l| (1..=8).contains(&l)) && num(c).is_some_and(|c| (1..=3).contains(&c))
            }),
        ConditionFamily::AloiIllumColor => code
            .strip_prefix('i')
            .and_then(num)
            .is_some_and(|t| (110..=250).contains(&t) && t % 10 == 0),
        ConditionFamily::AloiView => code
            .strip_prefix('r')
            .and_then(num)
            .is_some_and(|r| r < 360 && r % 5 == 0),
        ConditionFamily::AloiStereo => matches!(code, "c" | "l" | "r"),
        _ => false,
    }
}

/// Reference codes and `(reference, test)` code pairs of a family.
pub type FamilyCodes = (Vec<String>, Vec<(String, String)>);

pub fn family_codes(family: ConditionFamily) -> Result<FamilyCodes> {
    let pairs_with = |reference: &str, tests: Vec<String>| {
        (
            vec![reference.to_string()],
            tests.into_iter().map(|t| (reference.to_string(), t)).collect(),
        )
    };
    Ok(match family {
        ConditionFamily::AloiIllumDir => pairs_with(
            "l8c1",
            (1..=8)
                .flat_map(|l| (1..=3).map(move |c| format!("l{l}c{c}")))
                .collect(),
        ),
        ConditionFamily::AloiIllumColor => {
            pairs_with("i250", (110..=250).step_by(10).map(|t| format!("i{t}")).collect())
        }
        ConditionFamily::AloiView => pairs_with("r0", (5..360).step_by(5).map(|r| format!("r{r}")).collect()),
        ConditionFamily::AloiStereo => (
            vec!["c".into(), "l".into()],
            vec![
                ("c".into(), "l".into()),
                ("c".into(), "r".into()),
                ("l".into(), "r".into()),
            ],
        ),
        other => return Err(Error::InvalidParameter(format!("{other} is not an ALOI family"))),
    })
}

fn ground_truth(family: ConditionFamily) -> Option<Homography> {
    match family {
        ConditionFamily::AloiIllumDir | ConditionFamily::AloiIllumColor => Some(Homography::identity()),
        _ => None,
    }
}

fn image_path(root: &Path, object: &str, code: &str) -> PathBuf {
    root.join(object).join(format!("{object}_{code}.png"))
}

/// Scans `root/<object>/<object>_<code>.png` for the pairs of `family`.
/// Missing files are skipped with a warning.
pub fn load_aloi_subset(root: &Path, family: ConditionFamily, object_ids: &[String]) -> Result<Vec<AloiPair>> {
    let (_, pairs) = family_codes(family)?;
    let mut out = Vec::new();
    for object in object_ids {
        for (rc, tc) in &pairs {
            let entry = |code: &str, role| AloiEntry {
                path: image_path(root, object, code),
                object_id: object.clone(),
                family,
                condition_code: code.to_string(),
                role,
            };
            let (r, t) = (entry(rc, Role::Reference), entry(tc, Role::Test));
            if let Some(missing) = [&r, &t].into_iter().find(|e| !e.path.is_file()) {
                log::warn!(
                    "aloi: skipping {family} {object} {tc}: {} not found",
                    missing.path.display()
                );
                continue;
            }
            out.push(AloiPair {
                reference: r,
                test: t,
                ground_truth: ground_truth(family),
            });
        }
    }
    if out.is_empty() {
        return Err(Error::DatasetNotFound(format!(
            "no {family} images for objects {object_ids:?} under {}",
            root.display()
        )));
    }
    Ok(out)
}

/// Reads a manifest: a JSON array of entries. Relative paths resolve
/// against the manifest's directory.
pub fn load_manifest(path: &Path) -> Result<Vec<AloiEntry>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut entries: Vec<AloiEntry> =
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    for e in &mut entries {
        if ConditionFamily::SYNTHETIC.contains(&e.family) || !valid_code(e.family, &e.condition_code) {
            return Err(Error::Config(format!(
                "{}: code {:?} does not belong to family {}",
                path.display(),
                e.condition_code,
                e.family
            )));
        }
        if e.path.is_relative() {
            e.path = base.join(&e.path);
        }
    }
    Ok(entries)
}

/// Pairs every reference entry with each test entry of the same object and
/// family; entries whose file is missing are skipped.
pub fn pairs_from_entries(entries: &[AloiEntry]) -> Result<Vec<AloiPair>> {
    type Group<'a> = (Vec<&'a AloiEntry>, Vec<&'a AloiEntry>);
    let mut groups: BTreeMap<(String, ConditionFamily), Group> = BTreeMap::new();
    for e in entries {
        if !e.path.is_file() {
            log::warn!("aloi: skipping missing {}", e.path.display());
            continue;
        }
        let g = groups.entry((e.object_id.clone(), e.family)).or_default();
        match e.role {
            Role::Reference => g.0.push(e),
            Role::Test => g.1.push(e),
        }
    }
    let mut out = Vec::new();
    for ((object, family), (refs, tests)) in groups {
        if refs.is_empty() {
            log::warn!("aloi: {family} {object} has no reference entry");
        }
        for r in &refs {
            for t in &tests {
                out.push(AloiPair {
                    reference: (*r).clone(),
                    test: (*t).clone(),
                    ground_truth: ground_truth(family),
                });
            }
        }
    }
    if out.is_empty() {
        return Err(Error::DatasetNotFound("manifest yields no reference/test pairs".into()));
    }
    Ok(out)
}
