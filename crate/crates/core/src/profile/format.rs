//! Profile file format.
//!
//! ```toml
//! format = "dira-profile"
//! version = 1
//! label = "q4_R1.0"
//! q = 4
//!
//! [degrees]
//! perspective = "edge"          # or "node"
//!
//! [degrees.vn]                  # degree = fraction
//! 2 = 0.0800
//!
//! [degrees.cn]
//! 1 = 0.0080
//!
//! [multipliers]
//! form = "type"                 # rows of type masses, Ω_0 first
//!
//! [multipliers.rows]
//! 1 = [0.7965, 0.2035]
//! ```
//!
//! With `form = "element"` the section holds either `elements = [p_1, ..]`
//! (one row of q-1 element probabilities used for every check degree) or
//! `[multipliers.rows]` with q-1 entries per degree. Fractions may deviate
//! from unit sum by up to [`RAW_SUM_TOLERANCE`](super::RAW_SUM_TOLERANCE) and
//! are normalized on load.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::Deserialize;

use super::{CodeProfile, DegreeProfile, MultiplierDistribution};
use crate::error::{Error, Result};
use crate::ring::RingParams;

const FORMAT_TAG: &str = "dira-profile";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileFile {
    format: String,
    version: u32,
    label: String,
    q: usize,
    degrees: DegreesSection,
    multipliers: MultipliersSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DegreesSection {
    perspective: Perspective,
    vn: BTreeMap<String, f64>,
    cn: BTreeMap<String, f64>,
}

#[derive(Debug, Deserialize, Clone, Copy)]
#[serde(rename_all = "lowercase")]
enum Perspective {
    Edge,
    Node,
}

#[derive(Debug, Deserialize, Clone, Copy)]
#[serde(rename_all = "lowercase")]
enum Form {
    Type,
    Element,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MultipliersSection {
    form: Form,
    #[serde(default)]
    rows: Option<BTreeMap<String, Vec<f64>>>,
    #[serde(default)]
    elements: Option<Vec<f64>>,
}

fn parse_keys<V>(map: BTreeMap<String, V>, what: &str) -> std::result::Result<BTreeMap<usize, V>, String> {
    map.into_iter()
        .map(|(k, v)| {
            k.trim()
                .parse::<usize>()
                .map(|d| (d, v))
                .map_err(|_| format!("{what}: key {k:?} is not a degree"))
        })
        .collect()
}

impl CodeProfile {
    /// Parse a profile from TOML text.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: ProfileFile =
            toml::from_str(text).map_err(|e| Error::InvalidProfile(e.to_string()))?;
        file.into_profile().map_err(|e| match e {
            Error::InvalidProfile(_) | Error::InvalidExponent(_) | Error::InvalidArgument(_) => e,
            other => Error::InvalidProfile(other.to_string()),
        })
    }

    /// Serialize to the profile file format (edge perspective).
    pub fn to_toml_string(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "format = \"{FORMAT_TAG}\"");
        let _ = writeln!(s, "version = {FORMAT_VERSION}");
        let _ = writeln!(s, "label = {}", toml_string(&self.label));
        let _ = writeln!(s, "q = {}", self.ring.q());
        let _ = writeln!(s, "\n[degrees]\nperspective = \"edge\"\n\n[degrees.vn]");
        for (d, f) in self.degrees.vn_edge_fractions() {
            let _ = writeln!(s, "{d} = {f:?}");
        }
        let _ = writeln!(s, "\n[degrees.cn]");
        for (d, f) in self.degrees.cn_edge_fractions() {
            let _ = writeln!(s, "{d} = {f:?}");
        }
        let symmetric = self.multipliers.is_type_symmetric(&self.ring);
        let form = if symmetric { "type" } else { "element" };
        let _ = writeln!(s, "\n[multipliers]\nform = \"{form}\"\n\n[multipliers.rows]");
        for d in self.multipliers.degrees() {
            let row: Vec<f64> = if symmetric {
                self.multipliers.type_masses(&self.ring, d).unwrap()
            } else {
                self.multipliers.element_probs(d).unwrap()[1..].to_vec()
            };
            let items: Vec<String> = row.iter().map(|x| format!("{x:?}")).collect();
            let _ = writeln!(s, "{d} = [{}]", items.join(", "));
        }
        s
    }
}

fn toml_string(s: &str) -> String {
    let escaped: String = s
        .chars()
        .flat_map(|c| match c {
            '"' => vec!['\\', '"'],
            '\\' => vec!['\\', '\\'],
            c => vec![c],
        })
        .collect();
    format!("\"{escaped}\"")
}

impl ProfileFile {
    fn into_profile(self) -> Result<CodeProfile> {
        if self.format != FORMAT_TAG {
            return Err(Error::InvalidProfile(format!(
                "format tag {:?}, expected {FORMAT_TAG:?}",
                self.format
            )));
        }
        if self.version != FORMAT_VERSION {
            return Err(Error::InvalidProfile(format!(
                "unsupported version {}",
                self.version
            )));
        }
        let ring = RingParams::from_modulus(self.q)?;
        let vn = parse_keys(self.degrees.vn, "degrees.vn").map_err(Error::InvalidProfile)?;
        let cn = parse_keys(self.degrees.cn, "degrees.cn").map_err(Error::InvalidProfile)?;
        let cn_degrees: Vec<usize> = cn.keys().copied().collect();
        let degrees = match self.degrees.perspective {
            Perspective::Edge => DegreeProfile::from_edge_fractions(vn, cn)?,
            Perspective::Node => DegreeProfile::from_node_fractions(vn, cn)?,
        };

        let m = self.multipliers;
        let rows = match (m.rows, m.elements) {
            (Some(rows), None) => parse_keys(rows, "multipliers.rows").map_err(Error::InvalidProfile)?,
            (None, Some(elements)) => {
                if !matches!(m.form, Form::Element) {
                    return Err(Error::InvalidProfile(
                        "`elements` requires form = \"element\"".into(),
                    ));
                }
                cn_degrees.iter().map(|&d| (d, elements.clone())).collect()
            }
            _ => {
                return Err(Error::InvalidProfile(
                    "multipliers need exactly one of `rows` or `elements`".into(),
                ))
            }
        };
        let multipliers = match m.form {
            Form::Type => MultiplierDistribution::from_type_rows(&ring, rows)?,
            Form::Element => MultiplierDistribution::from_element_rows(&ring, rows)?,
        };
        CodeProfile::new(ring, degrees, multipliers, self.label)
    }
}

/// Read and validate a profile file.
pub fn load_profile(path: impl AsRef<Path>) -> Result<CodeProfile> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    CodeProfile::from_toml_str(&text).map_err(|e| Error::Malformed {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

/// Write a profile file.
pub fn save_profile(profile: &CodeProfile, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, profile.to_toml_string())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::bundled;

    #[test]
    fn round_trip_every_bundled_profile() {
        for label in crate::profile::bundled_labels() {
            let p = bundled(label).unwrap();
            let again = CodeProfile::from_toml_str(&p.to_toml_string()).unwrap();
            assert_eq!(p, again, "{label}");
        }
    }

    #[test]
    fn save_and_load_through_a_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.toml");
        let p = bundled("q8_R2.0").unwrap();
        save_profile(&p, &path).unwrap();
        assert_eq!(load_profile(&path).unwrap(), p);
    }

    #[test]
    fn malformed_files_are_rejected() {
        let good = crate::profile::bundled_source("q4_R1.0").unwrap().to_string();
        let cases = [
            good.replace("format = \"dira-profile\"", "format = \"other\""),
            good.replace("version = 1", "version = 7"),
            good.replace("q = 4", "q = 6"),
            good.replace("2 = 0.5012", "2 = 0.9012"),
            good.replace("[multipliers.rows]", "[multipliers.rowz]"),
            "not toml at all [[[".to_string(),
        ];
        for (i, text) in cases.iter().enumerate() {
            assert!(CodeProfile::from_toml_str(text).is_err(), "case {i} accepted");
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.toml");
        std::fs::write(&path, &cases[3]).unwrap();
        assert!(matches!(load_profile(&path), Err(Error::Malformed { .. })));
    }
}
