//! Profiles shipped with the library.

use super::CodeProfile;
use crate::error::{Error, Result};

const BUNDLED: &[(&str, &str)] = &[
    ("q4_R0.5", include_str!("../../profiles/q4_R0.5.toml")),
    ("q4_R1.0", include_str!("../../profiles/q4_R1.0.toml")),
    ("q4_R1.5", include_str!("../../profiles/q4_R1.5.toml")),
    ("q8_R1.0", include_str!("../../profiles/q8_R1.0.toml")),
    ("q8_R1.5", include_str!("../../profiles/q8_R1.5.toml")),
    ("q8_R2.0", include_str!("../../profiles/q8_R2.0.toml")),
    ("dpc_q4_Rc1_2", include_str!("../../profiles/dpc_q4_Rc1_2.toml")),
    ("dpc_q8_Rc1_2", include_str!("../../profiles/dpc_q8_Rc1_2.toml")),
    ("dpc_q8_Rc2_3", include_str!("../../profiles/dpc_q8_Rc2_3.toml")),
    ("dpc_q16_Rc5_8", include_str!("../../profiles/dpc_q16_Rc5_8.toml")),
];

pub fn bundled_labels() -> impl Iterator<Item = &'static str> {
    BUNDLED.iter().map(|(l, _)| *l)
}

/// Verbatim file text of a bundled profile.
pub fn bundled_source(label: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(l, _)| *l == label).map(|(_, s)| *s)
}

pub fn bundled(label: &str) -> Result<CodeProfile> {
    let text = bundled_source(label).ok_or_else(|| Error::UnknownProfile(label.to_string()))?;
    CodeProfile::from_toml_str(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_bundled_profiles_validate_with_expected_rates() {
        let expected = [
            ("q4_R0.5", 0.25),
            ("q4_R1.0", 0.5),
            ("q4_R1.5", 0.75),
            ("q8_R1.0", 1.0 / 3.0),
            ("q8_R1.5", 0.5),
            ("q8_R2.0", 2.0 / 3.0),
            ("dpc_q4_Rc1_2", 0.5),
            ("dpc_q8_Rc1_2", 0.5),
            ("dpc_q8_Rc2_3", 2.0 / 3.0),
        ];
        for (label, r) in expected {
            let p = bundled(label).unwrap();
            assert!((p.rate() - r).abs() < 1e-3, "{label}: {} vs {r}", p.rate());
            assert_eq!(p.label, label);
        }
        let p = bundled("dpc_q16_Rc5_8").unwrap();
        assert!((p.rate() - 0.619).abs() < 2e-3, "{}", p.rate());
    }

    #[test]
    fn multiplier_rows_reproduce_tables() {
        let p = bundled("q4_R1.0").unwrap();
        let row = p.multipliers.type_masses(&p.ring, 3).unwrap();
        assert!((row[0] - 0.8004).abs() < 1e-12 && (row[1] - 0.1996).abs() < 1e-12);

        let p = bundled("q8_R2.0").unwrap();
        let row = p.multipliers.type_masses(&p.ring, 2).unwrap();
        assert!((row[0] - 0.87).abs() < 1e-12);
        assert_eq!(row[1], 0.0);
        assert!((row[2] - 0.13).abs() < 1e-12);
    }

    #[test]
    fn unknown_label() {
        assert!(matches!(bundled("nope"), Err(Error::UnknownProfile(_))));
    }
}
