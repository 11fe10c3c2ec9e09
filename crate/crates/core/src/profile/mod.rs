//! Code profiles: node-degree distributions and per-check-degree multiplier
//! distributions, plus the profile file format and the bundled tables.
//!
//! Degree fractions are held in the edge perspective: `vn[i]` is the fraction
//! of interleaver edges attached to variable nodes of degree `i`, `cn[j]` the
//! fraction attached to check nodes with `j` combiner inputs.

mod bundled;
mod format;

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::ring::{RingParams, Sym};

pub use bundled::{bundled, bundled_labels, bundled_source};
pub use format::{load_profile, save_profile};

/// Deviation from unit sum accepted in a profile file before normalization.
/// Four-decimal tables routinely sum to 0.9999 or 1.0001.
pub const RAW_SUM_TOLERANCE: f64 = 2e-3;

/// Deviation from unit sum allowed once a profile is loaded.
pub const SUM_TOLERANCE: f64 = 1e-6;

/// Node-degree distribution (φ, ρ) in the edge perspective.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeProfile {
    vn: BTreeMap<usize, f64>,
    cn: BTreeMap<usize, f64>,
}

impl DegreeProfile {
    /// Build from edge fractions that already sum to one within [`SUM_TOLERANCE`].
    pub fn new(vn: BTreeMap<usize, f64>, cn: BTreeMap<usize, f64>) -> Result<Self> {
        let p = Self {
            vn: strip_zeros(vn),
            cn: strip_zeros(cn),
        };
        p.validate()?;
        Ok(p)
    }

    /// Build from edge fractions as tabulated, normalizing rows whose sum is
    /// within [`RAW_SUM_TOLERANCE`] of one.
    pub fn from_edge_fractions(vn: BTreeMap<usize, f64>, cn: BTreeMap<usize, f64>) -> Result<Self> {
        Self::new(normalize_map(vn, "vn")?, normalize_map(cn, "cn")?)
    }

    /// Build from node fractions (fraction of nodes having each degree).
    pub fn from_node_fractions(vn: BTreeMap<usize, f64>, cn: BTreeMap<usize, f64>) -> Result<Self> {
        let vn = normalize_map(vn, "vn")?;
        let cn = normalize_map(cn, "cn")?;
        Self::new(node_to_edge(&vn), node_to_edge(&cn))
    }

    fn validate(&self) -> Result<()> {
        check_fractions(&self.vn, "variable-node")?;
        check_fractions(&self.cn, "check-node")?;
        if let Some((&d, _)) = self.vn.iter().next() {
            if d < 2 {
                return Err(Error::InvalidProfile(format!(
                    "variable-node degree {d} < 2"
                )));
            }
        }
        if let Some((&d, _)) = self.cn.iter().next() {
            if d < 1 {
                return Err(Error::InvalidProfile("check-node degree 0".into()));
            }
        }
        let r = self.rate();
        if !(r > 0.0 && r < 1.0) {
            return Err(Error::InvalidProfile(format!(
                "rate {r:.6} is outside (0, 1)"
            )));
        }
        Ok(())
    }

    /// Edge fractions φ_i keyed by variable-node degree.
    pub fn vn_edge_fractions(&self) -> &BTreeMap<usize, f64> {
        &self.vn
    }

    /// Edge fractions ρ_j keyed by check-node (combiner) degree.
    pub fn cn_edge_fractions(&self) -> &BTreeMap<usize, f64> {
        &self.cn
    }

    pub fn vn_node_fractions(&self) -> BTreeMap<usize, f64> {
        edge_to_node(&self.vn)
    }

    pub fn cn_node_fractions(&self) -> BTreeMap<usize, f64> {
        edge_to_node(&self.cn)
    }

    pub fn max_vn_degree(&self) -> usize {
        self.vn.keys().next_back().copied().unwrap_or(0)
    }

    pub fn max_cn_degree(&self) -> usize {
        self.cn.keys().next_back().copied().unwrap_or(0)
    }

    /// R_s = (Σ φ_i/i) / (Σ ρ_j/j), information symbols per codeword symbol.
    pub fn rate(&self) -> f64 {
        inverse_mean(&self.vn) / inverse_mean(&self.cn)
    }
}

fn strip_zeros(map: BTreeMap<usize, f64>) -> BTreeMap<usize, f64> {
    map.into_iter().filter(|&(_, f)| f != 0.0).collect()
}

fn inverse_mean(map: &BTreeMap<usize, f64>) -> f64 {
    map.iter().map(|(&d, &f)| f / d as f64).sum()
}

fn edge_to_node(map: &BTreeMap<usize, f64>) -> BTreeMap<usize, f64> {
    let total = inverse_mean(map);
    map.iter().map(|(&d, &f)| (d, f / d as f64 / total)).collect()
}

fn node_to_edge(map: &BTreeMap<usize, f64>) -> BTreeMap<usize, f64> {
    let total: f64 = map.iter().map(|(&d, &f)| f * d as f64).sum();
    map.iter().map(|(&d, &f)| (d, f * d as f64 / total)).collect()
}

fn check_fractions(map: &BTreeMap<usize, f64>, what: &str) -> Result<()> {
    if map.is_empty() {
        return Err(Error::InvalidProfile(format!("{what} distribution is empty")));
    }
    if let Some((d, f)) = map.iter().find(|(_, f)| !(f.is_finite() && **f >= 0.0)) {
        return Err(Error::InvalidProfile(format!(
            "{what} fraction for degree {d} is {f}"
        )));
    }
    let sum: f64 = map.values().sum();
    if (sum - 1.0).abs() > SUM_TOLERANCE {
        return Err(Error::InvalidProfile(format!(
            "{what} fractions sum to {sum}"
        )));
    }
    Ok(())
}

fn normalize_vec(v: &[f64], what: &str) -> Result<Vec<f64>> {
    if let Some(x) = v.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
        return Err(Error::InvalidProfile(format!("{what}: entry {x} is negative or not finite")));
    }
    let sum: f64 = v.iter().sum();
    if (sum - 1.0).abs() > RAW_SUM_TOLERANCE {
        return Err(Error::InvalidProfile(format!("{what}: entries sum to {sum}")));
    }
    if (sum - 1.0).abs() <= 1e-12 {
        return Ok(v.to_vec());
    }
    Ok(v.iter().map(|x| x / sum).collect())
}

fn normalize_map(map: BTreeMap<usize, f64>, what: &str) -> Result<BTreeMap<usize, f64>> {
    let keys: Vec<usize> = map.keys().copied().collect();
    let vals: Vec<f64> = map.values().copied().collect();
    let vals = normalize_vec(&vals, what)?;
    Ok(keys.into_iter().zip(vals).collect())
}

/// Multiplier distribution per check-node degree.
///
/// Each row holds element probabilities `p[a]` for `a` in `0..q` with
/// `p[0] = 0`. Rows built from type masses spread p̃_j evenly over Ω_j.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierDistribution {
    q: usize,
    rows: BTreeMap<usize, Vec<f64>>,
}

impl MultiplierDistribution {
    /// Rows of type masses p̃ (length T) keyed by check-node degree.
    pub fn from_type_rows(ring: &RingParams, rows: BTreeMap<usize, Vec<f64>>) -> Result<Self> {
        let mut out = BTreeMap::new();
        for (dc, masses) in rows {
            if masses.len() != ring.num_types() {
                return Err(Error::InvalidProfile(format!(
                    "multiplier row for d_c={dc} has {} entries, expected {} types",
                    masses.len(),
                    ring.num_types()
                )));
            }
            let masses = normalize_vec(&masses, &format!("multiplier row d_c={dc}"))?;
            out.insert(dc, type_masses_to_elements(ring, &masses));
        }
        Ok(Self { q: ring.q(), rows: out })
    }

    /// Element probabilities p_1..p_{q-1} (length q-1) keyed by degree.
    pub fn from_element_rows(ring: &RingParams, rows: BTreeMap<usize, Vec<f64>>) -> Result<Self> {
        let mut out = BTreeMap::new();
        for (dc, elems) in rows {
            if elems.len() != ring.q() - 1 {
                return Err(Error::InvalidProfile(format!(
                    "multiplier row for d_c={dc} has {} entries, expected {}",
                    elems.len(),
                    ring.q() - 1
                )));
            }
            let elems = normalize_vec(&elems, &format!("multiplier row d_c={dc}"))?;
            let mut row = vec![0.0; ring.q()];
            row[1..].copy_from_slice(&elems);
            out.insert(dc, row);
        }
        Ok(Self { q: ring.q(), rows: out })
    }

    /// The same type-mass row for every listed degree.
    pub fn uniform_rows(ring: &RingParams, degrees: impl IntoIterator<Item = usize>, masses: &[f64]) -> Result<Self> {
        Self::from_type_rows(ring, degrees.into_iter().map(|d| (d, masses.to_vec())).collect())
    }

    /// Multipliers drawn uniformly from all nonzero elements.
    pub fn regular_distribution(ring: &RingParams, degrees: impl IntoIterator<Item = usize>) -> Self {
        let q = ring.q();
        let mut row = vec![1.0 / (q - 1) as f64; q];
        row[0] = 0.0;
        Self {
            q,
            rows: degrees.into_iter().map(|d| (d, row.clone())).collect(),
        }
    }

    /// Multipliers restricted to regular elements.
    pub fn all_regular(ring: &RingParams, degrees: impl IntoIterator<Item = usize>) -> Self {
        let mut masses = vec![0.0; ring.num_types()];
        masses[0] = 1.0;
        let row = type_masses_to_elements(ring, &masses);
        Self {
            q: ring.q(),
            rows: degrees.into_iter().map(|d| (d, row.clone())).collect(),
        }
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn degrees(&self) -> impl Iterator<Item = usize> + '_ {
        self.rows.keys().copied()
    }

    /// Element probabilities for check-node degree `d_c` (length q).
    pub fn element_probs(&self, d_c: usize) -> Option<&[f64]> {
        self.rows.get(&d_c).map(Vec::as_slice)
    }

    /// Type masses p̃ for check-node degree `d_c`.
    pub fn type_masses(&self, ring: &RingParams, d_c: usize) -> Option<Vec<f64>> {
        let row = self.rows.get(&d_c)?;
        let mut masses = vec![0.0; ring.num_types()];
        for (a, &p) in row.iter().enumerate().skip(1) {
            masses[ring.type_index(a as Sym)] += p;
        }
        Some(masses)
    }

    /// Zero-divisor mass of a row.
    pub fn zero_divisor_mass(&self, ring: &RingParams, d_c: usize) -> Option<f64> {
        self.type_masses(ring, d_c).map(|m| m[1..].iter().sum())
    }

    /// True when every row assigns equal probability within each type.
    pub fn is_type_symmetric(&self, ring: &RingParams) -> bool {
        self.rows.values().all(|row| {
            ring.types().iter().all(|t| {
                let first = row[t.members[0] as usize];
                t.members.iter().all(|&a| (row[a as usize] - first).abs() <= 1e-12)
            })
        })
    }

    pub fn insert_type_row(&mut self, ring: &RingParams, d_c: usize, masses: &[f64]) {
        self.rows.insert(d_c, type_masses_to_elements(ring, masses));
    }
}

pub(crate) fn type_masses_to_elements(ring: &RingParams, masses: &[f64]) -> Vec<f64> {
    let mut row = vec![0.0; ring.q()];
    for (t, &mass) in ring.types().iter().zip(masses) {
        let each = mass / t.members.len() as f64;
        for &a in &t.members {
            row[a as usize] = each;
        }
    }
    row
}

/// A complete code profile over Z_q.
#[derive(Debug, Clone, PartialEq)]
pub struct CodeProfile {
    pub ring: RingParams,
    pub degrees: DegreeProfile,
    pub multipliers: MultiplierDistribution,
    pub label: String,
}

impl CodeProfile {
    pub fn new(
        ring: RingParams,
        degrees: DegreeProfile,
        multipliers: MultiplierDistribution,
        label: impl Into<String>,
    ) -> Result<Self> {
        let p = Self {
            ring,
            degrees,
            multipliers,
            label: label.into(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.multipliers.q() != self.ring.q() {
            return Err(Error::InvalidProfile(format!(
                "multiplier rows are over Z_{} but the ring is Z_{}",
                self.multipliers.q(),
                self.ring.q()
            )));
        }
        for (&dc, &frac) in self.degrees.cn_edge_fractions() {
            if frac > 0.0 && self.multipliers.element_probs(dc).is_none() {
                return Err(Error::InvalidProfile(format!(
                    "no multiplier row for check-node degree {dc}"
                )));
            }
        }
        for dc in self.multipliers.degrees() {
            let row = self.multipliers.element_probs(dc).unwrap();
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > SUM_TOLERANCE || row[0] != 0.0 {
                return Err(Error::InvalidProfile(format!(
                    "multiplier row d_c={dc} sums to {sum}"
                )));
            }
        }
        Ok(())
    }

    /// Coding rate R_s.
    pub fn rate(&self) -> f64 {
        self.degrees.rate()
    }

    /// Spectral efficiency R_s·m in bits per real symbol.
    pub fn spectral_efficiency(&self) -> f64 {
        self.rate() * self.ring.m() as f64
    }
}

/// R_s of a profile.
pub fn rate(profile: &CodeProfile) -> f64 {
    profile.rate()
}
