//! Multiplier-distribution equalization.
//!
//! The mean matrix Θ holds the mean output LLR `λ_j` of a check node,
//! split by the type of the output multiplier (rows) and the type of the
//! index j (columns). A type distribution p̃ balances the LLR means when
//! every entry of `p̃ᵀΘ` is equal; the update `p̃ᵀ ← 1ᵀΘ^†` solves that
//! for the current Θ, and Θ is re-estimated at the new p̃.

use nalgebra::DMatrix;
use serde::Serialize;

use super::chain::{AppSource, AwgnSource, ChainModel, ChainOptions, ChainOutput};
use crate::error::{Error, Result};
use crate::profile::MultiplierDistribution;
use crate::ring::RingParams;

/// Default a-priori MI at which Θ is estimated.
pub const DEFAULT_OPERATING_MI: f64 = 0.5;
/// Target spread of `p̃ᵀΘ`.
pub const SPREAD_TOLERANCE: f64 = 1e-3;
pub const MAX_EQUALIZATION_ROUNDS: usize = 10;

/// T×T mean output LLRs by (multiplier type, index type).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanMatrix {
    types: usize,
    /// Row-major.
    entries: Vec<f64>,
}

impl MeanMatrix {
    /// Rows of types with zero mass in `type_masses` are zeroed.
    pub fn from_output(out: &ChainOutput, type_masses: &[f64]) -> Self {
        let t = out.num_types();
        let mut entries = vec![0.0; t * t];
        for r in 0..t {
            if type_masses[r] <= 0.0 {
                continue;
            }
            for s in 0..t {
                entries[r * t + s] = out.theta(r, s);
            }
        }
        Self { types: t, entries }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let t = rows.len();
        if rows.iter().any(|r| r.len() != t) {
            return Err(Error::InvalidArgument("mean matrix must be square".into()));
        }
        let entries: Vec<f64> = rows.iter().flatten().copied().collect();
        if entries.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("mean matrix entries must be finite".into()));
        }
        Ok(Self { types: t, entries })
    }

    pub fn num_types(&self) -> usize {
        self.types
    }

    pub fn get(&self, r: usize, s: usize) -> f64 {
        self.entries[r * self.types + s]
    }

    /// Per-index-type mean LLR `p̃ᵀΘ`.
    pub fn weighted_means(&self, masses: &[f64]) -> Vec<f64> {
        (0..self.types)
            .map(|s| (0..self.types).map(|r| masses[r] * self.get(r, s)).sum())
            .collect()
    }

    /// `(max − min)/mean` of `p̃ᵀΘ`.
    pub fn spread(&self, masses: &[f64]) -> f64 {
        spread(&self.weighted_means(masses))
    }

    /// `1ᵀΘ^†`, negatives clamped, normalized. `None` if the result vanishes.
    pub fn equalizing_masses(&self) -> Option<Vec<f64>> {
        let t = self.types;
        let theta = DMatrix::from_row_slice(t, t, &self.entries);
        let pinv = theta.pseudo_inverse(1e-12).ok()?;
        let ones = DMatrix::from_element(1, t, 1.0);
        let p = ones * pinv;
        let mut p: Vec<f64> = p.iter().map(|&x| x.max(0.0)).collect();
        let sum: f64 = p.iter().sum();
        if !(sum > 0.0) {
            return None;
        }
        p.iter_mut().for_each(|x| *x /= sum);
        Some(p)
    }
}

fn spread(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::MIN, f64::max);
    let min = v.iter().copied().fold(f64::MAX, f64::min);
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    if mean.abs() < f64::MIN_POSITIVE {
        return 0.0;
    }
    (max - min) / mean
}

/// Outcome of the equalization.
#[derive(Debug, Clone, Serialize)]
pub struct MultiplierDesign {
    /// Type masses p̃ of the best iterate.
    pub masses: Vec<f64>,
    /// Spread of `p̃ᵀΘ` at `masses`, Θ estimated at `masses`.
    pub spread: f64,
    pub rounds: usize,
    /// The spread reached the tolerance.
    pub converged: bool,
    /// (p̃, spread) per round.
    pub history: Vec<(Vec<f64>, f64)>,
}

/// Settings of [`optimize_multipliers_with`].
#[derive(Debug, Clone)]
pub struct EqualizerOptions {
    pub i_a: f64,
    pub chain: ChainOptions,
    pub max_rounds: usize,
    pub tolerance: f64,
    /// Starting type masses; default spreads mass evenly over nonzero elements.
    pub initial: Option<Vec<f64>>,
}

impl Default for EqualizerOptions {
    fn default() -> Self {
        Self {
            i_a: DEFAULT_OPERATING_MI,
            chain: ChainOptions {
                chains: 64,
                ..ChainOptions::default()
            },
            max_rounds: MAX_EQUALIZATION_ROUNDS,
            tolerance: SPREAD_TOLERANCE,
            initial: None,
        }
    }
}

/// Equalize the multiplier types of check degree `d_c` at a-priori MI
/// `i_a` over q-PAM with noise variance `sigma2`. `samples` is the
/// approximate number of check outputs per Θ estimate.
pub fn optimize_multipliers(d_c: usize, i_a: f64, sigma2: f64, q: usize, samples: usize) -> Result<MultiplierDesign> {
    let ring = RingParams::from_modulus(q)?;
    let opts = EqualizerOptions {
        i_a,
        chain: ChainOptions::for_samples(samples, d_c as f64, 1),
        ..EqualizerOptions::default()
    };
    optimize_multipliers_with(&ring, d_c, &AwgnSource::new(q, sigma2), &opts)
}

/// Equalization with an explicit parity-APP source and options. Θ is
/// estimated with the same seed every round, so the map p̃ ↦ Θ(p̃) is
/// deterministic.
pub fn optimize_multipliers_with(
    ring: &RingParams,
    d_c: usize,
    source: &dyn AppSource,
    opts: &EqualizerOptions,
) -> Result<MultiplierDesign> {
    let t = ring.num_types();
    let mut p = match &opts.initial {
        Some(p) if p.len() == t => {
            let s: f64 = p.iter().sum();
            p.iter().map(|x| x / s).collect()
        }
        Some(p) => {
            return Err(Error::LengthMismatch {
                expected: t,
                actual: p.len(),
            })
        }
        None => ring
            .types()
            .iter()
            .map(|ty| ty.members.len() as f64 / (ring.q() - 1) as f64)
            .collect::<Vec<f64>>(),
    };
    if t == 1 {
        return Ok(MultiplierDesign {
            masses: vec![1.0],
            spread: 0.0,
            rounds: 0,
            converged: true,
            history: Vec::new(),
        });
    }
    let mut history = Vec::new();
    let mut best: Option<(Vec<f64>, f64)> = None;
    for round in 1..=opts.max_rounds {
        let dist = MultiplierDistribution::uniform_rows(ring, [d_c], &p)?;
        let model = ChainModel::single_degree(ring, d_c, &dist, opts.chain.length)?;
        let out = model.simulate(opts.i_a, source, &opts.chain)?;
        let theta = MeanMatrix::from_output(&out, &p);
        let eps = theta.spread(&p);
        log::debug!("equalization round {round}: p̃={p:?} ε={eps:.2e}");
        history.push((p.clone(), eps));
        if best.as_ref().is_none_or(|b| eps < b.1) {
            best = Some((p.clone(), eps));
        }
        if eps <= opts.tolerance {
            return Ok(MultiplierDesign {
                masses: p,
                spread: eps,
                rounds: round,
                converged: true,
                history,
            });
        }
        match theta.equalizing_masses() {
            Some(next) => p = next,
            None => break,
        }
    }
    let (masses, spread) = best.expect("at least one round");
    log::warn!("multiplier equalization for d_c={d_c} stopped at spread {spread:.2e}");
    Ok(MultiplierDesign {
        masses,
        spread,
        rounds: history.len(),
        converged: false,
        history,
    })
}
