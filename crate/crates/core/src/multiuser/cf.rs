//! Compute-forward over a K-user real Gaussian multiple-access channel.
//!
//! Every user encodes with the same graph and adds the same coset θ. The
//! receiver estimates the combinations `v_l = ⊕_i α_{l,i}·c_i`, which are
//! codewords of the same code, by binning the `q^K` joint candidates of
//! each received sample by their combination value and decoding each APP
//! stream with the single-user decoder.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::modular::{inverse_mod, linear_combo};
use crate::bp::{finish_probs, DecodeResult, Decoder, ProbVector};
use crate::codec::{encode, PamMapper};
use crate::error::{Error, Result};
use crate::exit::AppSource;
use crate::graph::CodeGraph;
use crate::ring::{RingParams, Sym};

/// Largest number of users accepted by the bin enumeration.
pub const MAX_CF_USERS: usize = 4;
/// Largest joint candidate count `q^K`.
pub const MAX_CF_CANDIDATES: usize = 1 << 16;

fn check_enumeration(q: usize, users: usize) -> Result<usize> {
    if users == 0 {
        return Err(Error::InvalidArgument("at least one user is required".into()));
    }
    let count = (q as u128).pow(users as u32);
    if users > MAX_CF_USERS || count > MAX_CF_CANDIDATES as u128 {
        return Err(Error::EnumerationBound(format!(
            "{users} users over Z_{q} give {count} candidates (limits: {MAX_CF_USERS} users, \
             {MAX_CF_CANDIDATES} candidates)"
        )));
    }
    Ok(count as usize)
}

/// Joint-candidate table for one coefficient row: for every coset value θ,
/// the noiseless superposition and the bin `⊕ α_i c_i` of each candidate.
#[derive(Debug, Clone)]
pub struct CfBinner {
    q: usize,
    sigma2: f64,
    /// `q` blocks of `q^K` (amplitude, bin) pairs.
    table: Vec<(f64, Sym)>,
    per_theta: usize,
    counts: Vec<usize>,
}

impl CfBinner {
    pub fn new(ring: &RingParams, gains: &[f64], alpha: &[Sym], sigma2: f64) -> Result<Self> {
        let q = ring.q();
        let users = gains.len();
        if alpha.len() != users {
            return Err(Error::LengthMismatch {
                expected: users,
                actual: alpha.len(),
            });
        }
        ring.check_all(alpha)?;
        let per_theta = check_enumeration(q, users)?;
        let mapper = PamMapper::new(q);
        let mut table = Vec::with_capacity(q * per_theta);
        let mut counts = vec![0usize; q];
        let mut c = vec![0 as Sym; users];
        for theta in 0..q as Sym {
            for idx in 0..per_theta {
                let mut rest = idx;
                for ci in c.iter_mut() {
                    *ci = (rest % q) as Sym;
                    rest /= q;
                }
                let mut amp = 0.0;
                let mut bin: Sym = 0;
                for ((&ci, &h), &a) in c.iter().zip(gains).zip(alpha) {
                    amp += h * mapper.point(ring.add(ci, theta));
                    bin = ring.add(bin, ring.mul(a, ci));
                }
                table.push((amp, bin));
                if theta == 0 {
                    counts[bin as usize] += 1;
                }
            }
        }
        Ok(Self {
            q,
            sigma2,
            table,
            per_theta,
            counts,
        })
    }

    pub fn q(&self) -> usize {
        self.q
    }

    /// Joint candidates per bin; identical for every θ and summing to `q^K`.
    pub fn bin_counts(&self) -> &[usize] {
        &self.counts
    }

    /// `p(v = ω | y)` for a sample received under coset value θ.
    pub fn fill(&self, y: f64, theta: Sym, out: &mut [f64]) {
        let block = &self.table[theta as usize * self.per_theta..(theta as usize + 1) * self.per_theta];
        let best = block
            .iter()
            .map(|&(a, _)| (y - a) * (y - a))
            .fold(f64::INFINITY, f64::min);
        out.fill(0.0);
        let scale = 1.0 / (2.0 * self.sigma2);
        for &(a, bin) in block {
            out[bin as usize] += (-((y - a) * (y - a) - best) * scale).exp();
        }
        finish_probs(out);
    }

    /// Flat `n·q` bin APPs for a received block.
    pub fn apps(&self, y: &[f64], coset: &[Sym]) -> Vec<f64> {
        let q = self.q;
        let mut out = vec![0.0; y.len() * q];
        for (t, (&yt, &th)) in y.iter().zip(coset).enumerate() {
            self.fill(yt, th, &mut out[t * q..(t + 1) * q]);
        }
        out
    }
}

/// K users sharing one code graph, real gains `h`, an L×K coefficient
/// matrix over Z_q and noise variance `σ²`.
#[derive(Debug, Clone)]
pub struct CfScenario<'g> {
    pub graph: &'g CodeGraph,
    pub gains: Vec<f64>,
    pub coefficients: Vec<Vec<Sym>>,
    pub sigma2: f64,
}

impl<'g> CfScenario<'g> {
    pub fn new(graph: &'g CodeGraph, gains: Vec<f64>, coefficients: Vec<Vec<Sym>>, sigma2: f64) -> Result<Self> {
        let users = gains.len();
        check_enumeration(graph.q(), users)?;
        if coefficients.is_empty() {
            return Err(Error::InvalidArgument("no coefficient rows".into()));
        }
        for row in &coefficients {
            if row.len() != users {
                return Err(Error::LengthMismatch {
                    expected: users,
                    actual: row.len(),
                });
            }
            graph.ring().check_all(row)?;
            if row.iter().all(|&a| a == 0) {
                return Err(Error::InvalidArgument("coefficient row is all zero".into()));
            }
        }
        if gains.iter().any(|h| !h.is_finite()) {
            return Err(Error::InvalidArgument("channel gains must be finite".into()));
        }
        if !(sigma2 > 0.0) {
            return Err(Error::InvalidArgument(format!("noise variance {sigma2} must be positive")));
        }
        Ok(Self {
            graph,
            gains,
            coefficients,
            sigma2,
        })
    }

    pub fn users(&self) -> usize {
        self.gains.len()
    }

    pub fn ring(&self) -> &RingParams {
        self.graph.ring()
    }

    pub fn binner(&self, row: usize) -> Result<CfBinner> {
        let alpha = self
            .coefficients
            .get(row)
            .ok_or_else(|| Error::InvalidArgument(format!("no coefficient row {row}")))?;
        CfBinner::new(self.ring(), &self.gains, alpha, self.sigma2)
    }

    /// Full recovery needs L = K and a regular determinant.
    pub fn check_recoverable(&self) -> Result<()> {
        inverse_mod(self.ring(), &self.coefficients).map(|_| ())
    }
}

/// Transmitted codewords (coset not applied) and the received block.
#[derive(Debug, Clone, PartialEq)]
pub struct CfBlock {
    pub codewords: Vec<Vec<Sym>>,
    pub received: Vec<f64>,
}

/// `y = Σ h_i·x_i + z` with `x_i` the unit-power PAM image of `c_i ⊕ θ`.
pub fn cf_transmit<R: Rng + ?Sized>(scenario: &CfScenario, messages: &[Vec<Sym>], rng: &mut R) -> Result<CfBlock> {
    if messages.len() != scenario.users() {
        return Err(Error::LengthMismatch {
            expected: scenario.users(),
            actual: messages.len(),
        });
    }
    let g = scenario.graph;
    let mapper = PamMapper::new(g.q());
    let codewords = messages.iter().map(|w| encode(g, w)).collect::<Result<Vec<_>>>()?;
    let mut received = vec![0.0; g.n()];
    for (c, &h) in codewords.iter().zip(&scenario.gains) {
        for (y, x) in received.iter_mut().zip(mapper.map(c, g.coset())) {
            *y += h * x;
        }
    }
    let sd = scenario.sigma2.sqrt();
    for y in received.iter_mut() {
        let z: f64 = StandardNormal.sample(rng);
        *y += sd * z;
    }
    Ok(CfBlock { codewords, received })
}

/// Bin APP of one sample for coefficient row `row`.
pub fn cf_bin_app(y_t: f64, scenario: &CfScenario, row: usize, theta: Sym) -> Result<ProbVector> {
    let binner = scenario.binner(row)?;
    let mut out = vec![0.0; binner.q()];
    binner.fill(y_t, theta, &mut out);
    ProbVector::new(out)
}

/// Decode every combination `u_l = ⊕ α_{l,i} w_i`; rows run in parallel.
pub fn cf_compute(scenario: &CfScenario, y: &[f64], max_iter: usize) -> Result<Vec<DecodeResult>> {
    let g = scenario.graph;
    if y.len() != g.n() {
        return Err(Error::LengthMismatch {
            expected: g.n(),
            actual: y.len(),
        });
    }
    (0..scenario.coefficients.len())
        .into_par_iter()
        .map(|row| {
            let apps = scenario.binner(row)?.apps(y, g.coset());
            Decoder::new(g).decode(&apps, max_iter)
        })
        .collect()
}

/// Recover the K messages from K decoded combinations: `ŵ = A^{-1} û`.
pub fn cf_recover(ring: &RingParams, combinations: &[Vec<Sym>], a: &[Vec<Sym>]) -> Result<Vec<Vec<Sym>>> {
    if combinations.len() != a.len() {
        return Err(Error::LengthMismatch {
            expected: a.len(),
            actual: combinations.len(),
        });
    }
    let inv = inverse_mod(ring, a)?;
    inv.iter().map(|row| linear_combo(ring, combinations, row)).collect()
}

/// Bin APPs for the all-zero combination, for EXIT analysis of a CF
/// receiver: the users' symbols are uniform subject to `⊕ α_i c_i = 0`.
#[derive(Debug, Clone)]
pub struct CfSource {
    binner: CfBinner,
    ring: RingParams,
    gains: Vec<f64>,
    alpha: Vec<Sym>,
    sigma2: f64,
}

impl CfSource {
    pub fn new(ring: &RingParams, gains: &[f64], alpha: &[Sym], sigma2: f64) -> Result<Self> {
        if alpha.iter().all(|&a| a == 0) {
            return Err(Error::InvalidArgument("coefficient row is all zero".into()));
        }
        Ok(Self {
            binner: CfBinner::new(ring, gains, alpha, sigma2)?,
            ring: ring.clone(),
            gains: gains.to_vec(),
            alpha: alpha.to_vec(),
            sigma2,
        })
    }
}

impl AppSource for CfSource {
    fn q(&self) -> usize {
        self.binner.q()
    }

    fn sample(&self, rng: &mut ChaCha8Rng, out: &mut [f64]) {
        let q = self.ring.q();
        let mapper = PamMapper::new(q);
        let theta = rng.random_range(0..q) as Sym;
        let mut c = vec![0 as Sym; self.alpha.len()];
        // rejection keeps the conditional distribution exactly uniform; the
        // acceptance rate is at least 1/q
        loop {
            c.iter_mut().for_each(|x| *x = rng.random_range(0..q) as Sym);
            let v = c
                .iter()
                .zip(&self.alpha)
                .fold(0, |s, (&x, &a)| self.ring.add(s, self.ring.mul(a, x)));
            if v == 0 {
                break;
            }
        }
        let z: f64 = StandardNormal.sample(rng);
        let y = c
            .iter()
            .zip(&self.gains)
            .map(|(&x, &h)| h * mapper.point(self.ring.add(x, theta)))
            .sum::<f64>()
            + self.sigma2.sqrt() * z;
        self.binner.fill(y, theta, out);
    }
}
