//! Belief propagation over length-q probability vectors.
//!
//! Messages are probability vectors indexed by ring element. Every emitted
//! vector passes through [`finish_probs`]: negatives clamped to zero, the
//! vector scaled to unit sum, entries floored at [`PROB_FLOOR`], and
//! renormalized. LLRs use the natural log, `λ_i = ln(p_0/p_i)`.

mod check;
mod decoder;
mod fft;
mod stats;

pub use check::{cn_update_bruteforce, cn_update_fft, CheckKernel, BRUTEFORCE_LIMIT};
pub use decoder::{decode, DecodeResult, Decoder, DEFAULT_MAX_ITER};
pub use fft::Fft;
pub use stats::{llr_stats, LlrStats};

use serde::{Deserialize, Serialize};

use crate::codec::PamMapper;
use crate::error::{Error, Result};
use crate::ring::Sym;

/// Smallest probability kept in a message.
pub const PROB_FLOOR: f64 = 1e-30;

/// Tolerance on the unit-sum invariant of a [`ProbVector`].
pub const SIMPLEX_TOLERANCE: f64 = 1e-9;

/// Clamp, normalize, floor and renormalize a message in place.
#[inline]
pub fn finish_probs(p: &mut [f64]) {
    let mut sum = 0.0;
    for x in p.iter_mut() {
        if !(*x > 0.0) {
            *x = 0.0;
        }
        sum += *x;
    }
    if !(sum > 0.0) || !sum.is_finite() {
        let u = 1.0 / p.len() as f64;
        p.fill(u);
        return;
    }
    let inv = 1.0 / sum;
    let mut sum2 = 0.0;
    for x in p.iter_mut() {
        *x = (*x * inv).max(PROB_FLOOR);
        sum2 += *x;
    }
    let inv2 = 1.0 / sum2;
    for x in p.iter_mut() {
        *x *= inv2;
    }
}

/// A probability vector over Z_q.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    /// Validate entries (nonnegative, finite, unit sum within tolerance).
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() || !p.len().is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "probability vector of length {}",
                p.len()
            )));
        }
        if p.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
            return Err(Error::InvalidArgument("negative or non-finite probability".into()));
        }
        let s: f64 = p.iter().sum();
        if (s - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(Error::InvalidArgument(format!("probabilities sum to {s}")));
        }
        Ok(Self(p))
    }

    /// Normalize arbitrary nonnegative weights.
    pub fn from_weights(mut w: Vec<f64>) -> Self {
        finish_probs(&mut w);
        Self(w)
    }

    pub fn uniform(q: usize) -> Self {
        Self(vec![1.0 / q as f64; q])
    }

    pub fn one_hot(q: usize, a: Sym) -> Self {
        let mut p = vec![0.0; q];
        p[a as usize] = 1.0;
        Self::from_weights(p)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn q(&self) -> usize {
        self.0.len()
    }

    pub fn argmax(&self) -> Sym {
        argmax(&self.0)
    }

    pub fn to_llr(&self) -> LlrVector {
        LlrVector::from_probs(&self.0)
    }
}

/// Log-ratios `λ_i = ln(p_0/p_i)`, i = 1..q−1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlrVector(Vec<f64>);

impl LlrVector {
    pub fn new(llr: Vec<f64>) -> Self {
        Self(llr)
    }

    /// Probabilities are floored before the log, so the result is finite.
    pub fn from_probs(p: &[f64]) -> Self {
        let p0 = p[0].max(PROB_FLOOR);
        Self(p[1..].iter().map(|&pi| (p0 / pi.max(PROB_FLOOR)).ln()).collect())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn to_probs(&self) -> ProbVector {
        // p_i ∝ exp(−λ_i) with λ_0 = 0, shifted so the largest weight is 1
        let min = self.0.iter().copied().fold(0.0, f64::min);
        let mut w = Vec::with_capacity(self.0.len() + 1);
        w.push(min.exp());
        w.extend(self.0.iter().map(|&l| (min - l).exp()));
        ProbVector::from_weights(w)
    }
}

#[inline]
pub(crate) fn argmax(p: &[f64]) -> Sym {
    let mut best = 0;
    for i in 1..p.len() {
        if p[i] > p[best] {
            best = i;
        }
    }
    best as Sym
}

/// Channel APP of one received sample with the coset removed:
/// `p_i ∝ exp(−(y − point(i ⊕ θ))²/(2σ²))`.
pub fn channel_app_into(y: f64, sigma2: f64, mapper: &PamMapper, theta: Sym, out: &mut [f64]) {
    let q = mapper.q();
    let mut best = f64::INFINITY;
    for (i, o) in out.iter_mut().enumerate() {
        let x = mapper.point(((i + theta as usize) & (q - 1)) as Sym);
        let d = (y - x) * (y - x) / (2.0 * sigma2);
        *o = d;
        best = best.min(d);
    }
    for o in out.iter_mut() {
        *o = (best - *o).exp();
    }
    finish_probs(out);
}

pub fn channel_app(y: f64, sigma2: f64, mapper: &PamMapper, theta: Sym) -> ProbVector {
    let mut out = vec![0.0; mapper.q()];
    channel_app_into(y, sigma2, mapper, theta, &mut out);
    ProbVector(out)
}

/// Flat `n·q` channel APPs for a received block.
pub fn channel_apps(y: &[f64], sigma2: f64, mapper: &PamMapper, coset: &[Sym]) -> Vec<f64> {
    let q = mapper.q();
    let mut out = vec![0.0; y.len() * q];
    for (t, (&yt, &th)) in y.iter().zip(coset).enumerate() {
        channel_app_into(yt, sigma2, mapper, th, &mut out[t * q..(t + 1) * q]);
    }
    out
}

/// Variable-node update: for each edge, prior times the other incoming messages.
pub fn vn_update(incoming: &[ProbVector], prior: &ProbVector) -> Result<Vec<ProbVector>> {
    let q = prior.q();
    if let Some(bad) = incoming.iter().find(|r| r.q() != q) {
        return Err(Error::LengthMismatch {
            expected: q,
            actual: bad.q(),
        });
    }
    let flat: Vec<f64> = incoming.iter().flat_map(|r| r.0.iter().copied()).collect();
    let mut out = vec![0.0; flat.len()];
    let mut scratch = VnScratch::default();
    scratch.update(&flat, prior.as_slice(), &mut out, None);
    Ok(out.chunks(q).map(|c| ProbVector(c.to_vec())).collect())
}

/// Buffers for leave-one-out products at a variable node.
#[derive(Debug, Default, Clone)]
pub(crate) struct VnScratch {
    prefix: Vec<f64>,
    suffix: Vec<f64>,
}

impl VnScratch {
    /// `incoming`/`outgoing` are flat `d·q`. If `posterior` is given it
    /// receives the full (normalized) product including the prior.
    pub(crate) fn update(&mut self, incoming: &[f64], prior: &[f64], outgoing: &mut [f64], posterior: Option<&mut [f64]>) {
        let q = prior.len();
        let d = incoming.len() / q;
        self.prefix.resize((d + 1) * q, 0.0);
        self.suffix.resize((d + 1) * q, 0.0);
        self.prefix[..q].copy_from_slice(prior);
        for tau in 0..d {
            let (done, rest) = self.prefix.split_at_mut((tau + 1) * q);
            let prev = &done[tau * q..];
            let r = &incoming[tau * q..(tau + 1) * q];
            let next = &mut rest[..q];
            let mut s = 0.0;
            for k in 0..q {
                next[k] = prev[k] * r[k];
                s += next[k];
            }
            rescale(next, s);
        }
        self.suffix[d * q..].fill(1.0);
        for tau in (0..d).rev() {
            let (head, tail) = self.suffix.split_at_mut((tau + 1) * q);
            let next = &tail[..q];
            let r = &incoming[tau * q..(tau + 1) * q];
            let cur = &mut head[tau * q..];
            let mut s = 0.0;
            for k in 0..q {
                cur[k] = next[k] * r[k];
                s += cur[k];
            }
            rescale(cur, s);
        }
        for tau in 0..d {
            let out = &mut outgoing[tau * q..(tau + 1) * q];
            for k in 0..q {
                out[k] = self.prefix[tau * q + k] * self.suffix[(tau + 1) * q + k];
            }
            finish_probs(out);
        }
        if let Some(post) = posterior {
            post.copy_from_slice(&self.prefix[d * q..(d + 1) * q]);
            finish_probs(post);
        }
    }
}

/// Keep running products away from underflow; zero vectors stay zero.
#[inline]
fn rescale(v: &mut [f64], sum: f64) {
    if sum > 0.0 && sum.is_finite() {
        let inv = 1.0 / sum;
        v.iter_mut().for_each(|x| *x *= inv);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_pv(q: usize, rng: &mut impl Rng) -> ProbVector {
        ProbVector::from_weights((0..q).map(|_| rng.random::<f64>()).collect())
    }

    #[test]
    fn channel_app_limits_and_symmetry() {
        let m = PamMapper::new(4);
        let p = channel_app(m.point(2), 1e-6, &m, 0);
        assert!(p.as_slice()[2] > 1.0 - 1e-12);
        let mid = (m.point(1) + m.point(2)) / 2.0;
        let p = channel_app(mid, 0.05, &m, 0);
        assert!((p.as_slice()[1] - p.as_slice()[2]).abs() < 1e-12);
        // coset: received point of c ⊕ θ is attributed to c
        let p = channel_app(m.point(3), 1e-6, &m, 2);
        assert_eq!(p.argmax(), 1);
    }

    #[test]
    fn channel_app_hand_evaluation() {
        // q=4, γ=√1.25, θ=0, y=0, σ²=1: weights exp(−x²/2) at x = ±0.5/γ, ±1.5/γ
        let m = PamMapper::new(4);
        let p = channel_app(0.0, 1.0, &m, 0);
        let g = 1.25f64.sqrt();
        let w: Vec<f64> = [-1.5, -0.5, 0.5, 1.5].iter().map(|x: &f64| (-(x / g).powi(2) / 2.0).exp()).collect();
        let s: f64 = w.iter().sum();
        for i in 0..4 {
            assert!((p.as_slice()[i] - w[i] / s).abs() < 1e-12);
        }
    }

    #[test]
    fn vn_update_examples() {
        let u = ProbVector::uniform(4);
        let prior = ProbVector::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let out = vn_update(&[u.clone(), u.clone()], &prior).unwrap();
        for o in &out {
            for (a, b) in o.as_slice().iter().zip(prior.as_slice()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
        let half = ProbVector::new(vec![0.5, 0.5, 0.0, 0.0]).unwrap();
        let out = vn_update(&[half.clone(), half.clone(), half.clone()], &u).unwrap();
        for o in &out {
            assert!((o.as_slice()[0] - 0.5).abs() < 1e-12 && o.as_slice()[2] < 1e-25);
        }
    }

    #[test]
    fn vn_update_matches_scalar_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let q = 8;
        for _ in 0..50 {
            let inc: Vec<ProbVector> = (0..3).map(|_| rand_pv(q, &mut rng)).collect();
            let prior = rand_pv(q, &mut rng);
            let out = vn_update(&inc, &prior).unwrap();
            for skip in 0..3 {
                let mut w: Vec<f64> = prior.as_slice().to_vec();
                for (tau, r) in inc.iter().enumerate() {
                    if tau != skip {
                        for i in 0..q {
                            w[i] *= r.as_slice()[i];
                        }
                    }
                }
                let s: f64 = w.iter().sum();
                for i in 0..q {
                    assert!((out[skip].as_slice()[i] - w[i] / s).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn vn_update_survives_underflow() {
        let q = 4;
        let tiny = ProbVector::from_weights(vec![1.0, 1e-20, 1e-20, 1e-20]);
        let inc = vec![tiny; 60];
        let out = vn_update(&inc, &ProbVector::uniform(q)).unwrap();
        for o in out {
            assert!(o.as_slice().iter().all(|x| x.is_finite()));
            assert!((o.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert_eq!(o.argmax(), 0);
        }
    }

    #[test]
    fn llr_round_trip() {
        let p = ProbVector::new(vec![0.4, 0.3, 0.2, 0.1]).unwrap();
        let l = p.to_llr();
        assert!((l.as_slice()[0] - (4.0f64 / 3.0).ln()).abs() < 1e-12);
        let back = l.to_probs();
        for (a, b) in back.as_slice().iter().zip(p.as_slice()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(ProbVector::new(vec![0.5, 0.6]).is_err());
        assert!(ProbVector::new(vec![0.5, 0.5, 0.0]).is_err());
    }
}
