//! Linear dirty-paper coding against integer interference known at the
//! transmitter.
//!
//! The transmitter sends `x = (c' ⊖ s) − (q−1)/2` with `c' = c ⊕ θ`. The
//! receiver sees `r = x + s = c' − (q−1)/2 + q·k`, a point of the extended
//! constellation of `c'`, where `k = ⌈(s − c')/q⌉`. Received samples are in
//! units of the PAM normalization γ: `y = r/γ + z`, so `x/γ` has unit power.
//!
//! The demodulator only needs the law of `k` given `c'`, which follows from
//! the interference prior: `P(k | i) = P(i + q(k−1) < s ≤ i + qk)`.

use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::bp::{finish_probs, DecodeResult, Decoder, ProbVector};
use crate::codec::{encode, PamMapper};
use crate::error::{Error, Result};
use crate::graph::CodeGraph;
use crate::ring::Sym;

/// Prior mass a demodulation window must cover.
pub const WINDOW_COVERAGE: f64 = 1.0 - 1e-9;
/// Standard deviations kept on each side of a discrete Gaussian prior.
const GAUSSIAN_TAIL: f64 = 12.0;
const MAX_PRIOR_SUPPORT: usize = 1 << 20;

/// Law of the integer interference `s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InterferencePrior {
    /// Uniform on `lo..=hi`.
    Uniform { lo: i64, hi: i64 },
    /// `P(s) ∝ exp(−(s − mean)²/(2·std²))`, truncated where the tail is negligible.
    DiscreteGaussian { mean: f64, std: f64 },
    /// `P(offset + j) = probs[j]` (normalized on use).
    Pmf { offset: i64, probs: Vec<f64> },
}

impl InterferencePrior {
    /// Uniform on `{0, …, q−1}`, the integer set of a q-PAM signal.
    pub fn pam_default(q: usize) -> Self {
        Self::Uniform {
            lo: 0,
            hi: q as i64 - 1,
        }
    }

    /// No interference.
    pub fn none() -> Self {
        Self::Uniform { lo: 0, hi: 0 }
    }

    pub fn table(&self) -> Result<PriorTable> {
        let (offset, probs) = match self {
            Self::Uniform { lo, hi } => {
                if hi < lo {
                    return Err(Error::InvalidArgument(format!("empty uniform range {lo}..={hi}")));
                }
                let len = (hi - lo + 1) as usize;
                (*lo, vec![1.0; len.min(MAX_PRIOR_SUPPORT + 1)])
            }
            Self::DiscreteGaussian { mean, std } => {
                if !(std.is_finite() && *std > 0.0 && mean.is_finite()) {
                    return Err(Error::InvalidArgument(format!("invalid discrete Gaussian ({mean}, {std})")));
                }
                let lo = (mean - GAUSSIAN_TAIL * std).floor() as i64 - 1;
                let hi = (mean + GAUSSIAN_TAIL * std).ceil() as i64 + 1;
                let probs = (lo..=hi)
                    .map(|s| (-(s as f64 - mean).powi(2) / (2.0 * std * std)).exp())
                    .collect();
                (lo, probs)
            }
            Self::Pmf { offset, probs } => {
                if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                    return Err(Error::InvalidArgument("prior probabilities must be finite and nonnegative".into()));
                }
                (*offset, probs.clone())
            }
        };
        PriorTable::new(offset, probs)
    }
}

/// Normalized pmf on `offset..offset+len` with a sampler.
#[derive(Debug, Clone)]
pub struct PriorTable {
    offset: i64,
    probs: Vec<f64>,
    sampler: WeightedIndex<f64>,
}

impl PriorTable {
    fn new(offset: i64, mut probs: Vec<f64>) -> Result<Self> {
        if probs.len() > MAX_PRIOR_SUPPORT {
            return Err(Error::InvalidArgument(format!(
                "prior support {} exceeds {MAX_PRIOR_SUPPORT}",
                probs.len()
            )));
        }
        let total: f64 = probs.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidArgument("prior has no mass".into()));
        }
        probs.iter_mut().for_each(|p| *p /= total);
        let sampler = WeightedIndex::new(&probs).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        Ok(Self { offset, probs, sampler })
    }

    /// Smallest and largest value with nonzero mass.
    pub fn support(&self) -> (i64, i64) {
        let first = self.probs.iter().position(|&p| p > 0.0).unwrap_or(0);
        let last = self.probs.iter().rposition(|&p| p > 0.0).unwrap_or(0);
        (self.offset + first as i64, self.offset + last as i64)
    }

    pub fn prob(&self, s: i64) -> f64 {
        let j = s - self.offset;
        if j < 0 || j as usize >= self.probs.len() {
            0.0
        } else {
            self.probs[j as usize]
        }
    }

    /// `P(a ≤ s ≤ b)`.
    pub fn mass(&self, a: i64, b: i64) -> f64 {
        let lo = (a - self.offset).max(0);
        let hi = (b - self.offset).min(self.probs.len() as i64 - 1);
        if lo > hi {
            return 0.0;
        }
        self.probs[lo as usize..=hi as usize].iter().sum()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> i64 {
        self.offset + self.sampler.sample(rng) as i64
    }
}

/// Inclusive range of extended-constellation indices k: the points of
/// symbol i are `i − (q−1)/2 + q·k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DpcWindow {
    pub k_min: i64,
    pub k_max: i64,
}

impl DpcWindow {
    /// Minimal window covering every interference value in `lo..=hi`.
    pub fn covering(q: usize, lo: i64, hi: i64) -> Self {
        let q = q as i64;
        let ceil_div = |a: i64| -(-a).div_euclid(q);
        Self {
            k_min: ceil_div(lo - (q - 1)),
            k_max: ceil_div(hi),
        }
    }

    /// Smallest prior mass of `k ∈ W` over the q symbol values.
    pub fn coverage(&self, q: usize, prior: &PriorTable) -> f64 {
        let qi = q as i64;
        (0..qi)
            .map(|i| prior.mass(i + qi * (self.k_min - 1) + 1, i + qi * self.k_max))
            .fold(f64::INFINITY, f64::min)
    }

    fn union(self, other: Self) -> Self {
        Self {
            k_min: self.k_min.min(other.k_min),
            k_max: self.k_max.max(other.k_max),
        }
    }
}

/// Per-symbol demodulator over the extended constellation.
#[derive(Debug, Clone)]
pub struct DpcDemodulator {
    q: usize,
    sigma2: f64,
    window: DpcWindow,
    /// For each value i of c': (normalized amplitude, P(k | i)).
    points: Vec<Vec<(f64, f64)>>,
}

impl DpcDemodulator {
    /// The window defaults to the minimal one covering the prior support and
    /// is widened, with a warning, if it covers less than [`WINDOW_COVERAGE`].
    pub fn new(q: usize, sigma2: f64, prior: &InterferencePrior, window: Option<DpcWindow>) -> Result<Self> {
        if !(sigma2 > 0.0) {
            return Err(Error::InvalidArgument(format!("noise variance {sigma2} must be positive")));
        }
        let table = prior.table()?;
        let (lo, hi) = table.support();
        let full = DpcWindow::covering(q, lo, hi);
        let window = match window {
            None => full,
            Some(w) if w.k_min <= w.k_max && w.coverage(q, &table) >= WINDOW_COVERAGE => w,
            Some(w) => {
                let widened = w.union(full);
                log::warn!(
                    "DPC window k∈[{}, {}] covers too little prior mass; widened to [{}, {}]",
                    w.k_min,
                    w.k_max,
                    widened.k_min,
                    widened.k_max
                );
                widened
            }
        };
        let mapper = PamMapper::new(q);
        let qi = q as i64;
        let points = (0..qi)
            .map(|i| {
                (window.k_min..=window.k_max)
                    .filter_map(|k| {
                        let w = table.mass(i + qi * (k - 1) + 1, i + qi * k);
                        (w > 0.0).then(|| ((mapper.level(i as Sym) + (qi * k) as f64) / mapper.gamma(), w))
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            q,
            sigma2,
            window,
            points,
        })
    }

    pub fn window(&self) -> DpcWindow {
        self.window
    }

    /// `p(c = a | y)` with the coset value θ removed: `c' = a ⊕ θ`.
    pub fn fill(&self, y: f64, theta: Sym, out: &mut [f64]) {
        let q = self.q;
        let best = self
            .points
            .iter()
            .flatten()
            .map(|&(r, _)| (y - r) * (y - r))
            .fold(f64::INFINITY, f64::min);
        let scale = 1.0 / (2.0 * self.sigma2);
        for (a, o) in out.iter_mut().enumerate() {
            let i = (a + theta as usize) & (q - 1);
            *o = self.points[i]
                .iter()
                .map(|&(r, w)| w * (-((y - r) * (y - r) - best) * scale).exp())
                .sum();
        }
        finish_probs(out);
    }

    pub fn apps(&self, y: &[f64], coset: &[Sym]) -> Vec<f64> {
        let q = self.q;
        let mut out = vec![0.0; y.len() * q];
        for (t, (&yt, &th)) in y.iter().zip(coset).enumerate() {
            self.fill(yt, th, &mut out[t * q..(t + 1) * q]);
        }
        out
    }
}

/// `x_t = (c_t ⊖ s_t) − (q−1)/2`, unnormalized.
pub fn dpc_encode(c: &[Sym], s: &[i64], q: usize) -> Result<Vec<f64>> {
    if c.len() != s.len() {
        return Err(Error::LengthMismatch {
            expected: c.len(),
            actual: s.len(),
        });
    }
    let mapper = PamMapper::new(q);
    let qi = q as i64;
    Ok(c
        .iter()
        .zip(s)
        .map(|(&ct, &st)| mapper.level((ct as i64 - st).rem_euclid(qi) as Sym))
        .collect())
}

/// APP of one received sample (γ units) over the symbol value `c_t`.
pub fn dpc_app(
    y_t: f64,
    sigma2: f64,
    prior: &InterferencePrior,
    q: usize,
    window: Option<DpcWindow>,
    theta: Sym,
) -> Result<ProbVector> {
    let demod = DpcDemodulator::new(q, sigma2, prior, window)?;
    let mut out = vec![0.0; q];
    demod.fill(y_t, theta, &mut out);
    ProbVector::new(out)
}

/// One code graph with interference drawn from `prior` at the transmitter.
/// The receiver demodulates with `receiver_prior` when set (a mismatched
/// receiver), otherwise with `prior`.
#[derive(Debug, Clone)]
pub struct DpcScenario<'g> {
    pub graph: &'g CodeGraph,
    pub prior: InterferencePrior,
    pub receiver_prior: Option<InterferencePrior>,
    pub sigma2: f64,
    pub window: Option<DpcWindow>,
}

impl<'g> DpcScenario<'g> {
    pub fn new(graph: &'g CodeGraph, prior: InterferencePrior, sigma2: f64) -> Result<Self> {
        prior.table()?;
        if !(sigma2 > 0.0) {
            return Err(Error::InvalidArgument(format!("noise variance {sigma2} must be positive")));
        }
        Ok(Self {
            graph,
            prior,
            receiver_prior: None,
            sigma2,
            window: None,
        })
    }

    pub fn demodulator(&self) -> Result<DpcDemodulator> {
        let prior = self.receiver_prior.as_ref().unwrap_or(&self.prior);
        DpcDemodulator::new(self.graph.q(), self.sigma2, prior, self.window)
    }
}

/// One DPC block: codeword (coset not applied), interference, transmitted
/// levels and received samples.
#[derive(Debug, Clone, PartialEq)]
pub struct DpcBlock {
    pub codeword: Vec<Sym>,
    pub interference: Vec<i64>,
    pub transmitted: Vec<f64>,
    pub received: Vec<f64>,
}

pub fn dpc_transmit<R: Rng + ?Sized>(scenario: &DpcScenario, message: &[Sym], rng: &mut R) -> Result<DpcBlock> {
    let g = scenario.graph;
    let q = g.q();
    let table = scenario.prior.table()?;
    let codeword = encode(g, message)?;
    let shifted: Vec<Sym> = codeword.iter().zip(g.coset()).map(|(&c, &t)| g.ring().add(c, t)).collect();
    let interference: Vec<i64> = (0..g.n()).map(|_| table.sample(rng)).collect();
    let transmitted = dpc_encode(&shifted, &interference, q)?;
    let gamma = PamMapper::new(q).gamma();
    let sd = scenario.sigma2.sqrt();
    let received = transmitted
        .iter()
        .zip(&interference)
        .map(|(&x, &s)| {
            let z: f64 = StandardNormal.sample(rng);
            (x + s as f64) / gamma + sd * z
        })
        .collect();
    Ok(DpcBlock {
        codeword,
        interference,
        transmitted,
        received,
    })
}

/// Encode, pre-subtract, transmit, demodulate and decode one message.
pub fn dpc_chain<R: Rng + ?Sized>(
    scenario: &DpcScenario,
    message: &[Sym],
    max_iter: usize,
    rng: &mut R,
) -> Result<DecodeResult> {
    let block = dpc_transmit(scenario, message, rng)?;
    let apps = scenario.demodulator()?.apps(&block.received, scenario.graph.coset());
    Decoder::new(scenario.graph).decode(&apps, max_iter)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bp::channel_app;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn encode_examples() {
        assert_eq!(dpc_encode(&[3], &[1], 4).unwrap(), vec![0.5]);
        assert_eq!(dpc_encode(&[0, 1, 2, 3], &[0; 4], 4).unwrap(), vec![-1.5, -0.5, 0.5, 1.5]);
        assert_eq!(dpc_encode(&[0], &[-5], 4).unwrap(), vec![-0.5]);
    }

    #[test]
    fn zero_interference_is_channel_app() {
        let mapper = PamMapper::new(8);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let y = rng.random_range(-2.0..2.0);
            let s2 = rng.random_range(0.01..1.0);
            let th = rng.random_range(0..8) as Sym;
            let a = dpc_app(y, s2, &InterferencePrior::none(), 8, None, th).unwrap();
            let b = channel_app(y, s2, &mapper, th);
            for (x, z) in a.as_slice().iter().zip(b.as_slice()) {
                assert!((x - z).abs() < 1e-12);
            }
        }
    }

    /// Posterior by enumerating every (c', s) pair directly through the encoder.
    fn joint_oracle(q: usize, y: f64, sigma2: f64, prior: &[(i64, f64)]) -> Vec<f64> {
        let gamma = PamMapper::new(q).gamma();
        let mut p = vec![0.0; q];
        for (c, pc) in p.iter_mut().enumerate() {
            for &(s, ps) in prior {
                let x = dpc_encode(&[c as Sym], &[s], q).unwrap()[0];
                let r = (x + s as f64) / gamma;
                *pc += ps * (-(y - r).powi(2) / (2.0 * sigma2)).exp();
            }
        }
        let t: f64 = p.iter().sum();
        p.iter().map(|x| x / t).collect()
    }

    #[test]
    fn app_matches_joint_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cases: Vec<(usize, InterferencePrior, Vec<(i64, f64)>)> = vec![
            (4, InterferencePrior::pam_default(4), (0..4).map(|s| (s, 0.25)).collect()),
            (4, InterferencePrior::Uniform { lo: -6, hi: 9 }, (-6..=9).map(|s| (s, 1.0 / 16.0)).collect()),
            (
                8,
                InterferencePrior::Pmf {
                    offset: -3,
                    probs: vec![0.1, 0.0, 0.5, 0.2, 0.2],
                },
                vec![(-3, 0.1), (-1, 0.5), (0, 0.2), (1, 0.2)],
            ),
        ];
        for (q, prior, pairs) in cases {
            for _ in 0..100 {
                let y = rng.random_range(-4.0..4.0);
                let s2 = rng.random_range(0.02..1.0);
                let got = dpc_app(y, s2, &prior, q, None, 0).unwrap();
                let want = joint_oracle(q, y, s2, &pairs);
                for (g, w) in got.as_slice().iter().zip(&want) {
                    assert!((g - w).abs() < 1e-9, "{:?} vs {want:?}", got.as_slice());
                }
            }
        }
    }

    #[test]
    fn noiseless_app_picks_nearest_extended_point() {
        let q = 4;
        let gamma = PamMapper::new(q).gamma();
        for r in -9i64..12 {
            let level = r as f64 - 1.5;
            let demod = DpcDemodulator::new(q, 1e-8, &InterferencePrior::Uniform { lo: -12, hi: 12 }, None).unwrap();
            let mut out = vec![0.0; q];
            demod.fill(level / gamma, 0, &mut out);
            let want = (level + 1.5).round().rem_euclid(q as f64) as usize;
            assert!((out[want] - 1.0).abs() < 1e-9, "r={r}: {out:?}");
        }
    }

    #[test]
    fn small_window_is_widened() {
        let prior = InterferencePrior::Uniform { lo: -20, hi: 20 };
        let small = DpcWindow { k_min: 0, k_max: 1 };
        let d = DpcDemodulator::new(4, 0.1, &prior, Some(small)).unwrap();
        let table = prior.table().unwrap();
        assert!(d.window().coverage(4, &table) >= WINDOW_COVERAGE);
        assert_eq!(d.window(), DpcWindow::covering(4, -20, 20));
    }

    #[test]
    fn covering_window_is_minimal() {
        for q in [2usize, 4, 8] {
            for (lo, hi) in [(0, 0), (0, q as i64 - 1), (-7, 13), (5, 5)] {
                let prior = InterferencePrior::Uniform { lo, hi };
                let table = prior.table().unwrap();
                let w = DpcWindow::covering(q, lo, hi);
                assert!((w.coverage(q, &table) - 1.0).abs() < 1e-12);
                let shrunk_lo = DpcWindow { k_min: w.k_min + 1, ..w };
                let shrunk_hi = DpcWindow { k_max: w.k_max - 1, ..w };
                assert!(shrunk_lo.coverage(q, &table) < 1.0 - 1e-12);
                assert!(shrunk_hi.coverage(q, &table) < 1.0 - 1e-12);
            }
        }
    }

    #[test]
    fn gaussian_prior_table() {
        let t = InterferencePrior::DiscreteGaussian { mean: 2.0, std: 3.0 }.table().unwrap();
        assert!((t.mass(i64::MIN / 2, i64::MAX / 2) - 1.0).abs() < 1e-12);
        assert!((t.prob(5) / t.prob(2) - (-0.5f64).exp()).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mean = (0..20000).map(|_| t.sample(&mut rng) as f64).sum::<f64>() / 20000.0;
        assert!((mean - 2.0).abs() < 0.1);
    }
}
