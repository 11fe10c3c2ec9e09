//! The J-function of jointly consistent Gaussian LLR vectors.
//!
//! An LLR vector conditioned on symbol 0 has components
//! `λ_i = σ²/2 + (σ/√2)(v + w_i)` with v, w_i i.i.d. standard normal: mean
//! σ²/2, variance σ², pairwise covariance σ²/2. `J(σ²)` is its mutual
//! information normalized by log2 q.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Largest tabulated σ; J is 1 to double precision beyond it for q ≤ 256.
pub const SIGMA_MAX: f64 = 14.0;
/// Grid spacing in σ.
pub const SIGMA_STEP: f64 = 0.025;

const TABLE_SEED: u64 = 0x4a5f_7ab1e;

/// Draw `count` consistent LLR vectors (rows of length q−1), flat.
pub fn sample_consistent_llr(sigma2: f64, q: usize, count: usize, rng: &mut impl rand::Rng) -> Vec<f64> {
    let dims = q - 1;
    let mut out = Vec::with_capacity(count * dims);
    let s = (sigma2 / 2.0).sqrt();
    for _ in 0..count {
        let v: f64 = StandardNormal.sample(rng);
        for _ in 0..dims {
            let w: f64 = StandardNormal.sample(rng);
            out.push(sigma2 / 2.0 + s * (v + w));
        }
    }
    out
}

/// Fill `out` (length q) with the probability vector of one consistent LLR
/// draw for true symbol 0. `sigma2 = ∞` gives the one-hot vector.
pub fn consistent_probs(sigma2: f64, rng: &mut impl rand::Rng, out: &mut [f64]) {
    if sigma2.is_infinite() {
        out.fill(0.0);
        out[0] = 1.0;
        crate::bp::finish_probs(out);
        return;
    }
    let s = (sigma2 / 2.0).sqrt();
    let v: f64 = StandardNormal.sample(rng);
    // p_i ∝ exp(−λ_i), shifted by the smallest λ (including λ_0 = 0)
    let mut min = 0.0f64;
    out[0] = 0.0;
    for o in out[1..].iter_mut() {
        let w: f64 = StandardNormal.sample(rng);
        *o = sigma2 / 2.0 + s * (v + w);
        min = min.min(*o);
    }
    for o in out.iter_mut() {
        *o = (min - *o).exp();
    }
    crate::bp::finish_probs(out);
}

/// Mutual information `1 + log_q p_0` of a message whose true symbol is 0.
#[inline]
pub fn mi_of_probs(p: &[f64]) -> f64 {
    1.0 + p[0].max(crate::bp::PROB_FLOOR).ln() / (p.len() as f64).ln()
}

/// Monotone table of J over σ ∈ [0, SIGMA_MAX].
#[derive(Debug, Clone)]
pub struct JTable {
    q: usize,
    sigma: Vec<f64>,
    mi: Vec<f64>,
}

impl JTable {
    /// Tabulate with common random numbers across the grid.
    pub fn build(q: usize, samples: usize) -> Self {
        let dims = q - 1;
        let mut rng = ChaCha8Rng::seed_from_u64(TABLE_SEED ^ q as u64);
        let normals: Vec<f64> = (0..samples * q).map(|_| StandardNormal.sample(&mut rng)).collect();
        let steps = (SIGMA_MAX / SIGMA_STEP).round() as usize;
        let ln_q = (q as f64).ln();
        let mut sigma = Vec::with_capacity(steps + 1);
        let mut mi = Vec::with_capacity(steps + 1);
        for k in 0..=steps {
            let sg = k as f64 * SIGMA_STEP;
            let s2 = sg * sg;
            let a = sg / std::f64::consts::SQRT_2;
            let mut acc = 0.0;
            for row in normals.chunks_exact(q) {
                let v = row[0];
                let mut sum = 1.0;
                for &w in &row[1..=dims] {
                    sum += (-(s2 / 2.0 + a * (v + w))).exp();
                }
                acc += sum.ln();
            }
            sigma.push(sg);
            mi.push(1.0 - acc / samples as f64 / ln_q);
        }
        // enforce J(0) = 0 and strict monotonicity against residual sampling
        // noise; only the saturated top may repeat 1
        mi[0] = 0.0;
        for k in 1..mi.len() {
            mi[k] = mi[k].clamp(0.0, 1.0).max((mi[k - 1] + 1e-12).min(1.0));
        }
        Self { q, sigma, mi }
    }

    /// Shared table for `q`, built on first use.
    pub fn for_q(q: usize) -> Arc<JTable> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<JTable>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(Default::default);
        if let Some(t) = cache.lock().unwrap().get(&q) {
            return t.clone();
        }
        let samples = if q <= 16 { 1 << 16 } else { 1 << 13 };
        let table = Arc::new(JTable::build(q, samples));
        cache.lock().unwrap().entry(q).or_insert(table).clone()
    }

    pub fn q(&self) -> usize {
        self.q
    }

    /// Grid points (σ, J).
    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.sigma.iter().copied().zip(self.mi.iter().copied())
    }

    /// J(σ²), linear in σ between grid points; 1 beyond the grid.
    pub fn j(&self, sigma2: f64) -> f64 {
        if !(sigma2 > 0.0) {
            return 0.0;
        }
        if sigma2.is_infinite() {
            return 1.0;
        }
        let sg = sigma2.sqrt();
        let pos = sg / SIGMA_STEP;
        let k = pos.floor() as usize;
        if k + 1 >= self.sigma.len() {
            return *self.mi.last().unwrap();
        }
        let f = pos - k as f64;
        self.mi[k] * (1.0 - f) + self.mi[k + 1] * f
    }

    /// J^{-1}(I) as σ², by bisection over the table; ∞ for I at or above the top.
    pub fn j_inv(&self, mi: f64) -> f64 {
        if mi <= 0.0 {
            return 0.0;
        }
        let top = *self.mi.last().unwrap();
        if mi >= top {
            return f64::INFINITY;
        }
        let k = self.mi.partition_point(|&x| x < mi);
        // mi[k-1] < mi <= mi[k]
        let (a, b) = (self.mi[k - 1], self.mi[k]);
        let f = (mi - a) / (b - a);
        let sg = self.sigma[k - 1] + f * SIGMA_STEP;
        sg * sg
    }
}

/// J(σ²) for ring size q (Monte-Carlo table).
pub fn j_mi(sigma2: f64, q: usize) -> f64 {
    JTable::for_q(q).j(sigma2)
}

/// J^{-1}(I) for ring size q.
pub fn j_inv(mi: f64, q: usize) -> f64 {
    JTable::for_q(q).j_inv(mi)
}

/// VND transfer `J((d_v − 1)·J^{-1}(I_A))`.
pub fn vnd_exit(i_a: f64, d_v: usize, q: usize) -> f64 {
    let t = JTable::for_q(q);
    if d_v <= 1 {
        return 0.0;
    }
    let s2 = t.j_inv(i_a);
    if s2.is_infinite() {
        return 1.0;
    }
    t.j((d_v - 1) as f64 * s2)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Binary J by 1-D integration: I = 1 − E[log2(1 + e^{−λ})], λ ~ N(σ²/2, σ²).
    fn binary_j_oracle(sigma: f64) -> f64 {
        let s2 = sigma * sigma;
        let (lo, hi, n) = (s2 / 2.0 - 12.0 * sigma, s2 / 2.0 + 12.0 * sigma, 100_000);
        let h = (hi - lo) / n as f64;
        let mut acc = 0.0;
        for i in 0..=n {
            let l = lo + i as f64 * h;
            let pdf = (-(l - s2 / 2.0).powi(2) / (2.0 * s2)).exp() / (2.0 * std::f64::consts::PI * s2).sqrt();
            let f = pdf * (1.0 + (-l).exp()).log2();
            acc += if i == 0 || i == n { 0.5 * f } else { f };
        }
        1.0 - acc * h
    }

    #[test]
    fn sample_statistics() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s2 = 4.0;
        let x = sample_consistent_llr(s2, 4, 100_000, &mut rng);
        let n = 100_000.0;
        let mean: Vec<f64> = (0..3).map(|i| x.iter().skip(i).step_by(3).sum::<f64>() / n).collect();
        let cov = |i: usize, j: usize| {
            x.chunks(3).map(|r| (r[i] - mean[i]) * (r[j] - mean[j])).sum::<f64>() / n
        };
        for i in 0..3 {
            assert!((mean[i] - 2.0).abs() < 0.04, "{mean:?}");
            assert!((cov(i, i) - 4.0).abs() < 0.08);
        }
        assert!((cov(0, 1) - 2.0).abs() < 0.06);
        assert!(sample_consistent_llr(0.0, 4, 10, &mut rng).iter().all(|&l| l == 0.0));
    }

    #[test]
    fn binary_table_matches_integral() {
        let t = JTable::for_q(2);
        // J^{-1}(0.5) = 2.0435² by the integral; σ = 1.6363 gives 0.365
        assert!((t.j(2.0435f64.powi(2)) - 0.5).abs() < 0.01);
        assert!((t.j(1.6363f64.powi(2)) - 0.365).abs() < 0.01);
        for sg in [0.5, 1.0, 1.6363, 2.0, 3.0, 5.0] {
            assert!((t.j(sg * sg) - binary_j_oracle(sg)).abs() < 0.005, "σ={sg}");
        }
    }

    #[test]
    fn inverse_consistency_and_endpoints() {
        for q in [2usize, 4, 8] {
            let t = JTable::for_q(q);
            assert_eq!(t.j(0.0), 0.0);
            assert_eq!(t.j_inv(0.0), 0.0);
            assert!(t.j_inv(1.0).is_infinite());
            let mut prev = 0.0;
            for (_, i) in t.points() {
                assert!(i > prev || i == 0.0 || i == 1.0);
                prev = i;
            }
            for k in 0..=39 {
                let sg = 0.2 + k as f64 * 0.2;
                let s2 = sg * sg;
                let i = t.j(s2);
                if i < 0.999 {
                    let back = t.j_inv(i);
                    assert!((back - s2).abs() / s2 < 0.01, "q={q} σ={sg}: {back} vs {s2}");
                }
            }
        }
    }

    #[test]
    fn grid_refinement_changes_little() {
        // halving the grid step moves interpolated values by < 1e-3
        let t = JTable::for_q(4);
        for k in 0..200 {
            let sg = 0.013 + k as f64 * 0.05;
            let lo = (sg / SIGMA_STEP).floor() * SIGMA_STEP;
            let mid = lo + SIGMA_STEP / 2.0;
            let interp = t.j(mid * mid);
            let avg = 0.5 * (t.j(lo * lo) + t.j((lo + SIGMA_STEP).powi(2)));
            assert!((interp - avg).abs() < 1e-3);
        }
    }

    #[test]
    fn vnd_examples() {
        assert_eq!(vnd_exit(0.7, 1, 4), 0.0);
        assert_eq!(vnd_exit(0.0, 5, 4), 0.0);
        let t = JTable::for_q(4);
        let expect = t.j(2.0 * t.j_inv(0.5));
        assert!((vnd_exit(0.5, 3, 4) - expect).abs() < 1e-12);
        assert!(vnd_exit(0.5, 3, 4) > 0.5);
        assert!((vnd_exit(0.5, 2, 4) - 0.5).abs() < 1e-9);
    }

    #[test]
    fn consistent_probs_match_llr_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = JTable::for_q(4);
        let s2 = t.j_inv(0.6);
        let mut p = [0.0; 4];
        let n = 40_000;
        let mut acc = 0.0;
        for _ in 0..n {
            consistent_probs(s2, &mut rng, &mut p);
            acc += mi_of_probs(&p);
        }
        assert!((acc / n as f64 - 0.6).abs() < 0.01);
        consistent_probs(f64::INFINITY, &mut rng, &mut p);
        assert!(mi_of_probs(&p) > 1.0 - 1e-12);
    }
}
