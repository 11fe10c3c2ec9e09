//! Mutual-information limits for PAM signaling over real AWGN.
//!
//! SNR convention: unit symbol energy per real dimension, so the noise
//! variance is `σ² = 10^(−snr/10)`.

use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::GaussHermite;

use crate::codec::PamMapper;
use crate::error::{Error, Result};

/// Gauss–Hermite nodes used by the quadrature evaluators.
pub const QUADRATURE_NODES: usize = 160;

/// Reported for a zero-rate threshold.
pub const THRESHOLD_NEG_INF: f64 = f64::NEG_INFINITY;

const BISECTION_RANGE: (f64, f64) = (-40.0, 80.0);

pub fn snr_to_sigma2(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}

pub fn sigma2_to_snr(sigma2: f64) -> f64 {
    -10.0 * sigma2.log10()
}

fn rule(nodes: usize) -> &'static GaussHermite {
    static DEFAULT: OnceLock<GaussHermite> = OnceLock::new();
    if nodes == QUADRATURE_NODES {
        DEFAULT.get_or_init(|| GaussHermite::new(NonZeroUsize::new(QUADRATURE_NODES).unwrap()))
    } else {
        Box::leak(Box::new(GaussHermite::new(NonZeroUsize::new(nodes.max(1)).unwrap())))
    }
}

/// A noiseless received point with a discrete label and prior weight.
#[derive(Debug, Clone, Copy)]
pub struct LabeledPoint {
    pub amplitude: f64,
    pub label: usize,
    pub weight: f64,
}

/// `−log2 p(label | y)` for a received value, safe deep in the tails.
fn label_surprise(points: &[LabeledPoint], y: f64, sigma2: f64, label: usize) -> f64 {
    let mut best = f64::INFINITY;
    let mut best_label = f64::INFINITY;
    for p in points {
        let d = (y - p.amplitude).powi(2);
        best = best.min(d);
        if p.label == label {
            best_label = best_label.min(d);
        }
    }
    let mut total = 0.0;
    let mut own = 0.0;
    for p in points {
        let d = (y - p.amplitude).powi(2);
        total += p.weight * (-(d - best) / (2.0 * sigma2)).exp();
        if p.label == label {
            own += p.weight * (-(d - best_label) / (2.0 * sigma2)).exp();
        }
    }
    total.log2() - own.log2() + (best_label - best) / (2.0 * sigma2 * std::f64::consts::LN_2)
}

fn label_entropy(points: &[LabeledPoint], labels: usize) -> f64 {
    let mut mass = vec![0.0; labels];
    let total: f64 = points.iter().map(|p| p.weight).sum();
    for p in points {
        mass[p.label] += p.weight / total;
    }
    mass.iter().filter(|&&m| m > 0.0).map(|m| -m * m.log2()).sum()
}

/// I(label; y) by Gauss–Hermite quadrature over the noise of each point.
pub fn labeled_mi(points: &[LabeledPoint], sigma2: f64, nodes: usize) -> f64 {
    let labels = points.iter().map(|p| p.label).max().map_or(0, |l| l + 1);
    let total: f64 = points.iter().map(|p| p.weight).sum();
    let gh = rule(nodes);
    let scale = (2.0 * sigma2).sqrt();
    let mut cond = 0.0;
    for p in points {
        let e = gh.integrate(|u| label_surprise(points, p.amplitude + scale * u, sigma2, p.label));
        cond += p.weight / total * e / std::f64::consts::PI.sqrt();
    }
    (label_entropy(points, labels) - cond).max(0.0)
}

/// I(label; y) by composite Simpson integration over y (independent oracle).
pub fn labeled_mi_dense(points: &[LabeledPoint], sigma2: f64, steps: usize) -> f64 {
    let labels = points.iter().map(|p| p.label).max().map_or(0, |l| l + 1);
    let total: f64 = points.iter().map(|p| p.weight).sum();
    let sigma = sigma2.sqrt();
    let lo = points.iter().map(|p| p.amplitude).fold(f64::INFINITY, f64::min) - 14.0 * sigma;
    let hi = points.iter().map(|p| p.amplitude).fold(f64::NEG_INFINITY, f64::max) + 14.0 * sigma;
    let steps = steps + steps % 2;
    let h = (hi - lo) / steps as f64;
    let norm = 1.0 / (2.0 * std::f64::consts::PI * sigma2).sqrt();
    let mut acc = 0.0;
    for i in 0..=steps {
        let y = lo + i as f64 * h;
        let w = if i == 0 || i == steps { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
        let mut f = 0.0;
        for p in points {
            let dens = norm * (-(y - p.amplitude).powi(2) / (2.0 * sigma2)).exp();
            if dens > 0.0 {
                f += p.weight / total * dens * label_surprise(points, y, sigma2, p.label);
            }
        }
        acc += w * f;
    }
    (label_entropy(points, labels) - acc * h / 3.0).max(0.0)
}

fn pam_points(q: usize) -> Vec<LabeledPoint> {
    let m = PamMapper::new(q);
    (0..q)
        .map(|i| LabeledPoint {
            amplitude: m.point(i as u8),
            label: i,
            weight: 1.0,
        })
        .collect()
}

/// Points of a superposition `Σ h_i·x_i` of unit-power q-PAM users,
/// labeled by `⊕ α_i c_i`.
fn combination_points(q: usize, gains: &[f64], alpha: &[usize]) -> Vec<LabeledPoint> {
    let m = PamMapper::new(q);
    let total = q.pow(gains.len() as u32);
    (0..total)
        .map(|idx| {
            let (mut rest, mut amplitude, mut label) = (idx, 0.0, 0);
            for (&h, &a) in gains.iter().zip(alpha) {
                let c = rest % q;
                rest /= q;
                amplitude += h * m.point(c as u8);
                label = (label + a * c) % q;
            }
            LabeledPoint {
                amplitude,
                label,
                weight: 1.0,
            }
        })
        .collect()
}

fn cf_points(q: usize) -> Vec<LabeledPoint> {
    combination_points(q, &[1.0, 1.0], &[1, 1])
}

/// Mutual information of uniform q-PAM over AWGN, in bits per real symbol.
pub fn pam_capacity(q: usize, snr_db: f64) -> f64 {
    labeled_mi(&pam_points(q), snr_to_sigma2(snr_db), QUADRATURE_NODES)
}

pub fn pam_capacity_dense(q: usize, snr_db: f64) -> f64 {
    labeled_mi_dense(&pam_points(q), snr_to_sigma2(snr_db), 40_000)
}

/// I(c'_1 ⊕ c'_2; y) for two unit-power q-PAM users with unit gains.
pub fn cf_mutual_information(q: usize, snr_db: f64) -> f64 {
    labeled_mi(&cf_points(q), snr_to_sigma2(snr_db), QUADRATURE_NODES)
}

pub fn cf_mutual_information_dense(q: usize, snr_db: f64) -> f64 {
    labeled_mi_dense(&cf_points(q), snr_to_sigma2(snr_db), 40_000)
}

/// I(⊕ α_i c_i; y) for `y = Σ h_i·x_i + z` with uniform q-PAM users.
pub fn combination_mi(q: usize, gains: &[f64], alpha: &[usize], snr_db: f64) -> Result<f64> {
    check_combination(q, gains, alpha)?;
    Ok(labeled_mi(&combination_points(q, gains, alpha), snr_to_sigma2(snr_db), QUADRATURE_NODES))
}

/// SNR (dB) at which [`combination_mi`] reaches `rate`.
pub fn combination_threshold(q: usize, gains: &[f64], alpha: &[usize], rate: f64) -> Result<f64> {
    check_combination(q, gains, alpha)?;
    let points = combination_points(q, gains, alpha);
    let top = label_entropy(&points, q);
    threshold_by_bisection(rate, top, |s| labeled_mi(&points, snr_to_sigma2(s), QUADRATURE_NODES))
}

fn check_combination(q: usize, gains: &[f64], alpha: &[usize]) -> Result<()> {
    if gains.len() != alpha.len() {
        return Err(Error::LengthMismatch {
            expected: gains.len(),
            actual: alpha.len(),
        });
    }
    if gains.is_empty() || q.checked_pow(gains.len() as u32).is_none_or(|n| n > 1 << 16) {
        return Err(Error::EnumerationBound(format!("{} users over Z_{q}", gains.len())));
    }
    Ok(())
}

/// Smallest SNR (dB) at which a nondecreasing `mi` reaches `rate`.
pub fn threshold_by_bisection(rate: f64, max_rate: f64, mi: impl Fn(f64) -> f64) -> Result<f64> {
    if !(rate >= 0.0) || rate >= max_rate {
        return Err(Error::InvalidArgument(format!(
            "rate {rate} outside [0, {max_rate})"
        )));
    }
    if rate == 0.0 {
        return Ok(THRESHOLD_NEG_INF);
    }
    let (mut lo, mut hi) = BISECTION_RANGE;
    if mi(lo) >= rate {
        return Ok(THRESHOLD_NEG_INF);
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if mi(mid) >= rate {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// SNR (dB) at which uniform q-PAM reaches `rate` bits per symbol.
pub fn capacity_threshold(q: usize, rate: f64) -> Result<f64> {
    threshold_by_bisection(rate, (q as f64).log2(), |s| pam_capacity(q, s))
}

/// SNR (dB) at which the two-user combination MI reaches `rate`.
pub fn cf_threshold(q: usize, rate: f64) -> Result<f64> {
    threshold_by_bisection(rate, (q as f64).log2(), |s| cf_mutual_information(q, s))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// BPSK MI by trapezoid integration of the textbook integral.
    fn bpsk_mi_oracle(snr_db: f64) -> f64 {
        let s2 = snr_to_sigma2(snr_db);
        let s = s2.sqrt();
        let (lo, hi, n) = (-1.0 - 15.0 * s, 1.0 + 15.0 * s, 200_000);
        let h = (hi - lo) / n as f64;
        let mut acc = 0.0;
        for i in 0..=n {
            let y: f64 = lo + i as f64 * h;
            let p1 = (-(y - 1.0).powi(2) / (2.0 * s2)).exp() / (2.0 * std::f64::consts::PI * s2).sqrt();
            let f = p1 * (2.0 / (1.0 + (-2.0 * y / s2).exp())).log2();
            acc += if i == 0 || i == n { 0.5 * f } else { f };
        }
        acc * h
    }

    #[test]
    fn snr_conversion() {
        assert_eq!(snr_to_sigma2(0.0), 1.0);
        assert!((snr_to_sigma2(10.0) - 0.1).abs() < 1e-15);
        for s in [-3.0, 0.0, 7.5] {
            assert!((sigma2_to_snr(snr_to_sigma2(s)) - s).abs() < 1e-12);
        }
    }

    #[test]
    fn capacity_limits() {
        assert!(pam_capacity(4, -40.0) < 1e-3);
        assert!((pam_capacity(4, 60.0) - 2.0).abs() < 1e-9);
        assert!((pam_capacity(8, 70.0) - 3.0).abs() < 1e-9);
    }

    #[test]
    fn bpsk_matches_textbook_integral() {
        for snr in [-5.0, 0.0, 5.0] {
            let a = pam_capacity(2, snr);
            let b = bpsk_mi_oracle(snr);
            assert!((a - b).abs() < 1e-4, "{snr}: {a} vs {b}");
        }
    }

    #[test]
    fn quadrature_is_stable_and_agrees_with_dense() {
        for q in [2usize, 4, 8, 16] {
            for snr in [-2.0, 5.0, 12.0, 20.0] {
                let a = labeled_mi(&pam_points(q), snr_to_sigma2(snr), QUADRATURE_NODES);
                let b = labeled_mi(&pam_points(q), snr_to_sigma2(snr), 2 * QUADRATURE_NODES);
                assert!((a - b).abs() <= 1e-6 * a.max(1e-3), "q={q} snr={snr}: {a} vs {b}");
                let d = pam_capacity_dense(q, snr);
                assert!((a - d).abs() < 1e-5, "q={q} snr={snr}: {a} vs dense {d}");
            }
        }
    }

    #[test]
    fn thresholds() {
        let t = capacity_threshold(4, 1.0).unwrap();
        let td = threshold_by_bisection(1.0, 2.0, |s| pam_capacity_dense(4, s)).unwrap();
        assert!((t - td).abs() < 0.01, "{t} vs {td}");
        assert!(capacity_threshold(4, 0.5).unwrap() < t);
        assert!(capacity_threshold(4, 1.5).unwrap() > t);
        assert_eq!(capacity_threshold(4, 0.0).unwrap(), THRESHOLD_NEG_INF);
        assert!(capacity_threshold(4, 2.0).is_err());
        let c = cf_threshold(4, 1.0).unwrap();
        let cd = threshold_by_bisection(1.0, 2.0, |s| cf_mutual_information_dense(4, s)).unwrap();
        assert!((c - cd).abs() < 0.01 && c > t);
        let g = combination_threshold(4, &[1.0, 1.0], &[1, 1], 1.0).unwrap();
        assert!((g - c).abs() < 1e-9);
    }

    #[test]
    fn single_user_combination_is_pam() {
        let a = combination_mi(8, &[1.0], &[1], 6.0).unwrap();
        assert!((a - pam_capacity(8, 6.0)).abs() < 1e-12);
        // α = 2 over Z_4 only reveals one bit
        let b = combination_mi(4, &[1.0], &[2], 40.0).unwrap();
        assert!((b - 1.0).abs() < 1e-9);
    }
}
