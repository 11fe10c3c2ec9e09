//! Per-index LLR statistics of a batch of messages.

use std::io::Write;

use serde::Serialize;

use super::PROB_FLOOR;
use crate::error::Result;

/// LLRs beyond this magnitude come from floored probabilities.
const SATURATION: f64 = 60.0;

/// Values with |λ| below this count toward the point mass at zero.
pub const ZERO_MASS_WIDTH: f64 = 1e-9;

/// Mean, variance, zero point mass and histogram of λ_1..λ_{q−1}.
#[derive(Debug, Clone, Serialize)]
pub struct LlrStats {
    pub q: usize,
    pub count: usize,
    /// Per index i = 1..q−1, over non-saturated samples.
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    /// Fraction of all samples with |λ_i| < [`ZERO_MASS_WIDTH`].
    pub zero_mass: Vec<f64>,
    /// Samples whose λ_i hit the probability floor; excluded from moments.
    pub saturated: Vec<usize>,
    pub hist_range: (f64, f64),
    /// Densities per index and bin (integrates to the non-saturated fraction).
    pub histogram: Vec<Vec<f64>>,
}

/// Statistics of flat `count·q` probability messages.
pub fn llr_stats(messages: &[f64], q: usize, bins: usize, range: (f64, f64)) -> LlrStats {
    let count = messages.len() / q;
    let dims = q - 1;
    let mut sum = vec![0.0; dims];
    let mut sum2 = vec![0.0; dims];
    let mut kept = vec![0usize; dims];
    let mut zeros = vec![0usize; dims];
    let mut saturated = vec![0usize; dims];
    let mut hist = vec![vec![0usize; bins]; dims];
    let width = (range.1 - range.0) / bins as f64;
    for p in messages.chunks_exact(q) {
        let l0 = p[0].max(PROB_FLOOR).ln();
        for i in 1..q {
            let l = l0 - p[i].max(PROB_FLOOR).ln();
            if l.abs() < ZERO_MASS_WIDTH {
                zeros[i - 1] += 1;
            }
            if l.abs() > SATURATION {
                saturated[i - 1] += 1;
                continue;
            }
            sum[i - 1] += l;
            sum2[i - 1] += l * l;
            kept[i - 1] += 1;
            if l >= range.0 && l < range.1 {
                hist[i - 1][((l - range.0) / width) as usize] += 1;
            }
        }
    }
    let mean: Vec<f64> = (0..dims).map(|i| sum[i] / kept[i].max(1) as f64).collect();
    let variance = (0..dims)
        .map(|i| {
            let k = kept[i].max(1) as f64;
            (sum2[i] / k - mean[i] * mean[i]).max(0.0)
        })
        .collect();
    LlrStats {
        q,
        count,
        mean,
        variance,
        zero_mass: zeros.iter().map(|&z| z as f64 / count.max(1) as f64).collect(),
        saturated,
        hist_range: range,
        histogram: hist
            .into_iter()
            .map(|h| h.into_iter().map(|c| c as f64 / (count.max(1) as f64 * width)).collect())
            .collect(),
    }
}

impl LlrStats {
    /// Largest relative spread (max−min)/mean across the index means.
    pub fn mean_spread(&self) -> f64 {
        let max = self.mean.iter().copied().fold(f64::MIN, f64::max);
        let min = self.mean.iter().copied().fold(f64::MAX, f64::min);
        let avg = self.mean.iter().sum::<f64>() / self.mean.len() as f64;
        (max - min) / avg
    }

    /// CSV with columns `index,bin_lo,bin_hi,density`.
    pub fn write_histogram_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "index,bin_lo,bin_hi,density")?;
        let bins = self.histogram.first().map_or(0, Vec::len);
        let width = (self.hist_range.1 - self.hist_range.0) / bins.max(1) as f64;
        for (i, h) in self.histogram.iter().enumerate() {
            for (b, d) in h.iter().enumerate() {
                let lo = self.hist_range.0 + b as f64 * width;
                writeln!(out, "{},{lo},{},{d}", i + 1, lo + width)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments_and_zero_mass() {
        // λ = (ln 2, 0, ln 4) and (ln 2, 0, 0)
        let msgs = [0.4, 0.2, 0.4, 0.1, 0.25, 0.125, 0.25, 0.375];
        let s = llr_stats(&msgs, 4, 10, (-5.0, 5.0));
        assert_eq!(s.count, 2);
        assert!((s.mean[0] - 2f64.ln()).abs() < 1e-12);
        assert!((s.zero_mass[1] - 1.0).abs() < 1e-12);
        assert!((s.zero_mass[2] - 0.0).abs() < 1e-12);
        assert!(s.variance[0] < 1e-12);
        let mut csv = Vec::new();
        s.write_histogram_csv(&mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 1 + 3 * 10);
    }

    #[test]
    fn one_hot_messages_are_counted_as_saturated() {
        let msgs = [1.0, 0.0, 0.0, 0.0];
        let s = llr_stats(&msgs, 4, 4, (-1.0, 1.0));
        assert_eq!(s.saturated, vec![1, 1, 1]);
        assert_eq!(s.mean, vec![0.0, 0.0, 0.0]);
    }
}
