//! Check-node-decoder (CND) transfer by simulation of accumulator chains.
//!
//! A chain holds `length` check nodes joined by the accumulator: check t
//! has its combiner edges (interleaver side), the edge to parity t−1
//! (multiplier g'_t, absent for t = 0) and the edge to parity t
//! (multiplier g''_t). All symbols are zero. Combiner inputs are drawn from
//! the consistent Gaussian model at `σ² = J^{-1}(I_A)`, parity symbols carry
//! channel APPs from an [`AppSource`]. The chain is a tree given the
//! combiner inputs, so one forward and one backward sweep give the exact
//! accumulator messages; a final pass emits the combiner outputs.

use std::collections::BTreeMap;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::j::{consistent_probs, j_inv, mi_of_probs};
use crate::bp::{channel_app_into, finish_probs, CheckKernel, PROB_FLOOR};
use crate::codec::PamMapper;
use crate::error::{Error, Result};
use crate::graph::{largest_remainder, stratified_multipliers};
use crate::profile::MultiplierDistribution;
use crate::ring::{RingParams, Sym};

/// Source of parity-symbol APPs for a transmitted zero symbol.
pub trait AppSource: Sync {
    fn q(&self) -> usize;
    /// Fill `out` (length q) with the APP of one parity symbol whose value is 0.
    fn sample(&self, rng: &mut ChaCha8Rng, out: &mut [f64]);
}

/// Single-user q-PAM over AWGN with a uniform coset symbol.
#[derive(Debug, Clone)]
pub struct AwgnSource {
    mapper: PamMapper,
    sigma2: f64,
}

impl AwgnSource {
    pub fn new(q: usize, sigma2: f64) -> Self {
        Self {
            mapper: PamMapper::new(q),
            sigma2,
        }
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }
}

impl AppSource for AwgnSource {
    fn q(&self) -> usize {
        self.mapper.q()
    }

    fn sample(&self, rng: &mut ChaCha8Rng, out: &mut [f64]) {
        use rand::Rng;
        use rand_distr::{Distribution, StandardNormal};
        let q = self.mapper.q();
        let theta = rng.random_range(0..q) as Sym;
        let z: f64 = StandardNormal.sample(rng);
        let y = self.mapper.point(theta) + self.sigma2.sqrt() * z;
        channel_app_into(y, self.sigma2, &self.mapper, theta, out);
    }
}

/// Size and seeding of a chain simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChainOptions {
    /// Check nodes per chain.
    pub length: usize,
    /// Number of independent chains.
    pub chains: usize,
    pub seed: u64,
    /// Keep every combiner output message (for LLR statistics).
    pub keep_outputs: bool,
}

impl Default for ChainOptions {
    fn default() -> Self {
        Self {
            length: 1000,
            chains: 16,
            seed: 1,
            keep_outputs: false,
        }
    }
}

impl ChainOptions {
    /// Enough chains for about `samples` combiner outputs at mean degree `mean_dc`.
    pub fn for_samples(samples: usize, mean_dc: f64, seed: u64) -> Self {
        let length = 1000;
        let per_chain = (length as f64 * mean_dc).max(1.0);
        Self {
            length,
            chains: ((samples as f64 / per_chain).ceil() as usize).max(1),
            seed,
            keep_outputs: false,
        }
    }
}

/// Accumulated combiner-output statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainOutput {
    pub q: usize,
    /// Per check degree: (Σ MI, output count).
    pub by_degree: BTreeMap<usize, (f64, usize)>,
    /// Σ λ_j by (multiplier type r, index type s), row-major T×T.
    pub theta_sum: Vec<f64>,
    pub theta_count: Vec<usize>,
    /// Output messages (flat) when requested, with their multipliers.
    pub outputs: Vec<f64>,
    pub output_multipliers: Vec<Sym>,
    types: usize,
}

impl ChainOutput {
    fn new(q: usize, types: usize) -> Self {
        Self {
            q,
            by_degree: BTreeMap::new(),
            theta_sum: vec![0.0; types * types],
            theta_count: vec![0; types * types],
            outputs: Vec::new(),
            output_multipliers: Vec::new(),
            types,
        }
    }

    fn merge(mut self, other: Self) -> Self {
        for (d, (s, c)) in other.by_degree {
            let e = self.by_degree.entry(d).or_insert((0.0, 0));
            e.0 += s;
            e.1 += c;
        }
        for (a, b) in self.theta_sum.iter_mut().zip(&other.theta_sum) {
            *a += b;
        }
        for (a, b) in self.theta_count.iter_mut().zip(&other.theta_count) {
            *a += b;
        }
        self.outputs.extend(other.outputs);
        self.output_multipliers.extend(other.output_multipliers);
        self
    }

    /// Average MI over all combiner outputs.
    pub fn mutual_information(&self) -> f64 {
        let (s, c) = self.by_degree.values().fold((0.0, 0), |(s, c), &(a, b)| (s + a, c + b));
        s / c.max(1) as f64
    }

    /// Average MI per check degree.
    pub fn mi_by_degree(&self) -> BTreeMap<usize, f64> {
        self.by_degree.iter().map(|(&d, &(s, c))| (d, s / c.max(1) as f64)).collect()
    }

    pub fn num_types(&self) -> usize {
        self.types
    }

    /// Θ entry: mean λ_j over outputs with multiplier type r, index type s.
    /// Rows without samples are zero.
    pub fn theta(&self, r: usize, s: usize) -> f64 {
        let k = r * self.types + s;
        if self.theta_count[k] == 0 {
            0.0
        } else {
            self.theta_sum[k] / self.theta_count[k] as f64
        }
    }
}

/// Check-degree composition and multipliers of the simulated chains.
#[derive(Debug, Clone)]
pub struct ChainModel {
    ring: RingParams,
    /// Check degrees of one chain before shuffling.
    degree_list: Vec<usize>,
    multipliers: MultiplierDistribution,
}

impl ChainModel {
    /// `cn_node_fractions` are node-perspective check-degree fractions.
    pub fn new(
        ring: &RingParams,
        cn_node_fractions: &BTreeMap<usize, f64>,
        multipliers: &MultiplierDistribution,
        length: usize,
    ) -> Result<Self> {
        if multipliers.q() != ring.q() {
            return Err(Error::LengthMismatch {
                expected: ring.q(),
                actual: multipliers.q(),
            });
        }
        let degs: Vec<usize> = cn_node_fractions.keys().copied().collect();
        let weights: Vec<f64> = cn_node_fractions.values().copied().collect();
        if degs.is_empty() || degs.contains(&0) || weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::InvalidProfile("check-degree fractions must be nonnegative over degrees ≥ 1".into()));
        }
        for &d in &degs {
            if multipliers.element_probs(d).is_none() {
                return Err(Error::InvalidProfile(format!("no multiplier row for check degree {d}")));
            }
        }
        let counts = largest_remainder(&weights, length);
        let mut degree_list = Vec::with_capacity(length);
        for (&d, &c) in degs.iter().zip(&counts) {
            degree_list.extend(std::iter::repeat_n(d, c));
        }
        Ok(Self {
            ring: ring.clone(),
            degree_list,
            multipliers: multipliers.clone(),
        })
    }

    /// Chains whose check nodes all have degree `d_c`.
    pub fn single_degree(ring: &RingParams, d_c: usize, multipliers: &MultiplierDistribution, length: usize) -> Result<Self> {
        Self::new(ring, &BTreeMap::from([(d_c, 1.0)]), multipliers, length)
    }

    pub fn length(&self) -> usize {
        self.degree_list.len()
    }

    pub fn mean_degree(&self) -> f64 {
        self.degree_list.iter().sum::<usize>() as f64 / self.length().max(1) as f64
    }

    /// Simulate chains at a-priori MI `i_a` and merge their statistics.
    /// Results depend only on the options, not on the worker count.
    pub fn simulate(&self, i_a: f64, source: &dyn AppSource, opts: &ChainOptions) -> Result<ChainOutput> {
        if source.q() != self.ring.q() {
            return Err(Error::LengthMismatch {
                expected: self.ring.q(),
                actual: source.q(),
            });
        }
        if !(0.0..=1.0).contains(&i_a) {
            return Err(Error::InvalidArgument(format!("a-priori MI {i_a} outside [0, 1]")));
        }
        if opts.length != self.length() {
            return Err(Error::InvalidArgument(format!(
                "chain length {} differs from the model's {}",
                opts.length,
                self.length()
            )));
        }
        let sigma2 = j_inv(i_a, self.ring.q());
        let empty = ChainOutput::new(self.ring.q(), self.ring.num_types());
        let out = (0..opts.chains)
            .into_par_iter()
            .map(|c| self.run_chain(sigma2, source, opts, c as u64))
            .collect::<Vec<_>>()
            .into_iter()
            .fold(empty, ChainOutput::merge);
        Ok(out)
    }

    fn run_chain(&self, sigma2: f64, source: &dyn AppSource, opts: &ChainOptions, index: u64) -> ChainOutput {
        let ring = &self.ring;
        let q = ring.q();
        let len = self.length();
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        rng.set_stream(index);

        let mut degs = self.degree_list.clone();
        degs.shuffle(&mut rng);
        let mut offsets = Vec::with_capacity(len + 1);
        offsets.push(0usize);
        for &d in &degs {
            offsets.push(offsets.last().unwrap() + d);
        }
        let edges = offsets[len];
        let mut h = vec![0 as Sym; edges];
        let mut distinct = degs.clone();
        distinct.sort_unstable();
        distinct.dedup();
        for &d in &distinct {
            let row = self.multipliers.element_probs(d).unwrap();
            let checks: Vec<usize> = (0..len).filter(|&t| degs[t] == d).collect();
            let mults = stratified_multipliers(ring, row, d, checks.len(), &mut rng);
            for (i, &t) in checks.iter().enumerate() {
                h[offsets[t]..offsets[t] + d].copy_from_slice(&mults[i * d..(i + 1) * d]);
            }
        }
        let regular = ring.regular_elements();
        let g_prev: Vec<Sym> = (0..len).map(|_| *regular.choose(&mut rng).unwrap()).collect();
        let g_cur: Vec<Sym> = (0..len).map(|_| *regular.choose(&mut rng).unwrap()).collect();

        let mut apps = vec![0.0; len * q];
        for a in apps.chunks_exact_mut(q) {
            source.sample(&mut rng, a);
        }
        let mut comb = vec![0.0; edges * q];
        for c in comb.chunks_exact_mut(q) {
            consistent_probs(sigma2, &mut rng, c);
        }

        let mut kernel = CheckKernel::new(ring);
        let mut inp: Vec<f64> = Vec::new();
        let mut mul: Vec<Sym> = Vec::new();
        let mut outp: Vec<f64> = Vec::new();
        let mut msg = vec![0.0; q];
        let uniform = vec![1.0 / q as f64; q];
        let product = |a: &[f64], b: &[f64], out: &mut [f64]| {
            for k in 0..q {
                out[k] = a[k] * b[k];
            }
            finish_probs(out);
        };

        // fwd[t]: check t → parity t, given checks 0..=t.
        let mut fwd = vec![0.0; len * q];
        for t in 0..len {
            inp.clear();
            mul.clear();
            inp.extend_from_slice(&comb[offsets[t] * q..offsets[t + 1] * q]);
            mul.extend_from_slice(&h[offsets[t]..offsets[t + 1]]);
            if t > 0 {
                product(&apps[(t - 1) * q..t * q], &fwd[(t - 1) * q..t * q], &mut msg);
                inp.extend_from_slice(&msg);
                mul.push(g_prev[t]);
            }
            inp.extend_from_slice(&uniform);
            mul.push(g_cur[t]);
            outp.resize(inp.len(), 0.0);
            kernel.update_all(&inp, &mul, &mut outp);
            fwd[t * q..(t + 1) * q].copy_from_slice(&outp[outp.len() - q..]);
        }

        // bwd[t]: check t+1 → parity t, given checks t+1..len.
        let mut bwd = vec![1.0 / q as f64; len * q];
        for t in (0..len.saturating_sub(1)).rev() {
            let u = t + 1;
            inp.clear();
            mul.clear();
            inp.extend_from_slice(&comb[offsets[u] * q..offsets[u + 1] * q]);
            mul.extend_from_slice(&h[offsets[u]..offsets[u + 1]]);
            product(&apps[u * q..(u + 1) * q], &bwd[u * q..(u + 1) * q], &mut msg);
            inp.extend_from_slice(&msg);
            mul.push(g_cur[u]);
            inp.extend_from_slice(&uniform);
            mul.push(g_prev[u]);
            outp.resize(inp.len(), 0.0);
            kernel.update_all(&inp, &mul, &mut outp);
            bwd[t * q..(t + 1) * q].copy_from_slice(&outp[outp.len() - q..]);
        }

        let types = ring.num_types();
        let mut out = ChainOutput::new(q, types);
        let index_type: Vec<usize> = (0..q).map(|j| if j == 0 { 0 } else { ring.type_index(j as Sym) }).collect();
        for t in 0..len {
            let d = degs[t];
            inp.clear();
            mul.clear();
            inp.extend_from_slice(&comb[offsets[t] * q..offsets[t + 1] * q]);
            mul.extend_from_slice(&h[offsets[t]..offsets[t + 1]]);
            if t > 0 {
                product(&apps[(t - 1) * q..t * q], &fwd[(t - 1) * q..t * q], &mut msg);
                inp.extend_from_slice(&msg);
                mul.push(g_prev[t]);
            }
            product(&apps[t * q..(t + 1) * q], &bwd[t * q..(t + 1) * q], &mut msg);
            inp.extend_from_slice(&msg);
            mul.push(g_cur[t]);
            outp.resize(inp.len(), 0.0);
            kernel.update_all(&inp, &mul, &mut outp);

            let entry = out.by_degree.entry(d).or_insert((0.0, 0));
            for e in 0..d {
                let l = &outp[e * q..(e + 1) * q];
                entry.0 += mi_of_probs(l);
                entry.1 += 1;
                let r = ring.type_index(mul[e]);
                let l0 = l[0].max(PROB_FLOOR).ln();
                for j in 1..q {
                    let k = r * types + index_type[j];
                    out.theta_sum[k] += l0 - l[j].max(PROB_FLOOR).ln();
                    out.theta_count[k] += 1;
                }
            }
            if opts.keep_outputs {
                out.outputs.extend_from_slice(&outp[..d * q]);
                out.output_multipliers.extend_from_slice(&mul[..d]);
            }
        }
        out
    }
}

/// CND transfer for check degree `d_c` at a-priori MI `i_a`, with parity
/// APPs from q-PAM over AWGN at noise variance `sigma2`. `samples` is the
/// approximate number of combiner outputs averaged.
pub fn cnd_exit(
    i_a: f64,
    d_c: usize,
    sigma2: f64,
    multipliers: &MultiplierDistribution,
    q: usize,
    samples: usize,
) -> Result<f64> {
    let ring = RingParams::from_modulus(q)?;
    let opts = ChainOptions::for_samples(samples, d_c as f64, 1);
    let model = ChainModel::single_degree(&ring, d_c, multipliers, opts.length)?;
    Ok(model.simulate(i_a, &AwgnSource::new(q, sigma2), &opts)?.mutual_information())
}

/// Closed-form CND transfer at `I_A = 1`: `(1/m)·Σ_j p̃_j log2 M0(Ω_j)`.
pub fn cnd_exit_at_one(ring: &RingParams, type_masses: &[f64]) -> f64 {
    let m = ring.m() as f64;
    ring.types()
        .iter()
        .zip(type_masses)
        .map(|(t, &p)| p * (ring.zero_multiplier(t.members[0]).unwrap() as f64).log2())
        .sum::<f64>()
        / m
}

/// Initial MI of a degree-2 check whose output multiplier has type `j`
/// (additive order `m_j`), with uniform combiner input and two channel APPs
/// on the accumulator edges: `E[log_q Σ_{i<q/m_j} Fp[i·m_j]]`, where `Fp` is
/// the DFT of the product of the two (multiplier-permuted) channel APP
/// transforms. Monte-Carlo over channel noise and regular accumulator
/// multipliers.
pub fn initial_mi_degree2(m_j: usize, sigma2: f64, q: usize, samples: usize, seed: u64) -> Result<f64> {
    use num_complex::Complex64;
    let ring = RingParams::from_modulus(q)?;
    if m_j == 0 || m_j > q || !m_j.is_power_of_two() {
        return Err(Error::InvalidArgument(format!("order {m_j} is not a divisor of {q}")));
    }
    let source = AwgnSource::new(q, sigma2);
    let fft = crate::bp::Fft::new(q);
    let regular = ring.regular_elements();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = vec![0.0; q];
    let mut a = vec![Complex64::default(); q];
    let mut b = vec![Complex64::default(); q];
    let ln_q = (q as f64).ln();
    let mut acc = 0.0;
    for _ in 0..samples {
        for buf in [&mut a, &mut b] {
            source.sample(&mut rng, &mut p);
            let g = *regular.choose(&mut rng).unwrap();
            let row = ring.mul_row(g);
            buf.fill(Complex64::default());
            for (x, &v) in p.iter().enumerate() {
                buf[row[x] as usize].re += v;
            }
            fft.forward(buf);
        }
        // distribution of g'c' + g''c'' (convolution), still in transform domain
        for (x, y) in a.iter_mut().zip(&b) {
            *x *= y;
        }
        fft.inverse(&mut a);
        let step = q / m_j;
        let mass: f64 = (0..m_j).map(|i| a[i * step].re).sum();
        // mass of the subgroup of order m_j relative to uniform
        acc += (mass.max(PROB_FLOOR) * step as f64).ln() / ln_q;
    }
    Ok(acc / samples as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bp::cn_update_bruteforce;
    use crate::sim::snr_to_sigma2;
    use rand::Rng;

    fn opts(chains: usize, seed: u64) -> ChainOptions {
        ChainOptions {
            length: 1000,
            chains,
            seed,
            keep_outputs: false,
        }
    }

    #[test]
    fn full_prior_reaches_closed_form() {
        let ring = RingParams::from_modulus(8).unwrap();
        let src = AwgnSource::new(8, snr_to_sigma2(10.0));
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..4 {
            let mut masses: Vec<f64> = (0..3).map(|_| rng.random::<f64>()).collect();
            masses[0] += 0.3;
            let s: f64 = masses.iter().sum();
            masses.iter_mut().for_each(|m| *m /= s);
            let dc = rng.random_range(1..=4);
            let md = MultiplierDistribution::uniform_rows(&ring, [dc], &masses).unwrap();
            let model = ChainModel::single_degree(&ring, dc, &md, 1000).unwrap();
            let got = model.simulate(1.0, &src, &opts(4, 2)).unwrap().mutual_information();
            let want = cnd_exit_at_one(&ring, &masses);
            assert!((got - want).abs() < 0.005, "{masses:?} d_c={dc}: {got} vs {want}");
        }
    }

    #[test]
    fn degree_one_free_start() {
        let ring = RingParams::from_modulus(4).unwrap();
        let s2 = snr_to_sigma2(5.5);
        let zd = MultiplierDistribution::uniform_rows(&ring, [2], &[0.8, 0.2]).unwrap();
        let reg = MultiplierDistribution::all_regular(&ring, [2]);
        assert!(cnd_exit(0.0, 2, s2, &zd, 4, 20_000).unwrap() > 0.002);
        assert!(cnd_exit(0.0, 2, s2, &reg, 4, 20_000).unwrap().abs() < 1e-9);
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let ring = RingParams::from_modulus(4).unwrap();
        let md = MultiplierDistribution::regular_distribution(&ring, [1, 2, 3]);
        let model = ChainModel::new(&ring, &BTreeMap::from([(1, 0.1), (2, 0.5), (3, 0.4)]), &md, 1000).unwrap();
        let src = AwgnSource::new(4, 0.3);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| model.simulate(0.4, &src, &opts(6, 9)).unwrap())
        };
        assert_eq!(run(1), run(3));
    }

    #[test]
    fn zero_divisor_outputs_have_zero_llr_mass() {
        let ring = RingParams::from_modulus(4).unwrap();
        let md = MultiplierDistribution::regular_distribution(&ring, [3]);
        let model = ChainModel::single_degree(&ring, 3, &md, 1000).unwrap();
        let mut o = opts(2, 5);
        o.keep_outputs = true;
        let out = model.simulate(0.5, &AwgnSource::new(4, 0.3), &o).unwrap();
        let stats = crate::bp::llr_stats(&out.outputs, 4, 10, (-10.0, 10.0));
        assert!((stats.zero_mass[1] - 1.0 / 3.0).abs() < 0.01, "{:?}", stats.zero_mass);
    }

    #[test]
    fn curve_is_nondecreasing() {
        let ring = RingParams::from_modulus(4).unwrap();
        let md = MultiplierDistribution::uniform_rows(&ring, [2, 3], &[0.8, 0.2]).unwrap();
        let model = ChainModel::new(&ring, &BTreeMap::from([(2, 0.5), (3, 0.5)]), &md, 1000).unwrap();
        let src = AwgnSource::new(4, snr_to_sigma2(6.0));
        let mut prev = -1.0;
        for k in 0..=10 {
            let i = model.simulate(k as f64 / 10.0, &src, &opts(4, 1)).unwrap().mutual_information();
            assert!(i > prev - 0.005);
            prev = i;
        }
    }

    /// Brute-force oracle: degree-2 check with uniform input on the
    /// zero-divisor edge and two fresh channel APPs on the accumulator edges.
    fn initial_mi_oracle(h2: Sym, sigma2: f64, q: usize, samples: usize) -> f64 {
        let ring = RingParams::from_modulus(q).unwrap();
        let src = AwgnSource::new(q, sigma2);
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let regular = ring.regular_elements().to_vec();
        let mut acc = 0.0;
        for _ in 0..samples {
            let mut a = vec![0.0; q];
            let mut b = vec![0.0; q];
            src.sample(&mut rng, &mut a);
            src.sample(&mut rng, &mut b);
            let h1 = *regular.choose(&mut rng).unwrap();
            let g1 = *regular.choose(&mut rng).unwrap();
            let g2 = *regular.choose(&mut rng).unwrap();
            let inputs = vec![vec![1.0 / q as f64; q], a, b];
            let l = cn_update_bruteforce(&ring, &inputs, &[h2, g1, g2], h1).unwrap();
            acc += mi_of_probs(&l);
        }
        acc / samples as f64
    }

    #[test]
    fn initial_mi_matches_bruteforce() {
        for (q, h2, snr) in [(4usize, 2 as Sym, 5.0), (8, 2, 9.0), (8, 4, 9.0)] {
            let s2 = snr_to_sigma2(snr);
            let ring = RingParams::from_modulus(q).unwrap();
            let m = ring.zero_multiplier(h2).unwrap();
            let fast = initial_mi_degree2(m, s2, q, 20_000, 3).unwrap();
            let slow = initial_mi_oracle(h2, s2, q, 20_000);
            assert!((fast - slow).abs() < 0.01, "q={q} h={h2}: {fast} vs {slow}");
        }
        assert!(initial_mi_degree2(4, 0.5, 4, 100, 1).unwrap().abs() < 1e-12);
        assert!((initial_mi_degree2(2, 1e-6, 4, 100, 1).unwrap() - 0.5).abs() < 1e-9);
    }
}
