//! Check-node update over Z_q.
//!
//! For inputs `r^τ` entering with multipliers `h_τ`, the message toward edge
//! 0 (multiplier `h_0`) is
//! `l_i ∝ Σ { Π_{τ≠0} r^τ_{a_τ} : Σ_τ h_τ·a_τ + h_0·i ≡ 0 }`.
//!
//! The fast path aggregates every input into the distribution of `h_τ·a_τ`
//! (a permutation when `h_τ` is regular, a many-to-one fold otherwise),
//! multiplies DFTs, inverts, and reads `l_i = conv[−h_0·i]`. A zero-divisor
//! `h_0` therefore gives equal mass to every `i` in a residue class.

use num_complex::Complex64;

use super::fft::Fft;
use super::{finish_probs, PROB_FLOOR};
use crate::error::{Error, Result};
use crate::ring::{RingParams, Sym};

/// Brute-force enumeration is refused above this many candidates.
pub const BRUTEFORCE_LIMIT: usize = 1 << 24;

/// Reusable FFT check-node kernel for one ring.
#[derive(Debug, Clone)]
pub struct CheckKernel {
    ring: RingParams,
    fft: Fft,
    transforms: Vec<Complex64>,
    prefix: Vec<Complex64>,
    suffix: Vec<Complex64>,
    buf: Vec<Complex64>,
}

impl CheckKernel {
    pub fn new(ring: &RingParams) -> Self {
        Self {
            ring: ring.clone(),
            fft: Fft::new(ring.q()),
            transforms: Vec::new(),
            prefix: Vec::new(),
            suffix: Vec::new(),
            buf: vec![Complex64::default(); ring.q()],
        }
    }

    pub fn ring(&self) -> &RingParams {
        &self.ring
    }

    /// All extrinsic outputs of one check node.
    ///
    /// `inputs` and `outputs` are flat `d·q` arrays; `multipliers` has length d.
    /// Every output row is a normalized probability vector.
    pub fn update_all(&mut self, inputs: &[f64], multipliers: &[Sym], outputs: &mut [f64]) {
        let q = self.ring.q();
        let d = multipliers.len();
        debug_assert_eq!(inputs.len(), d * q);
        debug_assert_eq!(outputs.len(), d * q);
        let one = Complex64::new(1.0, 0.0);
        self.transforms.resize(d * q, Complex64::default());
        self.prefix.resize((d + 1) * q, one);
        self.suffix.resize((d + 1) * q, one);

        for (tau, &h) in multipliers.iter().enumerate() {
            let row = self.ring.mul_row(h);
            let tr = &mut self.transforms[tau * q..(tau + 1) * q];
            tr.fill(Complex64::default());
            for (a, &r) in inputs[tau * q..(tau + 1) * q].iter().enumerate() {
                tr[row[a] as usize].re += r;
            }
            self.fft.forward(tr);
        }
        self.prefix[..q].fill(one);
        for tau in 0..d {
            let (done, rest) = self.prefix.split_at_mut((tau + 1) * q);
            let prev = &done[tau * q..];
            let tr = &self.transforms[tau * q..(tau + 1) * q];
            for k in 0..q {
                rest[k] = prev[k] * tr[k];
            }
        }
        self.suffix[d * q..].fill(one);
        for tau in (0..d).rev() {
            let (head, tail) = self.suffix.split_at_mut((tau + 1) * q);
            let next = &tail[..q];
            let tr = &self.transforms[tau * q..(tau + 1) * q];
            for k in 0..q {
                head[tau * q + k] = next[k] * tr[k];
            }
        }

        for (tau, &h) in multipliers.iter().enumerate() {
            for k in 0..q {
                self.buf[k] = self.prefix[tau * q + k] * self.suffix[(tau + 1) * q + k];
            }
            self.fft.inverse(&mut self.buf);
            let row = self.ring.mul_row(h);
            let out = &mut outputs[tau * q..(tau + 1) * q];
            for (i, o) in out.iter_mut().enumerate() {
                let idx = (q - row[i] as usize) & (q - 1);
                *o = self.buf[idx].re;
            }
            finish_probs(out);
        }
    }

    /// Single extrinsic output toward an edge with multiplier `out_multiplier`.
    pub fn update_one(&mut self, inputs: &[f64], multipliers: &[Sym], out_multiplier: Sym, out: &mut [f64]) {
        let q = self.ring.q();
        let mut flat = Vec::with_capacity(inputs.len() + q);
        flat.extend_from_slice(inputs);
        flat.resize(inputs.len() + q, 1.0 / q as f64);
        let mut mults = multipliers.to_vec();
        mults.push(out_multiplier);
        let mut outs = vec![0.0; flat.len()];
        self.update_all(&flat, &mults, &mut outs);
        out.copy_from_slice(&outs[inputs.len()..]);
    }
}

fn validate(ring: &RingParams, incoming: &[Vec<f64>], multipliers: &[Sym], out_multiplier: Sym) -> Result<()> {
    if incoming.len() != multipliers.len() {
        return Err(Error::LengthMismatch {
            expected: incoming.len(),
            actual: multipliers.len(),
        });
    }
    for r in incoming {
        if r.len() != ring.q() {
            return Err(Error::LengthMismatch {
                expected: ring.q(),
                actual: r.len(),
            });
        }
    }
    ring.check_all(multipliers)?;
    ring.check(out_multiplier as usize)?;
    if out_multiplier == 0 || multipliers.contains(&0) {
        return Err(Error::ZeroElement);
    }
    Ok(())
}

/// FFT check-node update toward one output edge.
pub fn cn_update_fft(ring: &RingParams, incoming: &[Vec<f64>], multipliers: &[Sym], out_multiplier: Sym) -> Result<Vec<f64>> {
    validate(ring, incoming, multipliers, out_multiplier)?;
    let flat: Vec<f64> = incoming.iter().flatten().copied().collect();
    let mut out = vec![0.0; ring.q()];
    CheckKernel::new(ring).update_one(&flat, multipliers, out_multiplier, &mut out);
    Ok(out)
}

/// Reference check-node update by enumerating all q^(d−1) input candidates.
pub fn cn_update_bruteforce(ring: &RingParams, incoming: &[Vec<f64>], multipliers: &[Sym], out_multiplier: Sym) -> Result<Vec<f64>> {
    validate(ring, incoming, multipliers, out_multiplier)?;
    let q = ring.q();
    let d = incoming.len();
    let total = q.checked_pow(d as u32).filter(|&t| t <= BRUTEFORCE_LIMIT).ok_or_else(|| {
        Error::EnumerationBound(format!("{q}^{d} candidates exceed {BRUTEFORCE_LIMIT}"))
    })?;
    let mut out = vec![0.0; q];
    let mut digits = vec![0usize; d];
    for _ in 0..total {
        let mut weight = 1.0;
        let mut sum: Sym = 0;
        for (tau, &a) in digits.iter().enumerate() {
            weight *= incoming[tau][a];
            sum = ring.add(sum, ring.mul(multipliers[tau], a as Sym));
        }
        for (i, o) in out.iter_mut().enumerate() {
            if ring.add(sum, ring.mul(out_multiplier, i as Sym)) == 0 {
                *o += weight;
            }
        }
        for digit in digits.iter_mut() {
            *digit += 1;
            if *digit < q {
                break;
            }
            *digit = 0;
        }
    }
    let total: f64 = out.iter().sum();
    if total > 0.0 {
        for o in out.iter_mut() {
            *o = (*o / total).max(PROB_FLOOR);
        }
    }
    finish_probs(&mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_prob(q: usize, rng: &mut impl Rng) -> Vec<f64> {
        // mix of peaky and flat vectors
        let sharp = rng.random_range(0.5..6.0);
        let mut v: Vec<f64> = (0..q).map(|_| rng.random::<f64>().powf(sharp)).collect();
        let s: f64 = v.iter().sum();
        v.iter_mut().for_each(|x| *x /= s);
        v
    }

    fn random_mult(ring: &RingParams, rng: &mut impl Rng) -> Sym {
        rng.random_range(1..ring.q()) as Sym
    }

    #[test]
    fn fft_matches_bruteforce() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for m in 1..=4 {
            let ring = RingParams::new(m).unwrap();
            for _ in 0..200 {
                let d = rng.random_range(1..=4);
                let incoming: Vec<Vec<f64>> = (0..d).map(|_| random_prob(ring.q(), &mut rng)).collect();
                let mults: Vec<Sym> = (0..d).map(|_| random_mult(&ring, &mut rng)).collect();
                let h0 = random_mult(&ring, &mut rng);
                let a = cn_update_fft(&ring, &incoming, &mults, h0).unwrap();
                let b = cn_update_bruteforce(&ring, &incoming, &mults, h0).unwrap();
                let diff = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
                assert!(diff < 1e-9, "q={} d={d} mults={mults:?} h0={h0}: {a:?} vs {b:?}", ring.q());
            }
        }
    }

    #[test]
    fn single_constraint_negates() {
        let ring = RingParams::new(3).unwrap();
        for a in 0..8 {
            let mut r = vec![0.0; 8];
            r[a] = 1.0;
            let out = cn_update_fft(&ring, &[r], &[1], 1).unwrap();
            let argmax = (0..8).max_by(|&i, &j| out[i].total_cmp(&out[j])).unwrap();
            assert_eq!(argmax, (8 - a) % 8);
            assert!(out[argmax] > 1.0 - 1e-12);
        }
    }

    #[test]
    fn uniform_inputs_give_uniform_output() {
        let ring = RingParams::new(2).unwrap();
        let u = vec![0.25; 4];
        for (mults, h0) in [(vec![1, 2, 3], 1), (vec![2, 2, 1], 2), (vec![3], 3)] {
            let inc = vec![u.clone(); mults.len()];
            for out in [
                cn_update_fft(&ring, &inc, &mults, h0).unwrap(),
                cn_update_bruteforce(&ring, &inc, &mults, h0).unwrap(),
            ] {
                assert!(out.iter().all(|&p| (p - 0.25).abs() < 1e-12), "{out:?}");
            }
        }
    }

    #[test]
    fn zero_divisor_output_ties_residue_classes() {
        let ring = RingParams::new(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let inc: Vec<Vec<f64>> = (0..2).map(|_| random_prob(4, &mut rng)).collect();
        let out = cn_update_bruteforce(&ring, &inc, &[1, 3], 2).unwrap();
        assert!((out[0] - out[2]).abs() < 1e-12 && (out[1] - out[3]).abs() < 1e-12);
        // enumerate solutions of a + 3b + 2i = 0 directly
        let mut l = [0.0; 4];
        for a in 0..4 {
            for b in 0..4 {
                for (i, li) in l.iter_mut().enumerate() {
                    if (a + 3 * b + 2 * i) % 4 == 0 {
                        *li += inc[0][a] * inc[1][b];
                    }
                }
            }
        }
        let s: f64 = l.iter().sum();
        for i in 0..4 {
            assert!((out[i] - l[i] / s).abs() < 1e-12);
        }
    }

    #[test]
    fn regular_single_edge_is_a_permutation() {
        let ring = RingParams::new(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let r = random_prob(8, &mut rng);
        let out = cn_update_fft(&ring, std::slice::from_ref(&r), &[3], 1).unwrap();
        // 3a + i = 0  =>  i = −3a
        for a in 0..8u8 {
            let i = ring.neg(ring.mul(3, a)) as usize;
            assert!((out[i] - r[a as usize]).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        let ring = RingParams::new(2).unwrap();
        let u = vec![0.25; 4];
        assert!(cn_update_fft(&ring, &[u.clone()], &[0], 1).is_err());
        assert!(cn_update_fft(&ring, &[u.clone()], &[1, 1], 1).is_err());
        assert!(cn_update_fft(&ring, &[vec![0.5; 2]], &[1], 1).is_err());
        assert!(cn_update_bruteforce(&ring, &vec![u; 13], &[1; 13], 1).is_err());
    }
}
