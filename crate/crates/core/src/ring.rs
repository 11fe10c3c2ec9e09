//! Arithmetic over the integer ring Z_q, q = 2^m, and the partition of its
//! nonzero elements into regular elements and zero-divisor types.
//!
//! Elements are stored as `u8` (m ≤ 8). Inputs are validated at the public
//! boundary (`check`); the table lookups used on hot paths assume canonical
//! values in `[0, q)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A ring element in canonical form `[0, q)`.
pub type Sym = u8;

/// Largest supported exponent: q = 256 keeps the tables at 64 KiB.
pub const MAX_EXPONENT: u32 = 8;

/// One class of nonzero elements sharing the same zero-multiplier.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElementType {
    /// Type index; 0 is the regular class.
    pub index: usize,
    /// Smallest positive j with a·j ≡ 0 for every member a.
    pub zero_multiplier: usize,
    /// Members in ascending order.
    pub members: Vec<Sym>,
}

impl ElementType {
    pub fn is_regular(&self) -> bool {
        self.index == 0
    }
}

/// Modulus and precomputed tables for Z_{2^m}. Immutable once built.
#[derive(Debug, Clone)]
pub struct RingParams {
    m: u32,
    q: usize,
    mul: Vec<Sym>,
    inv: Vec<Option<Sym>>,
    zero_mult: Vec<usize>,
    type_of: Vec<usize>,
    types: Vec<ElementType>,
}

impl PartialEq for RingParams {
    fn eq(&self, other: &Self) -> bool {
        self.m == other.m
    }
}

impl Eq for RingParams {}

impl RingParams {
    pub fn new(m: u32) -> Result<Self> {
        if m == 0 || m > MAX_EXPONENT {
            return Err(Error::InvalidExponent(m));
        }
        let q = 1usize << m;
        let mut mul = vec![0 as Sym; q * q];
        for a in 0..q {
            for b in 0..q {
                mul[a * q + b] = ((a * b) % q) as Sym;
            }
        }
        let mut inv = vec![None; q];
        let mut zero_mult = vec![0usize; q];
        for a in 1..q {
            inv[a] = (1..q).find(|&b| mul[a * q + b] == 1).map(|b| b as Sym);
            // j = q always annihilates, so the search terminates.
            zero_mult[a] = (1..=q).find(|&j| (a * j) % q == 0).unwrap_or(q);
        }

        // Distinct zero-multipliers in descending order; q (regular) first.
        let mut mults: Vec<usize> = zero_mult[1..].to_vec();
        mults.sort_unstable_by(|a, b| b.cmp(a));
        mults.dedup();
        let types: Vec<ElementType> = mults
            .iter()
            .enumerate()
            .map(|(index, &zm)| ElementType {
                index,
                zero_multiplier: zm,
                members: (1..q).filter(|&a| zero_mult[a] == zm).map(|a| a as Sym).collect(),
            })
            .collect();
        let mut type_of = vec![usize::MAX; q];
        for t in &types {
            for &a in &t.members {
                type_of[a as usize] = t.index;
            }
        }

        Ok(Self {
            m,
            q,
            mul,
            inv,
            zero_mult,
            type_of,
            types,
        })
    }

    /// Build from a modulus that must be a power of two.
    pub fn from_modulus(q: usize) -> Result<Self> {
        if q < 2 || !q.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "modulus {q} is not a power of two >= 2"
            )));
        }
        Self::new(q.trailing_zeros())
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn q(&self) -> usize {
        self.q
    }

    /// Validate an untrusted value and return it as a canonical element.
    pub fn check(&self, value: usize) -> Result<Sym> {
        if value < self.q {
            Ok(value as Sym)
        } else {
            Err(Error::ElementOutOfRange { value, q: self.q })
        }
    }

    pub fn check_all(&self, values: &[Sym]) -> Result<()> {
        match values.iter().find(|&&v| (v as usize) >= self.q) {
            Some(&v) => Err(Error::ElementOutOfRange {
                value: v as usize,
                q: self.q,
            }),
            None => Ok(()),
        }
    }

    #[inline]
    pub fn add(&self, a: Sym, b: Sym) -> Sym {
        ((a as usize + b as usize) & (self.q - 1)) as Sym
    }

    #[inline]
    pub fn sub(&self, a: Sym, b: Sym) -> Sym {
        ((a as usize + self.q - b as usize) & (self.q - 1)) as Sym
    }

    #[inline]
    pub fn neg(&self, a: Sym) -> Sym {
        ((self.q - a as usize) & (self.q - 1)) as Sym
    }

    #[inline]
    pub fn mul(&self, a: Sym, b: Sym) -> Sym {
        self.mul[a as usize * self.q + b as usize]
    }

    /// Row of the multiplication table: `row[a] = h·a`.
    #[inline]
    pub fn mul_row(&self, h: Sym) -> &[Sym] {
        let start = h as usize * self.q;
        &self.mul[start..start + self.q]
    }

    /// M0(a) = min{j > 0 : a·j ≡ 0 (mod q)}.
    pub fn zero_multiplier(&self, a: Sym) -> Result<usize> {
        self.nonzero(a)?;
        Ok(self.zero_mult[a as usize])
    }

    /// Multiplicative inverse, `None` for zero-divisors.
    pub fn inverse(&self, a: Sym) -> Result<Option<Sym>> {
        self.nonzero(a)?;
        Ok(self.inv[a as usize])
    }

    /// Inverse of an element already known to be regular.
    #[inline]
    pub(crate) fn inv_regular(&self, a: Sym) -> Sym {
        self.inv[a as usize].expect("element is regular")
    }

    pub fn is_regular(&self, a: Sym) -> bool {
        a % 2 == 1
    }

    /// Type index of a nonzero element.
    pub fn type_of(&self, a: Sym) -> Result<usize> {
        self.nonzero(a)?;
        Ok(self.type_of[a as usize])
    }

    #[inline]
    pub(crate) fn type_index(&self, a: Sym) -> usize {
        self.type_of[a as usize]
    }

    /// Element types Ω_0..Ω_{T-1}, regular first, descending zero-multiplier.
    pub fn types(&self) -> &[ElementType] {
        &self.types
    }

    pub fn num_types(&self) -> usize {
        self.types.len()
    }

    /// Regular elements Ω_0.
    pub fn regular_elements(&self) -> &[Sym] {
        &self.types[0].members
    }

    fn nonzero(&self, a: Sym) -> Result<()> {
        if a == 0 {
            return Err(Error::ZeroElement);
        }
        self.check(a as usize).map(|_| ())
    }
}

/// Free-function form of the ring operations.
pub fn ring_add(a: Sym, b: Sym, p: &RingParams) -> Sym {
    p.add(a, b)
}

pub fn ring_mul(a: Sym, b: Sym, p: &RingParams) -> Sym {
    p.mul(a, b)
}

pub fn zero_multiplier(a: Sym, p: &RingParams) -> Result<usize> {
    p.zero_multiplier(a)
}

pub fn inverse(a: Sym, p: &RingParams) -> Result<Option<Sym>> {
    p.inverse(a)
}

pub fn partition_types(p: &RingParams) -> Vec<ElementType> {
    p.types().to_vec()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z(m: u32) -> RingParams {
        RingParams::new(m).unwrap()
    }

    #[test]
    fn add_and_mul_examples() {
        let r = z(3);
        assert_eq!(r.add(3, 7), 2);
        assert_eq!(r.add(5, 3), 0);
        for a in 0..8 {
            assert_eq!(r.add(0, a), a);
            assert_eq!(r.mul(1, a), a);
        }
        assert_eq!(r.mul(2, 4), 0);
        assert_eq!(r.mul(3, 3), 1);
    }

    #[test]
    fn zero_multiplier_matches_z8_table() {
        let r = z(3);
        let m0: Vec<usize> = (1..8).map(|a| r.zero_multiplier(a).unwrap()).collect();
        assert_eq!(m0, vec![8, 4, 8, 2, 8, 4, 8]);
        assert!(matches!(r.zero_multiplier(0), Err(Error::ZeroElement)));
    }

    #[test]
    fn inverse_examples() {
        let r = z(3);
        assert_eq!(r.inverse(3).unwrap(), Some(3));
        assert_eq!(r.inverse(1).unwrap(), Some(1));
        assert_eq!(r.inverse(2).unwrap(), None);
        assert!(r.inverse(0).is_err());
    }

    #[test]
    fn inverse_exhaustive_up_to_m6() {
        for m in 1..=6 {
            let r = z(m);
            let q = r.q();
            for a in 1..q as Sym {
                let zm = r.zero_multiplier(a).unwrap();
                assert_eq!(q % zm, 0);
                match r.inverse(a).unwrap() {
                    Some(b) => {
                        assert_eq!(zm, q);
                        assert_eq!(r.mul(a, b), 1);
                    }
                    None => assert!(zm < q),
                }
            }
        }
    }

    #[test]
    fn partitions() {
        let t = z(3).types().to_vec();
        assert_eq!(t.len(), 3);
        assert_eq!((t[0].zero_multiplier, t[0].members.clone()), (8, vec![1, 3, 5, 7]));
        assert_eq!((t[1].zero_multiplier, t[1].members.clone()), (4, vec![2, 6]));
        assert_eq!((t[2].zero_multiplier, t[2].members.clone()), (2, vec![4]));

        let t = z(2).types().to_vec();
        assert_eq!(t.len(), 2);
        assert_eq!(t[0].members, vec![1, 3]);
        assert_eq!(t[1].members, vec![2]);

        let t = z(1).types().to_vec();
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].members, vec![1]);
    }

    #[test]
    fn every_nonzero_element_in_exactly_one_type() {
        for m in 1..=8 {
            let r = z(m);
            let mut seen = vec![0usize; r.q()];
            for t in r.types() {
                for &a in &t.members {
                    seen[a as usize] += 1;
                }
            }
            assert_eq!(seen[0], 0);
            assert!(seen[1..].iter().all(|&c| c == 1));
            assert_eq!(r.types()[0].members.len(), r.q() / 2);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(RingParams::new(0).is_err());
        assert!(RingParams::new(9).is_err());
        assert!(RingParams::from_modulus(6).is_err());
        assert_eq!(RingParams::from_modulus(16).unwrap().m(), 4);
        assert!(z(2).check(4).is_err());
    }
}
