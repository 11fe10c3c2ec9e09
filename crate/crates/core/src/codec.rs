//! Encoding and 2^m-PAM mapping.
//!
//! The encoder repeats each message symbol per its variable-node degree,
//! permutes through the interleaver, forms the weighted check sums
//! `s_t = Σ h_e·b_e` and runs the time-varying accumulator
//! `c_t = (g''_t)^{-1}·(−(g'_t·c_{t-1} + s_t))` with no `g'` term at t = 0.
//! Cost is linear in the number of edges.
//!
//! File layouts used by the CLI: messages and codewords are one byte per
//! ring symbol; real-valued streams are little-endian `f64`.

use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::CodeGraph;
use crate::ring::{RingParams, Sym};

/// Largest codeword length for which [`generator_matrix`] builds a dense matrix.
pub const DEFAULT_GENERATOR_BOUND: usize = 2048;

/// Encode a message of length k into a codeword of length n (coset not applied).
pub fn encode(graph: &CodeGraph, message: &[Sym]) -> Result<Vec<Sym>> {
    if message.len() != graph.k() {
        return Err(Error::LengthMismatch {
            expected: graph.k(),
            actual: message.len(),
        });
    }
    graph.ring().check_all(message)?;
    Ok(encode_unchecked(graph, message))
}

pub(crate) fn encode_unchecked(graph: &CodeGraph, message: &[Sym]) -> Vec<Sym> {
    let ring = graph.ring();
    let h = graph.edge_multipliers();
    let mut c = vec![0 as Sym; graph.n()];
    let mut prev: Sym = 0;
    for (t, ct) in c.iter_mut().enumerate() {
        let mut s: Sym = 0;
        for e in graph.cn_edges(t) {
            s = ring.add(s, ring.mul(h[e], message[graph.edge_vn(e)]));
        }
        if t > 0 {
            s = ring.add(s, ring.mul(graph.acc_prev()[t], prev));
        }
        prev = ring.mul(ring.inv_regular(graph.acc_cur()[t]), ring.neg(s));
        *ct = prev;
    }
    c
}

/// Add the coset vector: c' = c ⊕ θ.
pub fn apply_coset(ring: &RingParams, codeword: &[Sym], coset: &[Sym]) -> Vec<Sym> {
    codeword.iter().zip(coset).map(|(&c, &t)| ring.add(c, t)).collect()
}

/// One-to-one map from Z_q to unit-energy q-PAM.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PamMapper {
    q: usize,
    gamma: f64,
}

impl PamMapper {
    pub fn new(q: usize) -> Self {
        let qf = q as f64;
        Self {
            q,
            gamma: ((qf * qf - 1.0) / 12.0).sqrt(),
        }
    }

    pub fn q(&self) -> usize {
        self.q
    }

    /// Normalization γ with γ² = (q²−1)/12.
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Unnormalized level `a − (q−1)/2`.
    #[inline]
    pub fn level(&self, a: Sym) -> f64 {
        a as f64 - (self.q as f64 - 1.0) / 2.0
    }

    /// Normalized constellation point of `a` (already coset-shifted).
    #[inline]
    pub fn point(&self, a: Sym) -> f64 {
        self.level(a) / self.gamma
    }

    /// Map a codeword with coset θ: x_t = point(c_t ⊕ θ_t).
    pub fn map(&self, codeword: &[Sym], coset: &[Sym]) -> Vec<f64> {
        let mask = self.q - 1;
        codeword
            .iter()
            .zip(coset)
            .map(|(&c, &t)| self.point(((c as usize + t as usize) & mask) as Sym))
            .collect()
    }
}

/// Free-function form of [`PamMapper::map`].
pub fn map_pam(codeword: &[Sym], coset: &[Sym], q: usize) -> Vec<f64> {
    PamMapper::new(q).map(codeword, coset)
}

/// Dense n×k generator matrix, row-major: `g[t][i]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratorMatrix {
    q: usize,
    rows: Vec<Vec<Sym>>,
}

impl GeneratorMatrix {
    pub fn rows(&self) -> &[Vec<Sym>] {
        &self.rows
    }

    /// G⊗w over Z_q.
    pub fn apply(&self, w: &[Sym]) -> Vec<Sym> {
        let mask = self.q - 1;
        self.rows
            .iter()
            .map(|row| {
                let s: usize = row.iter().zip(w).map(|(&g, &x)| g as usize * x as usize).sum();
                (s & mask) as Sym
            })
            .collect()
    }
}

/// Build G column by column from unit-vector encodings. Refused above `bound`.
pub fn generator_matrix(graph: &CodeGraph, bound: usize) -> Result<GeneratorMatrix> {
    if graph.n() > bound {
        return Err(Error::TooLarge { n: graph.n(), bound });
    }
    let mut rows = vec![vec![0 as Sym; graph.k()]; graph.n()];
    let mut unit = vec![0 as Sym; graph.k()];
    for i in 0..graph.k() {
        unit[i] = 1;
        for (t, &c) in encode_unchecked(graph, &unit).iter().enumerate() {
            rows[t][i] = c;
        }
        unit[i] = 0;
    }
    Ok(GeneratorMatrix { q: graph.q(), rows })
}

pub fn write_symbols(path: impl AsRef<Path>, symbols: &[Sym]) -> Result<()> {
    std::fs::write(path, symbols)?;
    Ok(())
}

pub fn read_symbols(path: impl AsRef<Path>, ring: &RingParams) -> Result<Vec<Sym>> {
    let data = std::fs::read(path)?;
    ring.check_all(&data)?;
    Ok(data)
}

pub fn write_f64s(path: impl AsRef<Path>, values: &[f64]) -> Result<()> {
    let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    std::fs::write(path, bytes)?;
    Ok(())
}

pub fn read_f64s(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let data = std::fs::read(path)?;
    if data.len() % 8 != 0 {
        return Err(Error::InvalidArgument(format!(
            "f64 stream has {} bytes, not a multiple of 8",
            data.len()
        )));
    }
    Ok(data
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
        .collect())
}
