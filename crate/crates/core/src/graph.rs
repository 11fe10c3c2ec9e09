//! Tanner-graph construction for D-IRA codes.
//!
//! A [`CodeGraph`] fixes everything the encoder and decoder need: variable
//! node (repeat) degrees, check node (combiner) degrees, the interleaver, the
//! per-edge multipliers, the time-varying accumulator multipliers and the
//! coset vector.
//!
//! Interleaver edges are indexed on the check side: check node `t` owns the
//! contiguous edge range `cn_offsets[t]..cn_offsets[t+1]`. On the variable
//! side the repeated sequence is laid out node by node ("sockets"), and
//! `interleaver[e]` names the socket feeding edge `e`.
//!
//! Check node `t` enforces
//! `Σ_e h_e·w[vn(e)] + g'_t·c_{t-1} + g''_t·c_t = 0 (mod q)` with the
//! convention that the `g'_0·c_{-1}` term is absent.
//!
//! # Construction
//!
//! [`build_graph`] draws every random choice from a ChaCha8 stream seeded
//! with the graph seed, in this order:
//!
//! 1. check-node degrees: counts by largest-remainder rounding of node
//!    fractions to `n`, then the degree sequence is shuffled along the chain;
//! 2. variable-node degrees: counts by largest-remainder rounding to
//!    `k = round(E·Σφ_i/i)`, sorted ascending; the edge-count residual is
//!    absorbed by moving the lowest admissible check degrees by one;
//! 3. multiplier types per check degree: exact counts by largest remainder,
//!    shuffled, then repaired so every check node of degree ≥ 2 keeps a
//!    regular input; elements drawn within each type by their row weights;
//! 4. interleaver: zero-divisor edges are matched at random to sockets of
//!    variable nodes of degree > 3 (at most ⌈d/3⌉ per node), regular edges
//!    to the remaining sockets; parallel edges are then removed by
//!    category-preserving swaps;
//! 5. accumulator multipliers (g'_t, g''_t) uniform over regular elements;
//! 6. coset θ uniform over Z_q^n;
//! 7. low-weight repair, on a second stream of the same seed: while some
//!    single nonzero message symbol encodes to a codeword of weight below
//!    [`MIN_UNIT_WEIGHT`], or some degree-2 message node lies on a cycle of
//!    degree-2 message nodes, one of its node's edges is swapped with a
//!    random edge of the same multiplier class.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profile::CodeProfile;
use crate::ring::{RingParams, Sym};

/// Retry budget for repairing interleaver conflicts.
pub const MAX_INTERLEAVER_RETRIES: usize = 10_000;

/// Smallest codeword weight tolerated for a message with one nonzero symbol
/// (capped at n/4 for short codes).
pub const MIN_UNIT_WEIGHT: usize = 32;

const GRAPH_FORMAT: &str = "dira-graph";
const GRAPH_VERSION: u32 = 1;

/// Largest zero-divisor edge count allowed on a variable node of degree `d`.
pub fn zero_divisor_cap(d: usize) -> usize {
    if d <= 3 {
        0
    } else {
        d.div_ceil(3)
    }
}

/// A concrete D-IRA Tanner graph. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct CodeGraph {
    ring: RingParams,
    k: usize,
    n: usize,
    vn_degrees: Vec<u32>,
    cn_degrees: Vec<u32>,
    interleaver: Vec<u32>,
    edge_multipliers: Vec<Sym>,
    acc_prev: Vec<Sym>,
    acc_cur: Vec<Sym>,
    coset: Vec<Sym>,
    seed: u64,
    label: String,

    cn_offsets: Vec<u32>,
    vn_offsets: Vec<u32>,
    edge_vn: Vec<u32>,
    vn_edges: Vec<u32>,
}

/// Raw parts of a graph, as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphParts {
    pub q: usize,
    pub k: usize,
    pub n: usize,
    pub vn_degrees: Vec<u32>,
    pub cn_degrees: Vec<u32>,
    pub interleaver: Vec<u32>,
    pub edge_multipliers: Vec<Sym>,
    /// g'_t, multiplier of c_{t-1} in check t (entry 0 unused).
    pub acc_prev: Vec<Sym>,
    /// g''_t, multiplier of c_t in check t.
    pub acc_cur: Vec<Sym>,
    pub coset: Vec<Sym>,
    pub seed: u64,
    #[serde(default)]
    pub label: String,
}

#[derive(Serialize, Deserialize)]
struct GraphFile {
    format: String,
    version: u32,
    #[serde(flatten)]
    parts: GraphParts,
}

impl CodeGraph {
    /// Assemble and validate a graph from explicit parts.
    pub fn from_parts(parts: GraphParts) -> Result<Self> {
        let ring = RingParams::from_modulus(parts.q)?;
        let GraphParts {
            k,
            n,
            vn_degrees,
            cn_degrees,
            interleaver,
            edge_multipliers,
            acc_prev,
            acc_cur,
            coset,
            seed,
            label,
            ..
        } = parts;
        let bad = |msg: String| Err(Error::InvalidGraph(msg));
        if vn_degrees.len() != k || k == 0 {
            return bad(format!("{} variable-node degrees for k={k}", vn_degrees.len()));
        }
        if cn_degrees.len() != n || acc_prev.len() != n || acc_cur.len() != n || coset.len() != n || n == 0 {
            return bad(format!("per-check vectors must have length n={n}"));
        }
        let e_vn: usize = vn_degrees.iter().map(|&d| d as usize).sum();
        let e_cn: usize = cn_degrees.iter().map(|&d| d as usize).sum();
        if e_vn != e_cn || interleaver.len() != e_cn || edge_multipliers.len() != e_cn {
            return bad(format!(
                "edge counts disagree: vn {e_vn}, cn {e_cn}, interleaver {}, multipliers {}",
                interleaver.len(),
                edge_multipliers.len()
            ));
        }
        if vn_degrees.contains(&0) {
            return bad("variable node of degree 0".into());
        }
        let mut seen = vec![false; e_cn];
        for &s in &interleaver {
            let s = s as usize;
            if s >= e_cn || seen[s] {
                return bad("interleaver is not a permutation".into());
            }
            seen[s] = true;
        }
        ring.check_all(&edge_multipliers)?;
        ring.check_all(&coset)?;
        if edge_multipliers.contains(&0) {
            return bad("zero edge multiplier".into());
        }
        for t in 0..n {
            if !ring.is_regular(acc_cur[t]) || (t > 0 && !ring.is_regular(acc_prev[t])) {
                return bad(format!("accumulator multipliers at t={t} are not regular"));
            }
        }

        let mut cn_offsets = Vec::with_capacity(n + 1);
        let mut acc = 0u32;
        cn_offsets.push(0);
        for &d in &cn_degrees {
            acc += d;
            cn_offsets.push(acc);
        }
        let mut vn_offsets = Vec::with_capacity(k + 1);
        let mut acc = 0u32;
        vn_offsets.push(0);
        let mut socket_owner = Vec::with_capacity(e_cn);
        for (v, &d) in vn_degrees.iter().enumerate() {
            acc += d;
            vn_offsets.push(acc);
            socket_owner.extend(std::iter::repeat_n(v as u32, d as usize));
        }
        let edge_vn: Vec<u32> = interleaver.iter().map(|&s| socket_owner[s as usize]).collect();
        let mut vn_edges = vec![0u32; e_cn];
        for (e, &s) in interleaver.iter().enumerate() {
            vn_edges[s as usize] = e as u32;
        }

        Ok(Self {
            ring,
            k,
            n,
            vn_degrees,
            cn_degrees,
            interleaver,
            edge_multipliers,
            acc_prev,
            acc_cur,
            coset,
            seed,
            label,
            cn_offsets,
            vn_offsets,
            edge_vn,
            vn_edges,
        })
    }

    pub fn to_parts(&self) -> GraphParts {
        GraphParts {
            q: self.ring.q(),
            k: self.k,
            n: self.n,
            vn_degrees: self.vn_degrees.clone(),
            cn_degrees: self.cn_degrees.clone(),
            interleaver: self.interleaver.clone(),
            edge_multipliers: self.edge_multipliers.clone(),
            acc_prev: self.acc_prev.clone(),
            acc_cur: self.acc_cur.clone(),
            coset: self.coset.clone(),
            seed: self.seed,
            label: self.label.clone(),
        }
    }

    pub fn ring(&self) -> &RingParams {
        &self.ring
    }

    pub fn q(&self) -> usize {
        self.ring.q()
    }

    /// Message length in ring symbols.
    pub fn k(&self) -> usize {
        self.k
    }

    /// Codeword length (= number of check nodes).
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_edges(&self) -> usize {
        self.interleaver.len()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Information rate k·m/n in bits per real symbol.
    pub fn spectral_efficiency(&self) -> f64 {
        self.k as f64 * self.ring.m() as f64 / self.n as f64
    }

    pub fn vn_degrees(&self) -> &[u32] {
        &self.vn_degrees
    }

    pub fn cn_degrees(&self) -> &[u32] {
        &self.cn_degrees
    }

    pub fn interleaver(&self) -> &[u32] {
        &self.interleaver
    }

    pub fn edge_multipliers(&self) -> &[Sym] {
        &self.edge_multipliers
    }

    /// g'_t for every check (entry 0 is not used).
    pub fn acc_prev(&self) -> &[Sym] {
        &self.acc_prev
    }

    /// g''_t for every check.
    pub fn acc_cur(&self) -> &[Sym] {
        &self.acc_cur
    }

    pub fn coset(&self) -> &[Sym] {
        &self.coset
    }

    /// Interleaver edges of check node `t`.
    #[inline]
    pub fn cn_edges(&self, t: usize) -> std::ops::Range<usize> {
        self.cn_offsets[t] as usize..self.cn_offsets[t + 1] as usize
    }

    /// Variable node attached to edge `e`.
    #[inline]
    pub fn edge_vn(&self, e: usize) -> usize {
        self.edge_vn[e] as usize
    }

    /// Interleaver edges of variable node `v`.
    #[inline]
    pub fn vn_edges(&self, v: usize) -> &[u32] {
        &self.vn_edges[self.vn_offsets[v] as usize..self.vn_offsets[v + 1] as usize]
    }

    /// Same graph with a different coset vector.
    pub fn with_coset(&self, coset: Vec<Sym>) -> Result<Self> {
        if coset.len() != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                actual: coset.len(),
            });
        }
        self.ring.check_all(&coset)?;
        let mut g = self.clone();
        g.coset = coset;
        Ok(g)
    }

    /// Same graph with a caller-supplied interleaver (used by control experiments).
    pub fn with_interleaver(&self, interleaver: Vec<u32>) -> Result<Self> {
        let mut parts = self.to_parts();
        parts.interleaver = interleaver;
        Self::from_parts(parts)
    }

    /// Empirical edge fractions per variable-node degree.
    pub fn empirical_vn_edge_fractions(&self) -> BTreeMap<usize, f64> {
        edge_fractions(&self.vn_degrees)
    }

    /// Empirical edge fractions per check-node degree.
    pub fn empirical_cn_edge_fractions(&self) -> BTreeMap<usize, f64> {
        edge_fractions(&self.cn_degrees)
    }

    /// Count of zero-divisor edges.
    pub fn zero_divisor_edges(&self) -> usize {
        self.edge_multipliers.iter().filter(|&&h| !self.ring.is_regular(h)).count()
    }

    /// Check the placement rules: degree-2/3 variable nodes see only regular
    /// multipliers, higher degrees at most ⌈d/3⌉ zero-divisors, and every
    /// check node with two or more inputs keeps a regular one.
    pub fn verify_placement_rules(&self) -> Result<()> {
        for v in 0..self.k {
            let d = self.vn_degrees[v] as usize;
            let zd = self
                .vn_edges(v)
                .iter()
                .filter(|&&e| !self.ring.is_regular(self.edge_multipliers[e as usize]))
                .count();
            if zd > zero_divisor_cap(d) {
                return Err(Error::InvalidGraph(format!(
                    "variable node {v} (degree {d}) has {zd} zero-divisor edges"
                )));
            }
        }
        for t in 0..self.n {
            let r = self.cn_edges(t);
            if r.len() >= 2 && !r.clone().any(|e| self.ring.is_regular(self.edge_multipliers[e])) {
                return Err(Error::InvalidGraph(format!(
                    "check node {t} has no regular input"
                )));
            }
        }
        Ok(())
    }

    /// Number of (check, variable) pairs joined by more than one edge.
    pub fn parallel_edges(&self) -> usize {
        (0..self.n).map(|t| cn_conflicts(&self.edge_vn, self.cn_edges(t)).len()).sum()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&GraphFile {
            format: GRAPH_FORMAT.into(),
            version: GRAPH_VERSION,
            parts: self.to_parts(),
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: GraphFile = serde_json::from_str(text)?;
        if file.format != GRAPH_FORMAT || file.version != GRAPH_VERSION {
            return Err(Error::InvalidGraph(format!(
                "unsupported graph file {} v{}",
                file.format, file.version
            )));
        }
        Self::from_parts(file.parts)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| Error::Malformed {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
    }
}

fn edge_fractions(degrees: &[u32]) -> BTreeMap<usize, f64> {
    let total: f64 = degrees.iter().map(|&d| d as f64).sum();
    let mut out = BTreeMap::new();
    for &d in degrees {
        *out.entry(d as usize).or_insert(0.0) += d as f64 / total;
    }
    out
}

/// Edges of one check node whose variable node already appeared earlier in it.
fn cn_conflicts(edge_vn: &[u32], edges: std::ops::Range<usize>) -> Vec<usize> {
    let start = edges.start;
    edges
        .clone()
        .filter(|&e| (start..e).any(|e2| edge_vn[e2] == edge_vn[e]))
        .collect()
}

/// Largest-remainder rounding of `weights` (summing to 1) to integers summing to `total`.
pub(crate) fn largest_remainder(weights: &[f64], total: usize) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|w| w / sum * total as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    // Larger remainder first; ties go to the lower index.
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

/// Build a D-IRA Tanner graph with `n` check nodes from a profile.
pub fn build_graph(profile: &CodeProfile, n: usize, seed: u64) -> Result<CodeGraph> {
    let ring = profile.ring.clone();
    let q = ring.q();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // 1. check-node degree counts
    let cn_frac = profile.degrees.cn_node_fractions();
    let cn_degs: Vec<usize> = cn_frac.keys().copied().collect();
    let cn_w: Vec<f64> = cn_frac.values().copied().collect();
    let mut cn_counts = largest_remainder(&cn_w, n);
    if let Some(i) = cn_counts.iter().position(|&c| c == 0) {
        return Err(Error::InvalidArgument(format!(
            "n={n} too small: check degree {} rounds to zero nodes",
            cn_degs[i]
        )));
    }
    let e_cn: usize = cn_degs.iter().zip(&cn_counts).map(|(d, c)| d * c).sum();

    // 2. variable-node degree counts
    let vn_frac = profile.degrees.vn_node_fractions();
    let vn_degs: Vec<usize> = vn_frac.keys().copied().collect();
    let vn_w: Vec<f64> = vn_frac.values().copied().collect();
    let inv_mean_vn: f64 = profile
        .degrees
        .vn_edge_fractions()
        .iter()
        .map(|(&d, &f)| f / d as f64)
        .sum();
    let k = (e_cn as f64 * inv_mean_vn).round() as usize;
    if k == 0 {
        return Err(Error::InvalidArgument(format!("n={n} gives k=0")));
    }
    let vn_counts = largest_remainder(&vn_w, k);
    if let Some(i) = vn_counts.iter().position(|&c| c == 0) {
        return Err(Error::InvalidArgument(format!(
            "n={n} too small: variable degree {} rounds to zero nodes",
            vn_degs[i]
        )));
    }
    let e_vn: usize = vn_degs.iter().zip(&vn_counts).map(|(d, c)| d * c).sum();
    absorb_residual(&mut cn_counts, &cn_degs, e_vn as i64 - e_cn as i64, profile)?;

    let mut cn_degree_list: Vec<u32> = Vec::with_capacity(n);
    for (&d, &c) in cn_degs.iter().zip(&cn_counts) {
        cn_degree_list.extend(std::iter::repeat_n(d as u32, c));
    }
    cn_degree_list.shuffle(&mut rng);
    let mut vn_degree_list: Vec<u32> = Vec::with_capacity(k);
    for (&d, &c) in vn_degs.iter().zip(&vn_counts) {
        vn_degree_list.extend(std::iter::repeat_n(d as u32, c));
    }
    let num_edges = e_vn;

    // 3. multipliers
    let mut offsets = Vec::with_capacity(n + 1);
    offsets.push(0usize);
    for &d in &cn_degree_list {
        offsets.push(offsets.last().unwrap() + d as usize);
    }
    let mut edge_multipliers = vec![0 as Sym; num_edges];
    let mut distinct: Vec<u32> = cn_degree_list.clone();
    distinct.sort_unstable();
    distinct.dedup();
    for &d in &distinct {
        let dc = d as usize;
        let row = profile.multipliers.element_probs(dc).ok_or_else(|| {
            Error::InvalidProfile(format!("no multiplier row for check degree {dc}"))
        })?;
        let checks: Vec<usize> = (0..n).filter(|&t| cn_degree_list[t] == d).collect();
        let mults = stratified_multipliers(&ring, row, dc, checks.len(), &mut rng);
        for (i, &t) in checks.iter().enumerate() {
            edge_multipliers[offsets[t]..offsets[t] + dc].copy_from_slice(&mults[i * dc..(i + 1) * dc]);
        }
    }

    // 4. interleaver
    let interleaver = build_interleaver(&ring, &vn_degree_list, &offsets, &edge_multipliers, &mut rng)?;

    // 5. accumulator, 6. coset
    let regular = ring.regular_elements().to_vec();
    let mut acc_prev = Vec::with_capacity(n);
    let mut acc_cur = Vec::with_capacity(n);
    for _ in 0..n {
        acc_prev.push(*regular.choose(&mut rng).unwrap());
        acc_cur.push(*regular.choose(&mut rng).unwrap());
    }
    let coset: Vec<Sym> = (0..n).map(|_| rng.random_range(0..q) as Sym).collect();

    // 7. low-weight and degree-2 cycle repair
    let mut interleaver = interleaver;
    let mut repair_rng = ChaCha8Rng::seed_from_u64(seed);
    repair_rng.set_stream(1);
    repair_low_weight(
        &ring,
        &vn_degree_list,
        &offsets,
        &edge_multipliers,
        &acc_prev,
        &acc_cur,
        &mut interleaver,
        &mut repair_rng,
    );

    CodeGraph::from_parts(GraphParts {
        q,
        k,
        n,
        vn_degrees: vn_degree_list,
        cn_degrees: cn_degree_list,
        interleaver,
        edge_multipliers,
        acc_prev,
        acc_cur,
        coset,
        seed,
        label: profile.label.clone(),
    })
}

/// Shift single check nodes between adjacent profile degrees until the check
/// side carries `delta` more edges (negative: fewer).
fn absorb_residual(counts: &mut [usize], degs: &[usize], mut delta: i64, profile: &CodeProfile) -> Result<()> {
    let initial = delta;
    let fail = || {
        Error::InvalidArgument(format!(
            "cannot balance edge counts for profile {} (residual {initial})",
            profile.label
        ))
    };
    let pos = |d: usize| degs.iter().position(|&x| x == d);
    while delta != 0 {
        if delta > 0 {
            // lowest degree d with count > 0 whose d+1 is also in the profile
            let i = (0..degs.len())
                .find(|&i| counts[i] > 0 && pos(degs[i] + 1).is_some())
                .ok_or_else(fail)?;
            let j = pos(degs[i] + 1).unwrap();
            counts[i] -= 1;
            counts[j] += 1;
            delta -= 1;
        } else {
            let i = (0..degs.len())
                .find(|&i| counts[i] > 0 && degs[i] >= 2 && pos(degs[i] - 1).is_some())
                .ok_or_else(fail)?;
            let j = pos(degs[i] - 1).unwrap();
            counts[i] -= 1;
            counts[j] += 1;
            delta += 1;
        }
    }
    Ok(())
}

/// Multipliers for `count` check nodes of degree `dc` (consecutive chunks
/// of `dc`): exact type counts by largest remainder of the row's type
/// masses, shuffled, regular input guaranteed when `dc ≥ 2`, then elements
/// drawn within each type by the row weights.
pub(crate) fn stratified_multipliers(ring: &RingParams, row: &[f64], dc: usize, count: usize, rng: &mut ChaCha8Rng) -> Vec<Sym> {
    let mut masses = vec![0.0; ring.num_types()];
    for (a, &p) in row.iter().enumerate().skip(1) {
        masses[ring.type_index(a as Sym)] += p;
    }
    let total = count * dc;
    let type_counts = largest_remainder(&masses, total);
    let mut pool: Vec<usize> = Vec::with_capacity(total);
    for (ty, &c) in type_counts.iter().enumerate() {
        pool.extend(std::iter::repeat_n(ty, c));
    }
    pool.shuffle(rng);
    if dc >= 2 {
        ensure_regular_input(&mut pool, dc, rng);
    }
    pool.into_iter().map(|ty| draw_within_type(ring, row, ty, rng)).collect()
}

/// Reorder a shuffled pool of edge types (consecutive chunks of `dc` form one
/// check node) so that every chunk holds a type-0 entry, swapping with chunks
/// that have two or more.
fn ensure_regular_input(pool: &mut [usize], dc: usize, rng: &mut ChaCha8Rng) {
    let chunks = pool.len() / dc;
    let regulars = |pool: &[usize], c: usize| pool[c * dc..(c + 1) * dc].iter().filter(|&&t| t == 0).count();
    for c in 0..chunks {
        if regulars(pool, c) > 0 {
            continue;
        }
        let donors: Vec<usize> = (0..chunks).filter(|&o| regulars(pool, o) >= 2).collect();
        let Some(&o) = donors.choose(rng) else {
            return;
        };
        let src = (o * dc..(o + 1) * dc).find(|&i| pool[i] == 0).unwrap();
        let dst = c * dc + rng.random_range(0..dc);
        pool.swap(src, dst);
    }
}

fn draw_within_type(ring: &RingParams, row: &[f64], ty: usize, rng: &mut ChaCha8Rng) -> Sym {
    let members = &ring.types()[ty].members;
    let total: f64 = members.iter().map(|&a| row[a as usize]).sum();
    if total <= 0.0 {
        return *members.choose(rng).unwrap();
    }
    let mut u = rng.random::<f64>() * total;
    for &a in members {
        u -= row[a as usize];
        if u < 0.0 {
            return a;
        }
    }
    *members.last().unwrap()
}

fn build_interleaver(
    ring: &RingParams,
    vn_degrees: &[u32],
    cn_offsets: &[usize],
    edge_multipliers: &[Sym],
    rng: &mut ChaCha8Rng,
) -> Result<Vec<u32>> {
    let num_edges = edge_multipliers.len();
    let zd_edges: Vec<usize> = (0..num_edges).filter(|&e| !ring.is_regular(edge_multipliers[e])).collect();
    let reg_edges: Vec<usize> = (0..num_edges).filter(|&e| ring.is_regular(edge_multipliers[e])).collect();

    // Sockets eligible for zero-divisor edges: the first ⌈d/3⌉ sockets of each
    // high-degree node (sockets of one node are interchangeable).
    let mut socket_owner = Vec::with_capacity(num_edges);
    let mut eligible = Vec::new();
    let mut start = 0usize;
    for (v, &d) in vn_degrees.iter().enumerate() {
        let d = d as usize;
        eligible.extend(start..start + zero_divisor_cap(d));
        socket_owner.extend(std::iter::repeat_n(v as u32, d));
        start += d;
    }
    if zd_edges.len() > eligible.len() {
        return Err(Error::InfeasibleInterleaver {
            zero_divisor_edges: zd_edges.len(),
            capacity: eligible.len(),
        });
    }
    eligible.shuffle(rng);
    let mut is_zd_socket = vec![false; num_edges];
    for &s in &eligible[..zd_edges.len()] {
        is_zd_socket[s] = true;
    }
    let mut zd_sockets: Vec<u32> = (0..num_edges).filter(|&s| is_zd_socket[s]).map(|s| s as u32).collect();
    let mut reg_sockets: Vec<u32> = (0..num_edges).filter(|&s| !is_zd_socket[s]).map(|s| s as u32).collect();
    zd_sockets.shuffle(rng);
    reg_sockets.shuffle(rng);

    let mut interleaver = vec![0u32; num_edges];
    for (&e, &s) in zd_edges.iter().zip(&zd_sockets) {
        interleaver[e] = s;
    }
    for (&e, &s) in reg_edges.iter().zip(&reg_sockets) {
        interleaver[e] = s;
    }

    remove_parallel_edges(&mut interleaver, &socket_owner, cn_offsets, edge_multipliers, ring, rng);
    Ok(interleaver)
}

fn remove_parallel_edges(
    interleaver: &mut [u32],
    socket_owner: &[u32],
    cn_offsets: &[usize],
    edge_multipliers: &[Sym],
    ring: &RingParams,
    rng: &mut ChaCha8Rng,
) {
    let num_edges = interleaver.len();
    let n = cn_offsets.len() - 1;
    let mut edge_cn = vec![0usize; num_edges];
    for t in 0..n {
        edge_cn[cn_offsets[t]..cn_offsets[t + 1]].fill(t);
    }
    let zd: Vec<usize> = (0..num_edges).filter(|&e| !ring.is_regular(edge_multipliers[e])).collect();
    let reg: Vec<usize> = (0..num_edges).filter(|&e| ring.is_regular(edge_multipliers[e])).collect();
    // Edge `e` of check `edge_cn[e]` shares its variable node with another edge.
    let clashes = |il: &[u32], e: usize| {
        let t = edge_cn[e];
        let v = socket_owner[il[e] as usize];
        (cn_offsets[t]..cn_offsets[t + 1]).any(|x| x != e && socket_owner[il[x] as usize] == v)
    };

    let mut conflicts: Vec<usize> = Vec::new();
    for t in 0..n {
        conflicts.extend(cn_conflicts_by_owner(interleaver, socket_owner, cn_offsets[t]..cn_offsets[t + 1]));
    }
    let mut retries = 0usize;
    while let Some(e) = conflicts.pop() {
        if !clashes(interleaver, e) {
            continue;
        }
        let pool = if ring.is_regular(edge_multipliers[e]) { &reg } else { &zd };
        loop {
            if retries >= MAX_INTERLEAVER_RETRIES {
                log::warn!("interleaver: parallel edges remain after {retries} swap attempts");
                return;
            }
            retries += 1;
            let other = pool[rng.random_range(0..pool.len())];
            if edge_cn[other] == edge_cn[e] {
                continue;
            }
            interleaver.swap(e, other);
            if clashes(interleaver, e) || clashes(interleaver, other) {
                interleaver.swap(e, other);
                continue;
            }
            break;
        }
    }
}

/// Weight of the codeword of a message whose only nonzero symbol is `a`,
/// fed through `edges` as (check, multiplier); counting stops at `limit`.
fn unit_weight(
    ring: &RingParams,
    edges: &mut [(usize, Sym)],
    a: Sym,
    acc_prev: &[Sym],
    acc_cur: &[Sym],
    limit: usize,
) -> usize {
    let n = acc_cur.len();
    edges.sort_unstable();
    let mut state: Sym = 0;
    let mut weight = 0usize;
    let mut i = 0;
    let mut t = edges[0].0;
    while t < n {
        let mut s: Sym = 0;
        while i < edges.len() && edges[i].0 == t {
            s = ring.add(s, ring.mul(edges[i].1, a));
            i += 1;
        }
        if t > 0 {
            s = ring.add(s, ring.mul(acc_prev[t], state));
        }
        state = ring.mul(ring.inv_regular(acc_cur[t]), ring.neg(s));
        if state != 0 {
            weight += 1;
            if weight >= limit {
                return weight;
            }
            t += 1;
        } else if i < edges.len() {
            // a zero state stays zero until the next input
            t = edges[i].0;
        } else {
            break;
        }
    }
    weight
}

#[allow(clippy::too_many_arguments)]
fn repair_low_weight(
    ring: &RingParams,
    vn_degrees: &[u32],
    cn_offsets: &[usize],
    edge_multipliers: &[Sym],
    acc_prev: &[Sym],
    acc_cur: &[Sym],
    interleaver: &mut [u32],
    rng: &mut ChaCha8Rng,
) {
    let n = cn_offsets.len() - 1;
    let num_edges = interleaver.len();
    let limit = MIN_UNIT_WEIGHT.min(n / 4).max(1);
    let mut socket_owner = Vec::with_capacity(num_edges);
    for (v, &d) in vn_degrees.iter().enumerate() {
        socket_owner.extend(std::iter::repeat_n(v, d as usize));
    }
    let mut edge_cn = vec![0usize; num_edges];
    for t in 0..n {
        edge_cn[cn_offsets[t]..cn_offsets[t + 1]].fill(t);
    }
    let mut vn_edges: Vec<Vec<usize>> = vec![Vec::new(); vn_degrees.len()];
    for e in 0..num_edges {
        vn_edges[socket_owner[interleaver[e] as usize]].push(e);
    }
    let low = |vn_edges: &[Vec<usize>], v: usize| {
        let mut list: Vec<(usize, Sym)> = vn_edges[v].iter().map(|&e| (edge_cn[e], edge_multipliers[e])).collect();
        (1..ring.q()).any(|a| unit_weight(ring, &mut list, a as Sym, acc_prev, acc_cur, limit) < limit)
    };
    // Degree-2 message nodes act as edges between their two checks; a cycle
    // of them is a stopping set that BP cannot resolve at any SNR.
    let on_cycle = |il: &[u32], vn_edges: &[Vec<usize>], v: usize| {
        if vn_edges[v].len() != 2 {
            return false;
        }
        let (from, to) = (edge_cn[vn_edges[v][0]], edge_cn[vn_edges[v][1]]);
        let mut seen_vn = vec![v];
        let mut stack = vec![from];
        let mut seen_cn = vec![from];
        while let Some(t) = stack.pop() {
            for x in cn_offsets[t]..cn_offsets[t + 1] {
                let u = socket_owner[il[x] as usize];
                if vn_edges[u].len() != 2 || seen_vn.contains(&u) {
                    continue;
                }
                seen_vn.push(u);
                let other = vn_edges[u].iter().map(|&e| edge_cn[e]).find(|&c| c != t).unwrap_or(t);
                if other == to {
                    return true;
                }
                if !seen_cn.contains(&other) {
                    seen_cn.push(other);
                    stack.push(other);
                }
            }
        }
        false
    };
    let stuck = |il: &[u32], vn_edges: &[Vec<usize>], v: usize| low(vn_edges, v) || on_cycle(il, vn_edges, v);
    let clashes = |il: &[u32], e: usize| {
        let t = edge_cn[e];
        let v = socket_owner[il[e] as usize];
        (cn_offsets[t]..cn_offsets[t + 1]).any(|x| x != e && socket_owner[il[x] as usize] == v)
    };
    let zd: Vec<usize> = (0..num_edges).filter(|&e| !ring.is_regular(edge_multipliers[e])).collect();
    let reg: Vec<usize> = (0..num_edges).filter(|&e| ring.is_regular(edge_multipliers[e])).collect();

    let bad: Vec<usize> = (0..vn_degrees.len()).filter(|&v| stuck(interleaver, &vn_edges, v)).collect();
    let mut retries = 0usize;
    for v in bad {
        while stuck(interleaver, &vn_edges, v) {
            if retries >= MAX_INTERLEAVER_RETRIES {
                log::warn!("interleaver: low-weight unit codewords or degree-2 cycles remain after {retries} swap attempts");
                return;
            }
            retries += 1;
            let e = *vn_edges[v].choose(rng).unwrap();
            let pool = if ring.is_regular(edge_multipliers[e]) { &reg } else { &zd };
            let f = pool[rng.random_range(0..pool.len())];
            let w = socket_owner[interleaver[f] as usize];
            if w == v {
                continue;
            }
            let swap = |il: &mut [u32], lists: &mut [Vec<usize>]| {
                il.swap(e, f);
                let pe = lists[v].iter().position(|&x| x == e).unwrap();
                let pf = lists[w].iter().position(|&x| x == f).unwrap();
                lists[v][pe] = f;
                lists[w][pf] = e;
            };
            swap(interleaver, &mut vn_edges);
            if clashes(interleaver, e) || clashes(interleaver, f) || stuck(interleaver, &vn_edges, w) {
                // undo: after the swap, e belongs to w and f to v
                interleaver.swap(e, f);
                let pe = vn_edges[w].iter().position(|&x| x == e).unwrap();
                let pf = vn_edges[v].iter().position(|&x| x == f).unwrap();
                vn_edges[w][pe] = f;
                vn_edges[v][pf] = e;
            }
        }
    }
}

fn cn_conflicts_by_owner(interleaver: &[u32], socket_owner: &[u32], edges: std::ops::Range<usize>) -> Vec<usize> {
    let start = edges.start;
    let vn = |x: usize| socket_owner[interleaver[x] as usize];
    edges.filter(|&e| (start..e).any(|e2| vn(e2) == vn(e))).collect()
}

/// Joint check of message and codeword against every check-node constraint.
pub fn parity_check(graph: &CodeGraph, message: &[Sym], codeword: &[Sym]) -> Result<bool> {
    if message.len() != graph.k() {
        return Err(Error::LengthMismatch {
            expected: graph.k(),
            actual: message.len(),
        });
    }
    if codeword.len() != graph.n() {
        return Err(Error::LengthMismatch {
            expected: graph.n(),
            actual: codeword.len(),
        });
    }
    graph.ring().check_all(message)?;
    graph.ring().check_all(codeword)?;
    Ok(first_failed_check(graph, message, codeword).is_none())
}

/// Index of the first violated check node, if any. Inputs must be canonical.
pub(crate) fn first_failed_check(graph: &CodeGraph, message: &[Sym], codeword: &[Sym]) -> Option<usize> {
    let ring = graph.ring();
    let h = graph.edge_multipliers();
    (0..graph.n()).find(|&t| {
        let mut s: Sym = 0;
        for e in graph.cn_edges(t) {
            s = ring.add(s, ring.mul(h[e], message[graph.edge_vn(e)]));
        }
        if t > 0 {
            s = ring.add(s, ring.mul(graph.acc_prev()[t], codeword[t - 1]));
        }
        s = ring.add(s, ring.mul(graph.acc_cur()[t], codeword[t]));
        s != 0
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::{bundled, DegreeProfile, MultiplierDistribution};

    #[test]
    fn largest_remainder_sums() {
        assert_eq!(largest_remainder(&[0.5, 0.25, 0.25], 10), vec![5, 3, 2]);
        let c = largest_remainder(&[0.3333, 0.3333, 0.3334], 100);
        assert_eq!(c.iter().sum::<usize>(), 100);
    }

    #[test]
    fn zero_divisor_caps() {
        assert_eq!(zero_divisor_cap(2), 0);
        assert_eq!(zero_divisor_cap(3), 0);
        assert_eq!(zero_divisor_cap(4), 2);
        assert_eq!(zero_divisor_cap(9), 3);
        assert_eq!(zero_divisor_cap(22), 8);
    }

    #[test]
    fn q4_r1_graph_matches_profile() {
        let p = bundled("q4_R1.0").unwrap();
        let g = build_graph(&p, 10_000, 1).unwrap();
        assert_eq!(g.n(), 10_000);
        assert_eq!(g.k(), 5000);
        let sum_vn: u32 = g.vn_degrees().iter().sum();
        let sum_cn: u32 = g.cn_degrees().iter().sum();
        assert_eq!(sum_vn, sum_cn);
        assert_eq!(sum_vn as usize, g.num_edges());
        for (d, f) in p.degrees.vn_edge_fractions() {
            let got = g.empirical_vn_edge_fractions().get(d).copied().unwrap_or(0.0);
            assert!((got - f).abs() < 1e-2, "vn degree {d}: {got} vs {f}");
        }
        for (d, f) in p.degrees.cn_edge_fractions() {
            let got = g.empirical_cn_edge_fractions().get(d).copied().unwrap_or(0.0);
            assert!((got - f).abs() < 1e-2, "cn degree {d}: {got} vs {f}");
        }
        g.verify_placement_rules().unwrap();
        assert_eq!(g.parallel_edges(), 0);
        assert!(g.acc_cur().iter().all(|&a| g.ring().is_regular(a)));
        assert!(g.acc_prev().iter().all(|&a| g.ring().is_regular(a)));
    }

    #[test]
    fn deterministic_in_seed() {
        let p = bundled("q8_R1.5").unwrap();
        let a = build_graph(&p, 3000, 7).unwrap();
        let b = build_graph(&p, 3000, 7).unwrap();
        let c = build_graph(&p, 3000, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.interleaver(), c.interleaver());
    }

    #[test]
    fn all_regular_profile_has_no_zero_divisor_edges() {
        let ring = RingParams::new(2).unwrap();
        let deg = DegreeProfile::new([(3, 0.5), (6, 0.5)].into(), [(2, 0.6), (3, 0.4)].into()).unwrap();
        let mult = MultiplierDistribution::all_regular(&ring, [2, 3]);
        let p = CodeProfile::new(ring, deg, mult, "reg").unwrap();
        let g = build_graph(&p, 2000, 3).unwrap();
        assert_eq!(g.zero_divisor_edges(), 0);
    }

    #[test]
    fn infeasible_interleaver_reports_counts() {
        let ring = RingParams::new(2).unwrap();
        let deg = DegreeProfile::new([(2, 0.5), (4, 0.5)].into(), [(2, 1.0)].into()).unwrap();
        let mult = MultiplierDistribution::uniform_rows(&ring, [2], &[0.4, 0.6]).unwrap();
        let p = CodeProfile::new(ring, deg, mult, "zd-heavy").unwrap();
        match build_graph(&p, 1000, 1) {
            Err(Error::InfeasibleInterleaver {
                zero_divisor_edges,
                capacity,
            }) => assert!(zero_divisor_edges > capacity),
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    #[test]
    fn bundled_profiles_all_build() {
        for label in crate::profile::bundled_labels() {
            let p = bundled(label).unwrap();
            let g = build_graph(&p, 4000, 11).unwrap_or_else(|e| panic!("{label}: {e}"));
            g.verify_placement_rules().unwrap();
        }
    }

    #[test]
    fn json_round_trip() {
        let p = bundled("q4_R1.5").unwrap();
        let g = build_graph(&p, 400, 5).unwrap();
        let back = CodeGraph::from_json(&g.to_json().unwrap()).unwrap();
        assert_eq!(g, back);
        let bad = g.to_json().unwrap().replace("dira-graph", "nope");
        assert!(CodeGraph::from_json(&bad).is_err());
    }

    #[test]
    fn from_parts_rejects_inconsistent_graphs() {
        let p = bundled("q4_R1.0").unwrap();
        let g = build_graph(&p, 500, 5).unwrap();
        let mut parts = g.to_parts();
        parts.interleaver[0] = parts.interleaver[1];
        assert!(CodeGraph::from_parts(parts).is_err());
        let mut parts = g.to_parts();
        parts.acc_cur[3] = 2;
        assert!(CodeGraph::from_parts(parts).is_err());
        let mut parts = g.to_parts();
        parts.vn_degrees[0] += 1;
        assert!(CodeGraph::from_parts(parts).is_err());
    }

    #[test]
    fn unit_messages_have_no_low_weight_codewords() {
        for (label, n, seed) in [("q4_R1.0", 3000, 7), ("q8_R2.0", 2000, 3), ("dpc_q16_Rc5_8", 1500, 5)] {
            let p = bundled(label).unwrap();
            let g = build_graph(&p, n, seed).unwrap();
            let limit = MIN_UNIT_WEIGHT.min(n / 4);
            for v in 0..g.k() {
                for a in 1..g.q() {
                    let mut w = vec![0 as Sym; g.k()];
                    w[v] = a as Sym;
                    let c = crate::codec::encode(&g, &w).unwrap();
                    let weight = c.iter().filter(|&&x| x != 0).count();
                    assert!(weight >= limit, "{label}: node {v}, symbol {a}: weight {weight}");
                }
            }
        }
    }

    #[test]
    fn degree_two_message_nodes_form_a_forest() {
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for (label, n) in [("q4_R1.0", 500), ("q4_R1.0", 3000), ("q8_R1.0", 800), ("q4_R0.5", 3000)] {
            for seed in 0..8 {
                let g = build_graph(&bundled(label).unwrap(), n, seed).unwrap();
                let mut cn_of = vec![0usize; g.num_edges()];
                for t in 0..g.n() {
                    for e in g.cn_edges(t) {
                        cn_of[e] = t;
                    }
                }
                let mut parent: Vec<usize> = (0..g.n()).collect();
                for v in (0..g.k()).filter(|&v| g.vn_edges(v).len() == 2) {
                    let a = find(&mut parent, cn_of[g.vn_edges(v)[0] as usize]);
                    let b = find(&mut parent, cn_of[g.vn_edges(v)[1] as usize]);
                    assert_ne!(a, b, "{label} n={n} seed={seed}: node {v} closes a cycle");
                    parent[a] = b;
                }
            }
        }
    }

    #[test]
    fn unit_weight_matches_encoder() {
        let p = bundled("q4_R1.0").unwrap();
        let g = build_graph(&p, 600, 2).unwrap();
        for v in (0..g.k()).step_by(7) {
            let mut list: Vec<(usize, Sym)> = g
                .vn_edges(v)
                .iter()
                .map(|&e| {
                    let e = e as usize;
                    ((0..g.n()).find(|&t| g.cn_edges(t).contains(&e)).unwrap(), g.edge_multipliers()[e])
                })
                .collect();
            for a in 1..4u8 {
                let mut w = vec![0; g.k()];
                w[v] = a;
                let c = crate::codec::encode(&g, &w).unwrap();
                let weight = c.iter().filter(|&&x| x != 0).count();
                assert_eq!(unit_weight(g.ring(), &mut list, a, g.acc_prev(), g.acc_cur(), usize::MAX), weight);
            }
        }
    }
}
