//! EXIT curves, the tunnel test, and the alternating degree-distribution LP.
//!
//! The decoding trajectory alternates `y = CND(x)` and `x' = VND(y)`, where
//! x is the a-priori MI of the check side. The tunnel is open when
//! `VND(CND(x)) > x` on the design range of x.

use std::collections::BTreeMap;
use std::io::Write;

use microlp::{ComparisonOp, OptimizationDirection, Problem};
use serde::{Deserialize, Serialize};

use super::chain::{AppSource, AwgnSource, ChainModel, ChainOptions};
use super::j::vnd_exit;
use crate::error::{Error, Result};
use crate::profile::{CodeProfile, DegreeProfile, MultiplierDistribution};
use crate::ring::RingParams;
use crate::sim::snr_to_sigma2;

/// Default grid size on `[0, GRID_TOP]`.
pub const GRID_POINTS: usize = 101;
pub const GRID_TOP: f64 = 0.9999;
/// Upper end of the check-side a-priori MI range on which the tunnel must be open.
pub const TUNNEL_LIMIT: f64 = 0.85;
pub const MAX_DESIGN_ROUNDS: usize = 10;

/// The standard a-priori grid.
pub fn standard_grid(points: usize) -> Vec<f64> {
    let points = points.max(2);
    (0..points).map(|k| GRID_TOP * k as f64 / (points - 1) as f64).collect()
}

/// Sampled transfer curve `I_E(I_A)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExitCurve {
    pub label: String,
    /// Channel noise variance, if the curve depends on it.
    pub sigma2: Option<f64>,
    pub i_a: Vec<f64>,
    pub i_e: Vec<f64>,
}

impl ExitCurve {
    pub fn new(label: impl Into<String>, sigma2: Option<f64>, i_a: Vec<f64>, i_e: Vec<f64>) -> Result<Self> {
        if i_a.len() != i_e.len() || i_a.len() < 2 {
            return Err(Error::LengthMismatch {
                expected: i_a.len(),
                actual: i_e.len(),
            });
        }
        if i_a.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("curve grid must be strictly increasing".into()));
        }
        if i_e.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidArgument("curve values must lie in [0, 1]".into()));
        }
        Ok(Self {
            label: label.into(),
            sigma2,
            i_a,
            i_e,
        })
    }

    /// Linear interpolation, clamped to the grid ends.
    pub fn eval(&self, x: f64) -> f64 {
        interp(&self.i_a, &self.i_e, x)
    }

    /// Largest drop between consecutive samples (0 for a nondecreasing curve).
    pub fn max_decrease(&self) -> f64 {
        self.i_e.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max)
    }

    /// CSV with columns `i_a,i_e`.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "i_a,i_e")?;
        for (a, e) in self.i_a.iter().zip(&self.i_e) {
            writeln!(out, "{a},{e}")?;
        }
        Ok(())
    }
}

fn interp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    if x <= xs[0] {
        return ys[0];
    }
    let last = xs.len() - 1;
    if x >= xs[last] {
        return ys[last];
    }
    let k = xs.partition_point(|&v| v <= x) - 1;
    let f = (x - xs[k]) / (xs[k + 1] - xs[k]);
    ys[k] * (1.0 - f) + ys[k + 1] * f
}

/// Central-difference slope of `ys` over `xs`, clamped at zero (monotone curves).
fn slopes(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let n = xs.len();
    (0..n)
        .map(|k| {
            let (a, b) = (k.saturating_sub(1), (k + 1).min(n - 1));
            ((ys[b] - ys[a]) / (xs[b] - xs[a])).max(0.0)
        })
        .collect()
}

/// VND mixture `Σ_d λ_d J((d−1)J^{-1}(I_A))` for edge fractions λ.
pub fn vnd_mixture(i_a: f64, vn_edge_fractions: &BTreeMap<usize, f64>, q: usize) -> f64 {
    vn_edge_fractions.iter().map(|(&d, &f)| f * vnd_exit(i_a, d, q)).sum()
}

pub fn vnd_curve(vn_edge_fractions: &BTreeMap<usize, f64>, q: usize, grid: &[f64]) -> Result<ExitCurve> {
    let i_e = grid.iter().map(|&x| vnd_mixture(x, vn_edge_fractions, q).clamp(0.0, 1.0)).collect();
    ExitCurve::new("vnd", None, grid.to_vec(), i_e)
}

/// Inverse of the (increasing) VND mixture by bisection.
fn vnd_mixture_inverse(y: f64, vn: &BTreeMap<usize, f64>, q: usize) -> f64 {
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if vnd_mixture(mid, vn, q) < y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// CND curves of a chain model: the mixture and one curve per check degree.
#[derive(Debug, Clone)]
pub struct CndCurves {
    pub mixture: ExitCurve,
    pub by_degree: BTreeMap<usize, ExitCurve>,
}

/// Simulate CND curves on `grid`.
pub fn cnd_curves(model: &ChainModel, source: &dyn AppSource, opts: &ChainOptions, grid: &[f64], sigma2: Option<f64>) -> Result<CndCurves> {
    let mut mix = Vec::with_capacity(grid.len());
    let mut per: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for &x in grid {
        let out = model.simulate(x, source, opts)?;
        mix.push(out.mutual_information().clamp(0.0, 1.0));
        for (d, v) in out.mi_by_degree() {
            per.entry(d).or_default().push(v.clamp(0.0, 1.0));
        }
    }
    let by_degree = per
        .into_iter()
        .map(|(d, v)| Ok((d, ExitCurve::new(format!("cnd_d{d}"), sigma2, grid.to_vec(), v)?)))
        .collect::<Result<_>>()?;
    Ok(CndCurves {
        mixture: ExitCurve::new("cnd", sigma2, grid.to_vec(), mix)?,
        by_degree,
    })
}

/// Outcome of a tunnel test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TunnelReport {
    pub open: bool,
    /// Smallest `VND(CND(x)) − x` over the tested grid.
    pub min_gap: f64,
    /// Check-side a-priori MI where the smallest gap occurs.
    pub at: f64,
}

/// Simulation settings shared by the tunnel test and the design.
#[derive(Debug, Clone)]
pub struct ExitOptions {
    pub grid_points: usize,
    pub chain: ChainOptions,
    pub tunnel_limit: f64,
}

impl Default for ExitOptions {
    fn default() -> Self {
        Self {
            grid_points: GRID_POINTS,
            chain: ChainOptions::default(),
            tunnel_limit: TUNNEL_LIMIT,
        }
    }
}

impl ExitOptions {
    fn tunnel_grid(&self) -> Vec<f64> {
        standard_grid(self.grid_points).into_iter().filter(|&x| x <= self.tunnel_limit).collect()
    }
}

/// Tunnel test of a profile with parity APPs from `source`.
pub fn tunnel_test(profile: &CodeProfile, source: &dyn AppSource, opts: &ExitOptions) -> Result<TunnelReport> {
    let q = profile.ring.q();
    let model = ChainModel::new(&profile.ring, &profile.degrees.cn_node_fractions(), &profile.multipliers, opts.chain.length)?;
    let vn = profile.degrees.vn_edge_fractions();
    let mut report = TunnelReport {
        open: true,
        min_gap: f64::INFINITY,
        at: 0.0,
    };
    for x in opts.tunnel_grid() {
        let y = model.simulate(x, source, &opts.chain)?.mutual_information();
        let gap = vnd_mixture(y, vn, q) - x;
        if gap < report.min_gap {
            report.min_gap = gap;
            report.at = x;
        }
        if gap <= 0.0 {
            report.open = false;
            break;
        }
    }
    Ok(report)
}

/// Largest SNR (dB, over q-PAM AWGN) at which the tunnel is closed, found
/// by bisection on `[lo_db, hi_db]` to `tol_db`: the EXIT threshold.
pub fn tunnel_threshold(profile: &CodeProfile, lo_db: f64, hi_db: f64, tol_db: f64, opts: &ExitOptions) -> Result<f64> {
    let q = profile.ring.q();
    let open = |snr: f64| -> Result<bool> { Ok(tunnel_test(profile, &AwgnSource::new(q, snr_to_sigma2(snr)), opts)?.open) };
    if !open(hi_db)? {
        return Err(Error::Infeasible(format!("tunnel closed at the upper end {hi_db} dB")));
    }
    if open(lo_db)? {
        return Ok(lo_db);
    }
    let (mut lo, mut hi) = (lo_db, hi_db);
    while hi - lo > tol_db {
        let mid = 0.5 * (lo + hi);
        if open(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Inputs of [`optimize_degrees`].
#[derive(Debug, Clone)]
pub struct DesignSpec {
    /// Target coding rate R_s.
    pub rate: f64,
    pub ring: RingParams,
    pub sigma2: f64,
    /// Multiplier rows for every candidate check degree.
    pub multipliers: MultiplierDistribution,
    /// Candidate variable-node degrees (each ≥ 2).
    pub vn_degrees: Vec<usize>,
    /// Candidate check-node degrees (each ≥ 1).
    pub cn_degrees: Vec<usize>,
    /// Node fraction given to every candidate check degree while its curve is
    /// measured inside the current mixture.
    pub probe_fraction: f64,
    pub max_rounds: usize,
}

impl DesignSpec {
    /// Candidates 2..=D_v and 1..=D_c.
    pub fn new(rate: f64, ring: RingParams, sigma2: f64, multipliers: MultiplierDistribution, d_v: usize, d_c: usize) -> Self {
        Self {
            rate,
            ring,
            sigma2,
            multipliers,
            vn_degrees: (2..=d_v).collect(),
            cn_degrees: (1..=d_c).collect(),
            probe_fraction: 0.02,
            max_rounds: MAX_DESIGN_ROUNDS,
        }
    }
}

/// Result of the alternating design.
#[derive(Debug, Clone, Serialize)]
pub struct DegreeDesign {
    #[serde(skip)]
    pub degrees: DegreeProfile,
    pub vn_edge_fractions: BTreeMap<usize, f64>,
    pub cn_edge_fractions: BTreeMap<usize, f64>,
    /// Normalized minimum gap of the last half-step.
    pub min_gap: f64,
    pub rounds: usize,
    /// Tunnel test of the returned profile with the design's curves.
    pub tunnel: TunnelReport,
}

/// Round tiny LP fractions to zero and renormalize.
fn clean(map: BTreeMap<usize, f64>) -> BTreeMap<usize, f64> {
    let kept: BTreeMap<usize, f64> = map.into_iter().filter(|&(_, f)| f > 1e-9).collect();
    let s: f64 = kept.values().sum();
    kept.into_iter().map(|(d, f)| (d, f / s)).collect()
}

fn inverse_mean(map: &BTreeMap<usize, f64>) -> f64 {
    map.iter().map(|(&d, &f)| f / d as f64).sum()
}

/// Solve `max t` subject to `Σ_i a_{k,i} w_i − b_k ≥ t·n_k` on every grid
/// point k, `Σ w = 1`, `Σ w_i/d_i = rate_rhs`, `w ≥ 0`. Returns (w, t).
fn gap_lp(degrees: &[usize], a: &[Vec<f64>], b: &[f64], norm: &[f64], rate_rhs: f64) -> Result<(Vec<f64>, f64)> {
    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let w: Vec<_> = degrees.iter().map(|_| lp.add_var(0.0, (0.0, 1.0))).collect();
    let t = lp.add_var(1.0, (-1.0, 1.0));
    for k in 0..b.len() {
        let mut expr: Vec<(microlp::Variable, f64)> = w.iter().zip(&a[k]).map(|(&v, &c)| (v, c)).collect();
        expr.push((t, -norm[k]));
        lp.add_constraint(expr.as_slice(), ComparisonOp::Ge, b[k]);
    }
    let ones: Vec<(microlp::Variable, f64)> = w.iter().map(|&v| (v, 1.0)).collect();
    lp.add_constraint(ones.as_slice(), ComparisonOp::Eq, 1.0);
    let inv: Vec<(microlp::Variable, f64)> = w.iter().zip(degrees).map(|(&v, &d)| (v, 1.0 / d as f64)).collect();
    lp.add_constraint(inv.as_slice(), ComparisonOp::Eq, rate_rhs);
    let sol = lp
        .solve()
        .map_err(|e| Error::Infeasible(format!("degree LP: {e}")))?
        .into_solution()
        .map_err(|_| Error::Infeasible("degree LP interrupted".into()))?;
    Ok((w.iter().map(|&v| sol.var_value(v).max(0.0)).collect(), sol.var_value(t)))
}

/// Degree design: alternate LPs over VN and CN edge fractions, starting from
/// the check mixture (ρ_1, ρ_3) = (0.1, 0.9), maximizing the narrowest
/// normalized gap between the curves on the check-side range `[0, limit]`.
/// Per-degree CND curves are measured inside the current check mixture
/// with every candidate degree present at `probe_fraction` of the nodes.
pub fn optimize_degrees(spec: &DesignSpec, opts: &ExitOptions) -> Result<DegreeDesign> {
    let q = spec.ring.q();
    if !(spec.rate > 0.0 && spec.rate < 1.0) {
        return Err(Error::InvalidArgument(format!("rate {} outside (0, 1)", spec.rate)));
    }
    if spec.vn_degrees.iter().any(|&d| d < 2) || spec.cn_degrees.contains(&0) {
        return Err(Error::InvalidArgument("variable degrees must be ≥ 2 and check degrees ≥ 1".into()));
    }
    let source = AwgnSource::new(q, spec.sigma2);
    let grid = opts.tunnel_grid();
    let mut rho: BTreeMap<usize, f64> = BTreeMap::new();
    for (d, f) in [(1usize, 0.1), (3, 0.9)] {
        if spec.cn_degrees.contains(&d) {
            rho.insert(d, f);
        }
    }
    if rho.is_empty() {
        rho.insert(spec.cn_degrees[0], 1.0);
    }
    rho = clean(rho);
    let mut lambda: BTreeMap<usize, f64> = BTreeMap::new();
    let mut min_gap = f64::NEG_INFINITY;
    let mut rounds = 0;

    for round in 1..=spec.max_rounds {
        rounds = round;
        // Per-degree CND curves within the current mixture.
        let curves = measure_cnd(spec, &rho, &source, opts, &grid)?;
        let c_mix: Vec<f64> = grid
            .iter()
            .enumerate()
            .map(|(k, _)| rho.iter().map(|(d, f)| f * curves[d][k]).sum())
            .collect();

        // VN step: Σ λ_d v_d(c(x)) − x ≥ t·sqrt(1 + (dx/dc)²).
        let slope = slopes(&grid, &c_mix);
        let a: Vec<Vec<f64>> = c_mix.iter().map(|&y| spec.vn_degrees.iter().map(|&d| vnd_exit(y, d, q)).collect()).collect();
        let norm: Vec<f64> = slope.iter().map(|&s| (1.0 + (1.0 / s.max(1e-6)).powi(2)).sqrt()).collect();
        let rate_vn = spec.rate * inverse_mean(&rho);
        let (w, t) = gap_lp(&spec.vn_degrees, &a, &grid, &norm, rate_vn)?;
        lambda = clean(spec.vn_degrees.iter().copied().zip(w).collect());
        log::debug!("design round {round}: VN step gap {t:.4}");

        // CN step: Σ ρ_d c_d(x) − v^{-1}(x) ≥ t·sqrt(1 + (v^{-1})'(x)²).
        let v_inv: Vec<f64> = grid.iter().map(|&x| vnd_mixture_inverse(x, &lambda, q)).collect();
        let slope_inv = slopes(&grid, &v_inv);
        let a: Vec<Vec<f64>> = (0..grid.len())
            .map(|k| spec.cn_degrees.iter().map(|d| curves[d][k]).collect())
            .collect();
        let norm: Vec<f64> = slope_inv.iter().map(|&s| (1.0 + s * s).sqrt()).collect();
        let rate_cn = inverse_mean(&lambda) / spec.rate;
        let (w, t) = gap_lp(&spec.cn_degrees, &a, &v_inv, &norm, rate_cn)?;
        rho = clean(spec.cn_degrees.iter().copied().zip(w).collect());
        min_gap = t;
        log::debug!("design round {round}: CN step gap {t:.4}");
    }

    let degrees = DegreeProfile::from_edge_fractions(lambda.clone(), rho.clone())?;
    let profile = CodeProfile::new(spec.ring.clone(), degrees.clone(), spec.multipliers.clone(), "design")?;
    let tunnel = tunnel_test(&profile, &source, opts)?;
    if !tunnel.open {
        return Err(Error::Infeasible(format!(
            "tunnel closed at check-side a-priori MI {:.4} (gap {:.4}) for σ²={}",
            tunnel.at, tunnel.min_gap, spec.sigma2
        )));
    }
    Ok(DegreeDesign {
        degrees,
        vn_edge_fractions: lambda,
        cn_edge_fractions: rho,
        min_gap,
        rounds,
        tunnel,
    })
}

/// Per-degree CND values on `grid` for every candidate degree, measured in
/// a chain whose node mix is the current ρ plus `probe_fraction` of each
/// candidate.
fn measure_cnd(
    spec: &DesignSpec,
    rho: &BTreeMap<usize, f64>,
    source: &AwgnSource,
    opts: &ExitOptions,
    grid: &[f64],
) -> Result<BTreeMap<usize, Vec<f64>>> {
    let mut nodes: BTreeMap<usize, f64> = rho.iter().map(|(&d, &f)| (d, f / d as f64)).collect();
    let s: f64 = nodes.values().sum();
    nodes.values_mut().for_each(|v| *v *= (1.0 - spec.probe_fraction * spec.cn_degrees.len() as f64).max(0.0) / s);
    for &d in &spec.cn_degrees {
        *nodes.entry(d).or_insert(0.0) += spec.probe_fraction;
    }
    let model = ChainModel::new(&spec.ring, &nodes, &spec.multipliers, opts.chain.length)?;
    let curves = cnd_curves(&model, source, &opts.chain, grid, Some(spec.sigma2))?;
    spec.cn_degrees
        .iter()
        .map(|&d| {
            curves
                .by_degree
                .get(&d)
                .map(|c| (d, c.i_e.clone()))
                .ok_or_else(|| Error::InvalidArgument(format!("check degree {d} absent from the probe chain")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_and_interpolation() {
        let g = standard_grid(GRID_POINTS);
        assert_eq!(g.len(), 101);
        assert_eq!(g[0], 0.0);
        assert!((g[100] - GRID_TOP).abs() < 1e-15);
        let c = ExitCurve::new("x", None, vec![0.0, 0.5, 1.0], vec![0.0, 0.25, 1.0]).unwrap();
        assert!((c.eval(0.25) - 0.125).abs() < 1e-15);
        assert!((c.eval(0.75) - 0.625).abs() < 1e-15);
        assert_eq!(c.eval(2.0), 1.0);
        assert_eq!(c.max_decrease(), 0.0);
        let mut csv = Vec::new();
        c.write_csv(&mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 4);
    }

    #[test]
    fn lp_respects_constraints() {
        // two degrees, rate constraint pins the mixture
        let degrees = [2usize, 4];
        let a = vec![vec![0.5, 0.9], vec![0.6, 0.95]];
        let (w, t) = gap_lp(&degrees, &a, &[0.1, 0.2], &[1.0, 1.0], 0.5 * 0.5 + 0.5 * 0.25).unwrap();
        assert!((w[0] - 0.5).abs() < 1e-8 && (w[1] - 0.5).abs() < 1e-8);
        // t = min(0.7 − 0.1, 0.775 − 0.2)
        assert!((t - 0.575).abs() < 1e-8);
    }

    #[test]
    fn vnd_inverse_round_trip() {
        let vn = BTreeMap::from([(2, 0.3), (3, 0.7)]);
        for y in [0.1, 0.4, 0.8] {
            let x = vnd_mixture_inverse(y, &vn, 4);
            assert!((vnd_mixture(x, &vn, 4) - y).abs() < 1e-6);
        }
    }
}
