//! Deterministic SNR sweeps.
//!
//! Every frame draws from its own generator, seeded by (run seed, SNR
//! index, frame index), and frames are processed in fixed-size batches
//! whose outcomes are folded in frame order. The stopping rule is checked
//! only between batches, so the frames simulated and the totals do not
//! depend on the worker count.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::capacity::{capacity_threshold, combination_threshold, snr_to_sigma2};
use crate::bp::{channel_apps, Decoder};
use crate::codec::{encode, PamMapper};
use crate::error::{Error, Result};
use crate::graph::{build_graph, CodeGraph};
use crate::multiuser::{
    cf_transmit, dpc_transmit, linear_combo, CfBinner, CfScenario, DpcScenario, DpcWindow, InterferencePrior,
};
use crate::profile::{bundled, bundled_labels, load_profile, CodeProfile};
use crate::ring::Sym;

/// Smallest admissible error-event target.
pub const MIN_ERROR_EVENTS: usize = 50;

/// Channel and receiver of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScenarioKind {
    /// Single user over AWGN.
    P2p,
    /// Compute-forward of one combination `⊕ α_i w_i` from `Σ h_i x_i + z`.
    Cf { gains: Vec<f64>, alpha: Vec<Sym> },
    /// Dirty-paper coding against interference drawn from `prior`.
    Dpc {
        prior: InterferencePrior,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        receiver_prior: Option<InterferencePrior>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        window: Option<DpcWindow>,
    },
}

fn default_batch() -> usize {
    16
}

fn default_min_errors() -> usize {
    100
}

fn default_max_iter() -> usize {
    crate::bp::DEFAULT_MAX_ITER
}

/// A sweep description. `profile` is a bundled label or a profile file path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub scenario: ScenarioKind,
    pub profile: String,
    pub n: usize,
    #[serde(default)]
    pub graph_seed: u64,
    pub snr_grid: Vec<f64>,
    pub max_frames: usize,
    /// Frame-error events that end a point early.
    #[serde(default = "default_min_errors")]
    pub min_errors: usize,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    pub seed: u64,
    /// Frames between stopping checks.
    #[serde(default = "default_batch")]
    pub batch: usize,
    /// Send all-zero messages instead of random ones.
    #[serde(default)]
    pub zero_message: bool,
}

impl SimConfig {
    pub fn p2p(profile: impl Into<String>, n: usize, snr_grid: Vec<f64>, max_frames: usize, seed: u64) -> Self {
        Self {
            scenario: ScenarioKind::P2p,
            profile: profile.into(),
            n,
            graph_seed: seed,
            snr_grid,
            max_frames,
            min_errors: default_min_errors(),
            max_iter: default_max_iter(),
            seed,
            batch: default_batch(),
            zero_message: false,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::InvalidArgument(format!("sim config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| Error::Malformed {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.n == 0 || self.max_frames == 0 || self.batch == 0 || self.max_iter == 0 {
            return bad("n, max_frames, batch and max_iter must be positive".into());
        }
        if self.snr_grid.is_empty() || self.snr_grid.iter().any(|s| !s.is_finite()) {
            return bad("snr_grid must be a nonempty list of finite values".into());
        }
        if self.snr_grid.windows(2).any(|w| w[0] > w[1]) {
            return bad("snr_grid must be sorted".into());
        }
        if self.min_errors < MIN_ERROR_EVENTS {
            return bad(format!("min_errors must be at least {MIN_ERROR_EVENTS}"));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex(&Sha256::digest(json.as_bytes()))
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// A bundled label or a path to a profile file.
pub fn resolve_profile(reference: &str) -> Result<CodeProfile> {
    if bundled_labels().any(|l| l == reference) {
        bundled(reference)
    } else {
        load_profile(reference)
    }
}

/// Totals at one SNR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimPoint {
    pub snr_db: f64,
    pub sigma2: f64,
    pub frames: usize,
    /// Information symbols compared.
    pub symbols: usize,
    pub symbol_errors: usize,
    pub frame_errors: usize,
    pub mean_iters: f64,
    pub ser: f64,
    pub fer: f64,
    /// Collected `min_errors` frame errors; points that ran out of frames
    /// first are flagged incomplete.
    pub complete: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub config: SimConfig,
    pub config_hash: String,
    /// Information bits per channel use.
    pub rate_bits: f64,
    /// SNR (dB) where the matching mutual information reaches `rate_bits`.
    pub threshold_db: Option<f64>,
    pub points: Vec<SimPoint>,
}

impl SimResult {
    /// Columns `snr_db, ser, fer, frames, mean_iters`, then a comment row
    /// carrying the threshold.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "snr_db,ser,fer,frames,mean_iters")?;
        for p in &self.points {
            writeln!(out, "{},{},{},{},{}", p.snr_db, p.ser, p.fer, p.frames, p.mean_iters)?;
        }
        match self.threshold_db {
            Some(t) => writeln!(out, "# threshold_db={t} rate_bits={}", self.rate_bits)?,
            None => writeln!(out, "# threshold_db=none rate_bits={}", self.rate_bits)?,
        }
        Ok(())
    }

    pub fn csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii")
    }

    /// Run manifest: config, its hash, seed, versions and result digest.
    pub fn manifest(&self) -> serde_json::Value {
        serde_json::json!({
            "config": self.config,
            "config_hash": self.config_hash,
            "seed": self.config.seed,
            "versions": { "dira": env!("CARGO_PKG_VERSION") },
            "csv_sha256": hex(&Sha256::digest(self.csv_string().as_bytes())),
            "rate_bits": self.rate_bits,
            "threshold_db": self.threshold_db,
        })
    }

    /// Write `<stem>.csv` and `<stem>.json` into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>, stem: &str) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(format!("{stem}.csv")), self.csv_string())?;
        let mut manifest = serde_json::to_string_pretty(&self.manifest())?;
        manifest.push('\n');
        std::fs::write(dir.join(format!("{stem}.json")), manifest)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct FrameOutcome {
    symbol_errors: usize,
    iterations: usize,
}

/// Per-point state shared by the frames.
enum Receiver<'g> {
    P2p,
    Cf(CfScenario<'g>, CfBinner),
    Dpc(DpcScenario<'g>, crate::multiuser::DpcDemodulator),
}

fn frame_rng(seed: u64, point: usize, frame: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (point as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(frame as u64);
    rng
}

fn random_message(rng: &mut ChaCha8Rng, k: usize, q: usize, zero: bool) -> Vec<Sym> {
    if zero {
        vec![0; k]
    } else {
        (0..k).map(|_| rng.random_range(0..q) as Sym).collect()
    }
}

fn run_frame(
    graph: &CodeGraph,
    receiver: &Receiver,
    sigma2: f64,
    cfg: &SimConfig,
    decoder: &mut Decoder,
    mut rng: ChaCha8Rng,
) -> Result<FrameOutcome> {
    use rand_distr::{Distribution, StandardNormal};
    let q = graph.q();
    let k = graph.k();
    let (apps, target) = match receiver {
        Receiver::P2p => {
            let w = random_message(&mut rng, k, q, cfg.zero_message);
            let c = encode(graph, &w)?;
            let mapper = PamMapper::new(q);
            let sd = sigma2.sqrt();
            let y: Vec<f64> = mapper
                .map(&c, graph.coset())
                .into_iter()
                .map(|x| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    x + sd * z
                })
                .collect();
            (channel_apps(&y, sigma2, &mapper, graph.coset()), w)
        }
        Receiver::Cf(sc, binner) => {
            let ws: Vec<Vec<Sym>> = (0..sc.users())
                .map(|_| random_message(&mut rng, k, q, cfg.zero_message))
                .collect();
            let block = cf_transmit(sc, &ws, &mut rng)?;
            let u = linear_combo(graph.ring(), &ws, &sc.coefficients[0])?;
            (binner.apps(&block.received, graph.coset()), u)
        }
        Receiver::Dpc(sc, demod) => {
            let w = random_message(&mut rng, k, q, cfg.zero_message);
            let block = dpc_transmit(sc, &w, &mut rng)?;
            (demod.apps(&block.received, graph.coset()), w)
        }
    };
    let res = decoder.decode(&apps, cfg.max_iter)?;
    Ok(FrameOutcome {
        symbol_errors: res.message.iter().zip(&target).filter(|(a, b)| a != b).count(),
        iterations: res.iterations,
    })
}

/// Information bits per channel use and the matching threshold.
fn rate_and_threshold(cfg: &SimConfig, graph: &CodeGraph) -> (f64, Option<f64>) {
    let q = graph.q();
    let rate = graph.spectral_efficiency();
    let thr = match &cfg.scenario {
        ScenarioKind::P2p | ScenarioKind::Dpc { .. } => capacity_threshold(q, rate),
        ScenarioKind::Cf { gains, alpha } => {
            let alpha: Vec<usize> = alpha.iter().map(|&a| a as usize).collect();
            combination_threshold(q, gains, &alpha, rate)
        }
    };
    (rate, thr.ok().filter(|t| t.is_finite()))
}

/// Run a sweep on the current rayon pool.
pub fn run_sweep(cfg: &SimConfig) -> Result<SimResult> {
    cfg.validate()?;
    let profile = resolve_profile(&cfg.profile)?;
    let graph = build_graph(&profile, cfg.n, cfg.graph_seed)?;
    run_sweep_on(cfg, &graph)
}

/// Run a sweep on a dedicated pool of `workers` threads.
pub fn run_sweep_with_workers(cfg: &SimConfig, workers: usize) -> Result<SimResult> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    pool.install(|| run_sweep(cfg))
}

/// Run a sweep on an already-built graph.
pub fn run_sweep_on(cfg: &SimConfig, graph: &CodeGraph) -> Result<SimResult> {
    cfg.validate()?;
    let (rate_bits, threshold_db) = rate_and_threshold(cfg, graph);
    let mut points = Vec::with_capacity(cfg.snr_grid.len());
    for (pi, &snr_db) in cfg.snr_grid.iter().enumerate() {
        let sigma2 = snr_to_sigma2(snr_db);
        let receiver = match &cfg.scenario {
            ScenarioKind::P2p => Receiver::P2p,
            ScenarioKind::Cf { gains, alpha } => {
                let sc = CfScenario::new(graph, gains.clone(), vec![alpha.clone()], sigma2)?;
                let binner = sc.binner(0)?;
                Receiver::Cf(sc, binner)
            }
            ScenarioKind::Dpc {
                prior,
                receiver_prior,
                window,
            } => {
                let mut sc = DpcScenario::new(graph, prior.clone(), sigma2)?;
                sc.receiver_prior = receiver_prior.clone();
                sc.window = *window;
                let demod = sc.demodulator()?;
                Receiver::Dpc(sc, demod)
            }
        };
        let (mut frames, mut sym_err, mut frame_err, mut iters) = (0usize, 0usize, 0usize, 0usize);
        while frames < cfg.max_frames && frame_err < cfg.min_errors {
            let end = (frames + cfg.batch).min(cfg.max_frames);
            let batch: Vec<FrameOutcome> = (frames..end)
                .into_par_iter()
                .map_init(
                    || Decoder::new(graph),
                    |dec, f| run_frame(graph, &receiver, sigma2, cfg, dec, frame_rng(cfg.seed, pi, f)),
                )
                .collect::<Result<_>>()?;
            for o in batch {
                sym_err += o.symbol_errors;
                frame_err += (o.symbol_errors > 0) as usize;
                iters += o.iterations;
            }
            frames = end;
        }
        let symbols = frames * graph.k();
        log::info!("snr {snr_db} dB: {sym_err}/{symbols} symbol errors, {frame_err}/{frames} frames");
        points.push(SimPoint {
            snr_db,
            sigma2,
            frames,
            symbols,
            symbol_errors: sym_err,
            frame_errors: frame_err,
            mean_iters: iters as f64 / frames as f64,
            ser: sym_err as f64 / symbols as f64,
            fer: frame_err as f64 / frames as f64,
            complete: frame_err >= cfg.min_errors,
        });
    }
    Ok(SimResult {
        config: cfg.clone(),
        config_hash: cfg.hash(),
        rate_bits,
        threshold_db,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SimConfig {
        let mut c = SimConfig::p2p("q4_R1.0", 400, vec![2.0, 40.0], 6, 9);
        c.batch = 4;
        c
    }

    #[test]
    fn validation() {
        let mut c = small();
        c.snr_grid = vec![3.0, 1.0];
        assert!(c.validate().is_err());
        let mut c = small();
        c.min_errors = 10;
        assert!(c.validate().is_err());
        assert!(small().validate().is_ok());
    }

    #[test]
    fn toml_round_trip_and_hash() {
        let mut c = small();
        c.scenario = ScenarioKind::Dpc {
            prior: InterferencePrior::pam_default(4),
            receiver_prior: None,
            window: None,
        };
        let text = toml::to_string(&c).unwrap();
        let back = SimConfig::from_toml_str(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
        assert_ne!(small().hash(), c.hash());
    }

    #[test]
    fn noiseless_point_is_error_free() {
        let r = run_sweep(&small()).unwrap();
        let p = &r.points[1];
        assert_eq!(p.symbol_errors, 0);
        assert_eq!(p.frames, 6);
        assert!(r.threshold_db.is_some());
        assert!(r.csv_string().starts_with("snr_db,ser,fer,frames,mean_iters\n"));
    }
}
