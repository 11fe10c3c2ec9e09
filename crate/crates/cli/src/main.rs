//! `dira`: build, encode, decode, design and simulate D-IRA ring codes.
//!
//! SNR convention everywhere: unit symbol energy per real dimension, so a
//! value of `snr` dB means noise variance `σ² = 10^(−snr/10)`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use dira::bp::{channel_apps, llr_stats, Decoder, DEFAULT_MAX_ITER};
use dira::codec::{read_f64s, read_symbols, write_f64s, write_symbols, PamMapper};
use dira::exit::{
    cnd_curves, optimize_degrees, optimize_multipliers, standard_grid, tunnel_test, tunnel_threshold, vnd_curve,
    AwgnSource, ChainModel, ChainOptions, DesignSpec, ExitOptions, GRID_POINTS,
};
use dira::multiuser::InterferencePrior;
use dira::profile::{bundled_labels, save_profile, CodeProfile, DegreeProfile, MultiplierDistribution};
use dira::sim::{resolve_profile, run_sweep_with_workers, snr_to_sigma2, ScenarioKind, SimConfig};
use dira::{build_graph, encode, CodeGraph, RingParams};

#[derive(Parser)]
#[command(name = "dira", version, about = "D-IRA ring codes over Z_{2^m} with 2^m-PAM")]
#[command(after_help = "SNR is Es/N0 per real dimension with unit symbol energy: sigma^2 = 10^(-snr/10).")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Inspect and validate code profiles.
    #[command(subcommand)]
    Profile(ProfileCmd),
    /// Build Tanner graphs.
    #[command(subcommand)]
    Graph(GraphCmd),
    /// Encode a message file (one byte per symbol) into PAM samples (little-endian f64).
    Encode(EncodeArgs),
    /// Decode channel APPs or received samples.
    Decode(DecodeArgs),
    /// EXIT analysis and profile design.
    #[command(subcommand)]
    Exit(ExitCmd),
    /// Monte-Carlo SNR sweeps.
    Sim(SimArgs),
    /// Compute-forward sweep from a scenario file.
    #[command(subcommand)]
    Cf(ScenarioCmd),
    /// Dirty-paper coding sweep from a scenario file.
    #[command(subcommand)]
    Dpc(ScenarioCmd),
}

#[derive(Subcommand)]
enum ProfileCmd {
    /// List the bundled profiles.
    List,
    /// Print a profile (bundled label or file) with its rates.
    Show { profile: String },
    /// Validate a profile file.
    Validate { path: PathBuf },
}

#[derive(Subcommand)]
enum GraphCmd {
    /// Build a graph of code length n and save it as JSON.
    Build {
        #[arg(long)]
        profile: String,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct EncodeArgs {
    #[arg(long)]
    graph: PathBuf,
    /// Message, k bytes.
    #[arg(long = "in")]
    input: PathBuf,
    /// PAM samples with the coset applied, n little-endian f64.
    #[arg(long)]
    out: PathBuf,
    /// Also write the codeword (coset not applied), n bytes.
    #[arg(long)]
    codeword: Option<PathBuf>,
}

#[derive(Args)]
struct DecodeArgs {
    #[arg(long)]
    graph: PathBuf,
    /// Channel APPs with the coset removed, n·q little-endian f64.
    #[arg(long, conflicts_with = "received")]
    apps: Option<PathBuf>,
    /// Received PAM samples, n little-endian f64 (requires --snr).
    #[arg(long, requires = "snr")]
    received: Option<PathBuf>,
    #[arg(long)]
    snr: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
    max_iter: usize,
    /// Decoded message, k bytes.
    #[arg(long)]
    out: PathBuf,
    /// Histogram of the final check-to-variable LLRs as CSV.
    #[arg(long)]
    llr_csv: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct ChainArgs {
    /// Check nodes per simulated chain.
    #[arg(long, default_value_t = 1000)]
    chain_length: usize,
    #[arg(long, default_value_t = 32)]
    chains: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

impl ChainArgs {
    fn options(&self) -> ChainOptions {
        ChainOptions {
            length: self.chain_length,
            chains: self.chains,
            seed: self.seed,
            keep_outputs: false,
        }
    }
}

#[derive(Subcommand)]
enum ExitCmd {
    /// VND and CND transfer curves of a profile as CSV.
    Curve {
        #[arg(long)]
        profile: String,
        #[arg(long)]
        snr: f64,
        #[arg(long, default_value_t = GRID_POINTS)]
        points: usize,
        #[command(flatten)]
        chain: ChainArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Tunnel test, or the lowest SNR with an open tunnel if --search is given.
    Tunnel {
        #[arg(long)]
        profile: String,
        #[arg(long)]
        snr: f64,
        /// Search upward from --snr up to this SNR (dB).
        #[arg(long)]
        search: Option<f64>,
        #[arg(long, default_value_t = 0.05)]
        tol: f64,
        #[command(flatten)]
        chain: ChainArgs,
    },
    /// Design a degree profile by alternating linear programs.
    Design {
        /// Coding rate R_s (information symbols per coded symbol).
        #[arg(long)]
        rate: f64,
        #[arg(long)]
        q: usize,
        #[arg(long)]
        snr: f64,
        #[arg(long, default_value_t = 22)]
        max_vn_degree: usize,
        #[arg(long, default_value_t = 4)]
        max_cn_degree: usize,
        /// Equalize the multiplier types of every check degree ≥ 2 first.
        #[arg(long)]
        equalize: bool,
        #[arg(long, default_value = "designed")]
        label: String,
        #[command(flatten)]
        chain: ChainArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Equalize the multiplier-type distribution of one check degree.
    Multipliers {
        #[arg(long)]
        dc: usize,
        #[arg(long)]
        q: usize,
        #[arg(long)]
        snr: f64,
        #[arg(long, default_value_t = 0.5)]
        ia: f64,
        /// Check outputs per mean-matrix estimate.
        #[arg(long, default_value_t = 200_000)]
        samples: usize,
    },
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum SimKind {
    P2p,
    Cf,
    Dpc,
}

#[derive(Args)]
struct SimArgs {
    kind: SimKind,
    /// Sweep configuration (TOML); flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    profile: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    /// Comma-separated SNR grid (dB).
    #[arg(long, value_delimiter = ',')]
    snr: Option<Vec<f64>>,
    #[arg(long)]
    max_frames: Option<usize>,
    #[arg(long)]
    min_errors: Option<usize>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args)]
struct RunArgs {
    /// Worker threads; results do not depend on this.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    #[arg(long, default_value = "results")]
    out_dir: PathBuf,
    /// Output file stem; defaults to the scenario kind.
    #[arg(long)]
    name: Option<String>,
}

#[derive(Subcommand)]
enum ScenarioCmd {
    /// Run the sweep declared in a scenario file.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Profile(cmd) => profile_cmd(cmd),
        Command::Graph(GraphCmd::Build { profile, n, seed, out }) => {
            let p = resolve_profile(&profile)?;
            let g = build_graph(&p, n, seed)?;
            g.save(&out)?;
            println!("graph {}: q={} n={} k={} edges={} -> {}", g.label(), g.q(), g.n(), g.k(), g.num_edges(), out.display());
            Ok(())
        }
        Command::Encode(args) => encode_cmd(args),
        Command::Decode(args) => decode_cmd(args),
        Command::Exit(cmd) => exit_cmd(cmd),
        Command::Sim(args) => sim_cmd(args),
        Command::Cf(ScenarioCmd::Run { scenario, run }) => scenario_cmd(&scenario, "cf", run),
        Command::Dpc(ScenarioCmd::Run { scenario, run }) => scenario_cmd(&scenario, "dpc", run),
    }
}

fn describe(p: &CodeProfile) {
    println!("label: {}", p.label);
    println!("ring: Z_{}", p.ring.q());
    println!("coding rate: {:.6}", p.rate());
    println!("spectral efficiency: {:.6} bits/symbol", p.spectral_efficiency());
    println!("vn edge fractions: {:?}", p.degrees.vn_edge_fractions());
    println!("cn edge fractions: {:?}", p.degrees.cn_edge_fractions());
    for d in p.multipliers.degrees() {
        println!("d_c={d} type masses: {:?}", p.multipliers.type_masses(&p.ring, d).unwrap_or_default());
    }
}

fn profile_cmd(cmd: ProfileCmd) -> Result<()> {
    match cmd {
        ProfileCmd::List => {
            for l in bundled_labels() {
                println!("{l}");
            }
        }
        ProfileCmd::Show { profile } => describe(&resolve_profile(&profile)?),
        ProfileCmd::Validate { path } => {
            let p = dira::profile::load_profile(&path)?;
            println!("{}: valid", path.display());
            describe(&p);
        }
    }
    Ok(())
}

fn encode_cmd(args: EncodeArgs) -> Result<()> {
    let g = CodeGraph::load(&args.graph)?;
    let w = read_symbols(&args.input, g.ring())?;
    let c = encode(&g, &w)?;
    let x = PamMapper::new(g.q()).map(&c, g.coset());
    write_f64s(&args.out, &x)?;
    if let Some(path) = args.codeword {
        write_symbols(path, &c)?;
    }
    println!("encoded {} symbols into {}", w.len(), x.len());
    Ok(())
}

fn decode_cmd(args: DecodeArgs) -> Result<()> {
    let g = CodeGraph::load(&args.graph)?;
    let apps = match (&args.apps, &args.received, args.snr) {
        (Some(path), _, _) => read_f64s(path)?,
        (None, Some(path), Some(snr)) => {
            let y = read_f64s(path)?;
            if y.len() != g.n() {
                bail!("{} holds {} samples, the graph has n={}", path.display(), y.len(), g.n());
            }
            channel_apps(&y, snr_to_sigma2(snr), &PamMapper::new(g.q()), g.coset())
        }
        _ => bail!("give either --apps or --received with --snr"),
    };
    let mut dec = Decoder::new(&g);
    let res = dec.decode(&apps, args.max_iter)?;
    write_symbols(&args.out, &res.message)?;
    println!("iterations: {} converged: {}", res.iterations, res.converged);
    if let Some(path) = args.llr_csv {
        let stats = llr_stats(dec.check_messages(), g.q(), 100, (-20.0, 20.0));
        stats.write_histogram_csv(BufWriter::new(File::create(&path)?))?;
        println!("llr means: {:?}", stats.mean);
    }
    Ok(())
}

fn exit_cmd(cmd: ExitCmd) -> Result<()> {
    match cmd {
        ExitCmd::Curve {
            profile,
            snr,
            points,
            chain,
            out,
        } => {
            let p = resolve_profile(&profile)?;
            let sigma2 = snr_to_sigma2(snr);
            let grid = standard_grid(points);
            let model = ChainModel::new(&p.ring, &p.degrees.cn_node_fractions(), &p.multipliers, chain.chain_length)?;
            let cnd = cnd_curves(&model, &AwgnSource::new(p.ring.q(), sigma2), &chain.options(), &grid, Some(sigma2))?;
            let vnd = vnd_curve(p.degrees.vn_edge_fractions(), p.ring.q(), &grid)?;
            let mut w = BufWriter::new(File::create(&out)?);
            use std::io::Write;
            writeln!(w, "i_a,vnd,cnd")?;
            for (i, &x) in grid.iter().enumerate() {
                writeln!(w, "{x},{},{}", vnd.i_e[i], cnd.mixture.i_e[i])?;
            }
            println!("wrote {}", out.display());
        }
        ExitCmd::Tunnel {
            profile,
            snr,
            search,
            tol,
            chain,
        } => {
            let p = resolve_profile(&profile)?;
            let opts = ExitOptions {
                chain: chain.options(),
                ..ExitOptions::default()
            };
            match search {
                Some(hi) => {
                    let t = tunnel_threshold(&p, snr, hi, tol, &opts)?;
                    println!("tunnel opens at {t:.3} dB");
                }
                None => {
                    let r = tunnel_test(&p, &AwgnSource::new(p.ring.q(), snr_to_sigma2(snr)), &opts)?;
                    println!("{}", serde_json::to_string_pretty(&r)?);
                }
            }
        }
        ExitCmd::Design {
            rate,
            q,
            snr,
            max_vn_degree,
            max_cn_degree,
            equalize,
            label,
            chain,
            out,
        } => {
            let ring = RingParams::from_modulus(q)?;
            let sigma2 = snr_to_sigma2(snr);
            let cn_degrees: Vec<usize> = (1..=max_cn_degree).collect();
            let mut multipliers = MultiplierDistribution::all_regular(&ring, cn_degrees.iter().copied());
            if equalize {
                for &d in cn_degrees.iter().filter(|&&d| d >= 2) {
                    let m = optimize_multipliers(d, 0.5, sigma2, q, 100_000)?;
                    println!("d_c={d}: type masses {:?} (spread {:.2e})", m.masses, m.spread);
                    multipliers.insert_type_row(&ring, d, &m.masses);
                }
            }
            let spec = DesignSpec::new(rate, ring.clone(), sigma2, multipliers.clone(), max_vn_degree, max_cn_degree);
            let opts = ExitOptions {
                chain: chain.options(),
                ..ExitOptions::default()
            };
            let design = optimize_degrees(&spec, &opts)?;
            let used: BTreeMap<usize, Vec<f64>> = design
                .cn_edge_fractions
                .keys()
                .map(|&d| (d, multipliers.type_masses(&ring, d).unwrap_or_default()))
                .collect();
            let profile = CodeProfile::new(
                ring.clone(),
                DegreeProfile::from_edge_fractions(design.vn_edge_fractions.clone(), design.cn_edge_fractions.clone())?,
                MultiplierDistribution::from_type_rows(&ring, used)?,
                label,
            )?;
            save_profile(&profile, &out)?;
            println!("{}", serde_json::to_string_pretty(&design)?);
            println!("wrote {} (rate {:.4})", out.display(), profile.rate());
        }
        ExitCmd::Multipliers { dc, q, snr, ia, samples } => {
            let d = optimize_multipliers(dc, ia, snr_to_sigma2(snr), q, samples)?;
            println!("{}", serde_json::to_string_pretty(&d)?);
        }
    }
    Ok(())
}

fn default_scenario(kind: SimKind, q: usize) -> ScenarioKind {
    match kind {
        SimKind::P2p => ScenarioKind::P2p,
        SimKind::Cf => ScenarioKind::Cf {
            gains: vec![1.0, 1.0],
            alpha: vec![1, 1],
        },
        SimKind::Dpc => ScenarioKind::Dpc {
            prior: InterferencePrior::pam_default(q),
            receiver_prior: None,
            window: None,
        },
    }
}

fn kind_name(s: &ScenarioKind) -> &'static str {
    match s {
        ScenarioKind::P2p => "p2p",
        ScenarioKind::Cf { .. } => "cf",
        ScenarioKind::Dpc { .. } => "dpc",
    }
}

fn sim_cmd(args: SimArgs) -> Result<()> {
    let mut cfg = match &args.config {
        Some(path) => SimConfig::load(path)?,
        None => {
            let profile = args.profile.clone().context("--profile or --config is required")?;
            let q = resolve_profile(&profile)?.ring.q();
            let mut c = SimConfig::p2p(profile, 10_000, vec![6.0], 100, 1);
            c.scenario = default_scenario(args.kind, q);
            c
        }
    };
    if let Some(p) = args.profile {
        cfg.profile = p;
    }
    if let Some(n) = args.n {
        cfg.n = n;
    }
    if let Some(s) = args.snr {
        cfg.snr_grid = s;
    }
    if let Some(m) = args.max_frames {
        cfg.max_frames = m;
    }
    if let Some(m) = args.min_errors {
        cfg.min_errors = m;
    }
    if let Some(m) = args.max_iter {
        cfg.max_iter = m;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    let wanted = match args.kind {
        SimKind::P2p => "p2p",
        SimKind::Cf => "cf",
        SimKind::Dpc => "dpc",
    };
    if kind_name(&cfg.scenario) != wanted {
        bail!("configuration describes a {} sweep, not {wanted}", kind_name(&cfg.scenario));
    }
    run_and_save(&cfg, args.run)
}

fn scenario_cmd(path: &Path, wanted: &str, run: RunArgs) -> Result<()> {
    let cfg = SimConfig::load(path)?;
    if kind_name(&cfg.scenario) != wanted {
        bail!("{} describes a {} sweep, not {wanted}", path.display(), kind_name(&cfg.scenario));
    }
    run_and_save(&cfg, run)
}

fn run_and_save(cfg: &SimConfig, run: RunArgs) -> Result<()> {
    let workers = if run.workers == 0 {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    } else {
        run.workers
    };
    let result = run_sweep_with_workers(cfg, workers)?;
    let stem = run.name.unwrap_or_else(|| kind_name(&cfg.scenario).to_string());
    result.save(&run.out_dir, &stem)?;
    print!("{}", result.csv_string());
    println!("wrote {}/{stem}.csv and {stem}.json", run.out_dir.display());
    Ok(())
}
