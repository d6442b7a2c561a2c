use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use iawf::allocator::{
    equal_allocation, read_streams_csv, waterfill_exact, waterfill_iterative, waterfill_ma, write_allocation_csv,
    AllocationInput, StreamParams, DEFAULT_TOLERANCE,
};
use iawf::harness::trial::load_source;
use iawf::harness::{reconstruct_demo, run_experiment, write_outputs, ExperimentConfig};
use iawf::partitioner::{partition, Criterion};
use iawf::phy::{db_to_linear, fit_ber, full_chain_ber_sweep, BerModelParams};
use iawf::pixel_source::{save_image, save_segment_map, SegmentMap};
use iawf::scene::synthetic_scene;

#[derive(Parser)]
#[command(name = "iawf", version, about = "Importance-aware waterfilling link-level simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the synthetic scene and its segment map as PNG files.
    Scene {
        #[arg(long, default_value_t = 160)]
        width: usize,
        #[arg(long, default_value_t = 128)]
        height: usize,
        #[arg(long, short, default_value = ".")]
        output: PathBuf,
    },
    /// Print the partition plan manifest (JSON) of the configured source.
    Partition {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, default_value = "sp-ss-i")]
        criterion: Criterion,
        /// Write the manifest here instead of stdout.
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Allocate power for a `stream_id,omega,L,gain_sq` table.
    Allocate(AllocateArgs),
    /// Measure the full chain BER over AWGN and fit `alpha * exp(beta * snr)`.
    FitBer(FitBerArgs),
    /// Run the Monte Carlo experiment and write the CSV tables.
    Simulate {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Write reconstructed images for every criterion, allocator and SNR.
    Demo {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
}

/// Configuration file plus overrides. Each flag is shorthand for a `--set`.
#[derive(Args)]
struct ConfigArgs {
    /// TOML configuration; defaults apply when omitted.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override any key, e.g. `--set experiment.trials=20`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// source.image
    #[arg(long)]
    image: Option<PathBuf>,
    /// source.segment_map
    #[arg(long)]
    segment_map: Option<PathBuf>,
    /// source.size = [640, 512]
    #[arg(long)]
    full_scale: bool,
    /// experiment.trials
    #[arg(long)]
    trials: Option<usize>,
    /// experiment.seed
    #[arg(long)]
    seed: Option<u64>,
    /// experiment.snr_db (comma separated)
    #[arg(long, value_delimiter = ',')]
    snr_db: Option<Vec<f64>>,
    /// experiment.criteria (comma separated)
    #[arg(long, value_delimiter = ',')]
    criteria: Option<Vec<String>>,
    /// experiment.allocators (comma separated)
    #[arg(long, value_delimiter = ',')]
    allocators: Option<Vec<String>>,
    /// experiment.threads
    #[arg(long)]
    threads: Option<usize>,
    /// phy.backend (analytic or full-chain)
    #[arg(long)]
    backend: Option<String>,
    /// phy.interleave
    #[arg(long)]
    interleave: Option<bool>,
    /// channel.model (awgn or rayleigh)
    #[arg(long)]
    channel: Option<String>,
    /// output.directory
    #[arg(long, short)]
    output: Option<PathBuf>,
}

fn quoted(items: &[String]) -> String {
    let inner: Vec<String> = items.iter().map(|s| format!("{s:?}")).collect();
    format!("[{}]", inner.join(", "))
}

fn path_value(p: &Path) -> String {
    format!("{:?}", p.display().to_string())
}

impl ConfigArgs {
    fn overrides(&self) -> Vec<String> {
        let mut o = Vec::new();
        if let Some(p) = &self.image {
            o.push(format!("source.image={}", path_value(p)));
        }
        if let Some(p) = &self.segment_map {
            o.push(format!("source.segment_map={}", path_value(p)));
        }
        if self.full_scale {
            o.push("source.size=[640, 512]".into());
        }
        if let Some(t) = self.trials {
            o.push(format!("experiment.trials={t}"));
        }
        if let Some(s) = self.seed {
            o.push(format!("experiment.seed={s}"));
        }
        if let Some(v) = &self.snr_db {
            let items: Vec<String> = v.iter().map(|x| format!("{x:?}")).collect();
            o.push(format!("experiment.snr_db=[{}]", items.join(", ")));
        }
        if let Some(v) = &self.criteria {
            o.push(format!("experiment.criteria={}", quoted(v)));
        }
        if let Some(v) = &self.allocators {
            o.push(format!("experiment.allocators={}", quoted(v)));
        }
        if let Some(t) = self.threads {
            o.push(format!("experiment.threads={t}"));
        }
        if let Some(b) = &self.backend {
            o.push(format!("phy.backend={b:?}"));
        }
        if let Some(i) = self.interleave {
            o.push(format!("phy.interleave={i}"));
        }
        if let Some(c) = &self.channel {
            o.push(format!("channel.model={c:?}"));
        }
        if let Some(p) = &self.output {
            o.push(format!("output.directory={}", path_value(p)));
        }
        o.extend(self.sets.iter().cloned());
        o
    }

    fn load(&self) -> iawf::Result<ExperimentConfig> {
        let base = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        let cfg = base.with_overrides(&self.overrides())?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Solver {
    /// Exact importance-aware waterfilling.
    Exact,
    /// Fixed-point water-level iteration.
    Iterative,
    /// Margin-adaptive waterfilling (importance ignored).
    Ma,
    /// Equal power per symbol.
    Equal,
}

#[derive(Args)]
struct AllocateArgs {
    /// CSV with columns stream_id, omega, L, gain_sq.
    #[arg(long)]
    streams: PathBuf,
    /// Total budget `P`; exclusive with --snr-db.
    #[arg(long, conflicts_with = "snr_db", required_unless_present = "snr_db")]
    budget: Option<f64>,
    /// Average per-symbol SNR in dB; sets `P = snr * noise_variance * sum L`.
    #[arg(long)]
    snr_db: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    noise_variance: f64,
    #[arg(long, default_value_t = BerModelParams::default().alpha, allow_hyphen_values = true)]
    alpha: f64,
    #[arg(long, default_value_t = BerModelParams::default().beta, allow_hyphen_values = true)]
    beta: f64,
    #[arg(long, value_enum, default_value = "exact")]
    solver: Solver,
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    tolerance: f64,
    /// Output CSV; stdout when omitted.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct FitBerArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    /// SNR points in dB (comma separated).
    #[arg(
        long = "points",
        value_delimiter = ',',
        default_value = "0,1,2,3,4,5,6,7,8,9,10,11,12,13,14"
    )]
    points: Vec<f64>,
    /// Payload bits per block.
    #[arg(long, default_value_t = 10_000)]
    block_len: usize,
    /// Blocks per SNR point.
    #[arg(long, default_value_t = 20)]
    blocks: usize,
    /// Where to write the `snr_db,ber` samples; stdout when omitted.
    #[arg(long)]
    samples: Option<PathBuf>,
}

fn open_output(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(File::create(p)?),
        None => Box::new(io::stdout().lock()),
    })
}

fn cmd_allocate(args: &AllocateArgs) -> iawf::Result<()> {
    let records = read_streams_csv(File::open(&args.streams)?)?;
    let ids: Vec<String> = records.iter().map(|r| r.stream_id.clone()).collect();
    let input = AllocationInput::new(
        records
            .iter()
            .map(|r| StreamParams {
                weight: r.omega,
                symbol_length: r.symbol_length,
                gain_sq: r.gain_sq,
            })
            .collect(),
        args.noise_variance,
        BerModelParams::new(args.alpha, args.beta)?,
    )?;
    let budget = match (args.budget, args.snr_db) {
        (Some(b), _) => b,
        (None, Some(s)) => db_to_linear(s) * args.noise_variance * input.total_symbols() as f64,
        (None, None) => unreachable!("clap requires one of them"),
    };
    let alloc = match args.solver {
        Solver::Exact => waterfill_exact(&input, budget)?,
        Solver::Iterative => waterfill_iterative(&input, budget, args.tolerance)?,
        Solver::Ma => waterfill_ma(&input, budget)?,
        Solver::Equal => equal_allocation(&input, budget)?,
    };
    log::info!(
        "budget {budget}, used {}, water level {:?}, {} iterations{}",
        alloc.total_power_used,
        alloc.water_level,
        alloc.iterations,
        if alloc.fallback { " (bisection fallback)" } else { "" }
    );
    write_allocation_csv(open_output(args.output.as_deref())?, &ids, &input, &alloc)
}

fn cmd_fit_ber(args: &FitBerArgs) -> iawf::Result<()> {
    let cfg = args.cfg.load()?;
    let phy = cfg.phy.to_phy()?;
    let samples = full_chain_ber_sweep(&phy, &args.points, args.block_len, args.blocks, cfg.experiment.seed)?;
    let mut w = csv::Writer::from_writer(open_output(args.samples.as_deref())?);
    w.write_record(["snr_db", "ber"])?;
    for (s, b) in &samples {
        w.write_record([s.to_string(), b.to_string()])?;
    }
    w.flush()?;
    let linear: Vec<(f64, f64)> = samples.iter().map(|&(s, b)| (db_to_linear(s), b)).collect();
    let fit = fit_ber(&linear)?;
    let (num, den) = phy.code.rate();
    eprintln!(
        "M={} rate {num}/{den}: alpha = {:.4}, beta = {:.4}",
        phy.modulation_order, fit.alpha, fit.beta
    );
    Ok(())
}

fn run(cli: Cli) -> iawf::Result<()> {
    match cli.command {
        Command::Scene { width, height, output } => {
            std::fs::create_dir_all(&output)?;
            let scene = synthetic_scene(width, height);
            save_image(&scene.pixels, output.join("scene.png"))?;
            save_segment_map(&scene.segmap, output.join("segments.png"))?;
            println!("{}", output.join("scene.png").display());
            println!("{}", output.join("segments.png").display());
        }
        Command::Partition {
            cfg,
            criterion,
            manifest,
        } => {
            let cfg = cfg.load()?;
            let (pixels, segmap) = load_source(&cfg)?;
            let phy = cfg.phy.to_phy()?;
            let model = if criterion.uses_segments() {
                cfg.importance_model(pixels.bit_depth())?
            } else {
                iawf::partitioner::ImportanceModel::new(
                    cfg.importance_model(pixels.bit_depth())?.bit_weights().to_vec(),
                    vec![1.0],
                )?
            };
            let map = if criterion.uses_segments() {
                segmap
            } else {
                SegmentMap::uniform(pixels.height(), pixels.width())
            };
            let plan = partition(criterion, &pixels, &map, &model, phy.framing()?)?;
            let text = serde_json::to_string_pretty(&plan.manifest())?;
            let mut out = open_output(manifest.as_deref())?;
            writeln!(out, "{text}")?;
        }
        Command::Allocate(args) => cmd_allocate(&args)?,
        Command::FitBer(args) => cmd_fit_ber(&args)?,
        Command::Simulate { cfg } => {
            let cfg = cfg.load()?;
            let summary = run_experiment(&cfg)?;
            write_outputs(&summary, &cfg, &cfg.output.directory)?;
            eprintln!("wrote results to {}", cfg.output.directory.display());
        }
        Command::Demo { cfg } => {
            let cfg = cfg.load()?;
            let manifest = reconstruct_demo(&cfg, &cfg.output.directory)?;
            eprintln!(
                "wrote {} images and manifest.json to {}",
                manifest.entries.len() + 1,
                cfg.output.directory.display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                eprintln!("  caused by: {s}");
                src = s.source();
            }
            ExitCode::FAILURE
        }
    }
}
