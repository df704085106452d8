use std::fs::{self, File};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use ccf_harness::csv_out::write_rows;
use ccf_harness::net::{self, HostReport};
use ccf_harness::{
    gen_multiset_pair, run_fpr, run_methods, run_occupancy, run_timing, ExperimentConfig,
};
use ccf_sync::sync::{Method, Role, SyncConfig};
use ccf_sync::{CbfParams, CcfParams, Multiset};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

#[derive(Parser)]
#[command(
    name = "ccf-harness",
    version,
    about = "Counting cuckoo filter experiments"
)]
struct Cli {
    /// Base seed; overrides `seed` from the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// CSV output path (stdout when absent).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Flat key = value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a multiset pair as fixture files.
    Gen {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
    },
    /// Load factor table.
    Occupancy,
    /// Collision counts and membership false positive rates.
    Fpr,
    /// Post-sync accuracy sweeps.
    Accuracy {
        /// Restrict to these methods (ccf-query, ccf-decode, cbf).
        #[arg(long)]
        method: Vec<Method>,
    },
    /// Per-operation timings.
    Timing,
    /// One host of a live sync over TCP.
    Sync(SyncArgs),
}

#[derive(Args)]
struct SyncArgs {
    /// Wait for the peer on this address (responder).
    #[arg(long, conflicts_with = "connect", required_unless_present = "connect")]
    listen: Option<String>,
    /// Dial the peer at this address (initiator).
    #[arg(long)]
    connect: Option<String>,
    /// Local multiset fixture.
    #[arg(long)]
    input: PathBuf,
    /// Where to write the synchronized multiset.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, default_value = "ccf-query")]
    method: Method,
    #[arg(long, default_value_t = 1 << 14)]
    buckets: u32,
    #[arg(long, default_value_t = 16)]
    fingerprint_bits: u8,
    /// CBF counter count; defaults to the CCF's bit budget.
    #[arg(long)]
    cbf_counters: Option<u32>,
    #[arg(long)]
    cbf_hashes: Option<u8>,
    /// Seconds to keep retrying `--connect`.
    #[arg(long, default_value_t = 10)]
    patience: u64,
}

fn emit<R: Serialize>(out: Option<&Path>, rows: &[R]) -> Result<()> {
    match out {
        Some(p) => {
            let f = File::create(p).with_context(|| format!("creating {}", p.display()))?;
            write_rows(f, rows)?;
        }
        None => write_rows(io::stdout().lock(), rows)?,
    }
    Ok(())
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            ExperimentConfig::parse(&text).with_context(|| format!("in {}", p.display()))?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn read_fixture(p: &Path) -> Result<Multiset> {
    let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
    Multiset::from_fixture(&text).with_context(|| format!("parsing {}", p.display()))
}

fn write_fixture(p: &Path, ms: &Multiset) -> Result<()> {
    fs::write(p, ms.to_fixture()).with_context(|| format!("writing {}", p.display()))
}

#[derive(Serialize)]
struct GenRow {
    side: &'static str,
    distinct: usize,
    cardinality: u64,
    transmit: usize,
    replicate: usize,
}

fn sync_config(args: &SyncArgs, cfg: &ExperimentConfig) -> Result<SyncConfig> {
    let ccf = CcfParams::new(args.buckets, args.fingerprint_bits)
        .with_slots(cfg.slots_per_bucket)
        .with_counter_bits(cfg.counter_bits)
        .with_seed(cfg.seed);
    let sync = match args.method {
        Method::Cbf => {
            let c = u64::from(cfg.cbf_counter_bits);
            let m = match args.cbf_counters {
                Some(m) => m,
                None => u32::try_from(ccf.total_bits().div_ceil(c))?,
            };
            let k = args.cbf_hashes.unwrap_or(4);
            SyncConfig::Cbf(CbfParams::new(m, k, cfg.cbf_counter_bits).with_seed(cfg.seed))
        }
        m => SyncConfig::new_ccf(m, ccf)?,
    };
    sync.validate()?;
    Ok(sync)
}

fn run_sync(args: &SyncArgs, cfg: &ExperimentConfig, out: Option<&Path>) -> Result<()> {
    let local = read_fixture(&args.input)?;
    let sync = sync_config(args, cfg)?;
    let (role, outcome) = match (&args.listen, &args.connect) {
        (Some(addr), None) => (
            Role::Responder,
            net::listen(addr, &local, &sync, net::announce)?,
        ),
        (None, Some(addr)) => (
            Role::Initiator,
            net::connect(addr, &local, &sync, Duration::from_secs(args.patience))?,
        ),
        _ => bail!("give exactly one of --listen and --connect"),
    };
    if let Some(p) = &args.output {
        write_fixture(p, &outcome.multiset)?;
    }
    let report = HostReport::new(role, &sync, &outcome);
    match out {
        Some(p) => emit(Some(p), &[report]),
        None => {
            // stdout already carries the listening line; keep the CSV after it
            let mut lock = io::stdout().lock();
            lock.flush()?;
            write_rows(lock, &[report])?;
            Ok(())
        }
    }
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let cfg = load_config(&cli)?;
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Gen { a, b } => {
            let pair = gen_multiset_pair(&cfg, cfg.seed)?;
            write_fixture(a, &pair.a)?;
            write_fixture(b, &pair.b)?;
            let row = |side, ms: &Multiset, t: &ccf_sync::sync::DiffResult| GenRow {
                side,
                distinct: ms.root_len(),
                cardinality: ms.cardinality(),
                transmit: t.transmit.len(),
                replicate: t.replicate.len(),
            };
            emit(
                out,
                &[
                    row("a", &pair.a, &pair.truth_a),
                    row("b", &pair.b, &pair.truth_b),
                ],
            )
        }
        Command::Occupancy => emit(out, &run_occupancy(&cfg)),
        Command::Fpr => emit(out, &run_fpr(&cfg)),
        Command::Accuracy { method } => {
            let methods = if method.is_empty() {
                &cfg.methods
            } else {
                method
            };
            emit(out, &run_methods(&cfg, methods))
        }
        Command::Timing => emit(out, &run_timing(&cfg)),
        Command::Sync(args) => run_sync(args, &cfg, out),
    }
}
