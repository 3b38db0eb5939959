//! The `netsense` command line.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::anonymizer::{AnonKey, Anonymizer, KeyError};
use crate::matrix::{WindowConfig, DEFAULT_PACKETS_PER_WINDOW};
use crate::pipeline::{self, PipelineSide, ProcessConfig};
use crate::store::{
    DEFAULT_MATRICES_PER_TAR, TMX_HEADER_LEN, TMX_MAGIC, TMX_TRIPLE_LEN, TMX_VERSION,
};
use crate::synth::{self, SynthConfig, SynthLinkType};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "netsense", version, about = "Anonymized network traffic matrices from pcap captures")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a seeded synthetic capture.
    Synth(SynthArgs),
    /// Captures to anonymized traffic-matrix archives.
    Process(ProcessArgs),
    /// Sum archived matrices and report network statistics.
    Analyze(AnalyzeArgs),
    /// Compare pipeline statistics with a brute-force tally.
    Verify(VerifyArgs),
    /// Print format versions and the TMX layout.
    Info,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum LinkArg {
    Ethernet,
    RawIp,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 1 << 13)]
    pub packets: u64,
    #[arg(long, default_value_t = 1000)]
    pub sources: u64,
    #[arg(long, default_value_t = 1000)]
    pub destinations: u64,
    #[arg(long, default_value_t = 1.2)]
    pub source_exponent: f64,
    #[arg(long, default_value_t = 0.0)]
    pub destination_exponent: f64,
    #[arg(long, value_enum, default_value_t = LinkArg::Ethernet)]
    pub link_type: LinkArg,
    /// First timestamp, seconds since the epoch.
    #[arg(long, default_value_t = 1_600_000_000)]
    pub start: u64,
    #[arg(long, default_value_t = 1)]
    pub interval_micros: u64,
    /// Fraction of extra non-IPv4 packets to mix in.
    #[arg(long, default_value_t = 0.0)]
    pub noise_fraction: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
#[group(id = "key", required = true, multiple = false, args = ["key_file", "key_env"])]
pub struct KeyArgs {
    /// File holding the key as 64 hex characters.
    #[arg(long)]
    pub key_file: Option<PathBuf>,
    /// Environment variable holding the key as 64 hex characters.
    #[arg(long)]
    pub key_env: Option<String>,
}

impl KeyArgs {
    fn resolve(&self) -> Result<AnonKey, KeyError> {
        match (&self.key_file, &self.key_env) {
            (Some(path), _) => AnonKey::from_key_file(path),
            (None, Some(var)) => AnonKey::from_env(var),
            (None, None) => unreachable!("clap requires one key source"),
        }
    }
}

#[derive(Debug, Args)]
pub struct ProcessArgs {
    /// Capture files, processed in the order given.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[command(flatten)]
    pub key: KeyArgs,
    /// Output directory for archives and the manifest.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_PACKETS_PER_WINDOW)]
    pub window: u64,
    #[arg(long, default_value_t = DEFAULT_MATRICES_PER_TAR)]
    pub matrices_per_tar: u32,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    pub workers: Option<usize>,
    /// Progress line every this many address pairs; 0 for none.
    #[arg(long, default_value_t = 1 << 20)]
    pub progress_every: u64,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Archives, or directories containing them.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Write the JSON report here; without it the JSON goes to stdout.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Capture files.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[command(flatten)]
    pub key: KeyArgs,
    /// Check these archives instead of running the pipeline afresh.
    #[arg(long)]
    pub archives: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_PACKETS_PER_WINDOW)]
    pub window: u64,
    #[arg(long)]
    pub workers: Option<usize>,
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl Failure {
    fn runtime(e: impl std::fmt::Display) -> Self {
        Failure::Runtime(e.to_string())
    }
}

/// Parse `args` and run; returns the process exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            EXIT_FAILURE
        }
    }
}

pub fn run() -> i32 {
    run_from(std::env::args_os())
}

fn dispatch(command: Command) -> Result<i32, Failure> {
    match command {
        Command::Synth(a) => cmd_synth(a),
        Command::Process(a) => cmd_process(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Info => cmd_info(),
    }
}

fn workers(requested: Option<usize>) -> Result<usize, Failure> {
    match requested {
        Some(0) => Err(Failure::Usage("--workers must be at least 1".into())),
        Some(n) => Ok(n),
        None => Ok(pipeline::default_workers()),
    }
}

fn window(w: u64) -> Result<WindowConfig, Failure> {
    WindowConfig::new(w).map_err(|e| Failure::Usage(e.to_string()))
}

fn print_json(value: &serde_json::Value) {
    let mut out = std::io::stdout().lock();
    let _ = serde_json::to_writer_pretty(&mut out, value);
    let _ = writeln!(out);
}

fn cmd_synth(a: SynthArgs) -> Result<i32, Failure> {
    let config = SynthConfig {
        seed: a.seed,
        n_packets: a.packets,
        n_sources: a.sources,
        n_destinations: a.destinations,
        source_exponent: a.source_exponent,
        destination_exponent: a.destination_exponent,
        link_type: match a.link_type {
            LinkArg::Ethernet => SynthLinkType::Ethernet,
            LinkArg::RawIp => SynthLinkType::RawIp,
        },
        timestamp_start: a.start,
        inter_packet_micros: a.interval_micros,
        noise_fraction: a.noise_fraction,
    };
    config
        .validate()
        .map_err(|e| Failure::Usage(e.to_string()))?;
    let pairs = synth::generate_pairs(&config).map_err(Failure::runtime)?;
    let summary = synth::write_pcap(&pairs, &config, &a.out).map_err(Failure::runtime)?;
    print_json(&json!({
        "config": config,
        "output": a.out,
        "written": summary,
    }));
    Ok(EXIT_OK)
}

fn cmd_process(a: ProcessArgs) -> Result<i32, Failure> {
    // the key must resolve before any packet is read
    let key = a.key.resolve().map_err(|e| Failure::Usage(e.to_string()))?;
    let mut config = ProcessConfig::new(a.inputs, a.out);
    config.window = window(a.window)?;
    if a.matrices_per_tar == 0 {
        return Err(Failure::Usage("--matrices-per-tar must be at least 1".into()));
    }
    config.matrices_per_tar = a.matrices_per_tar;
    config.workers = workers(a.workers)?;
    config.progress_every = a.progress_every;

    let anonymizer = Anonymizer::derive(&key);
    let fingerprint = key.fingerprint();
    let outcome = pipeline::process(&config, &anonymizer, &fingerprint).map_err(Failure::runtime)?;
    print_json(&json!({
        "ingest": outcome.ingest,
        "matrices": outcome.matrices,
        "archives": outcome.archives,
        "manifest": outcome.manifest,
        "window_size": config.window.packets_per_window(),
        "matrices_per_tar": config.matrices_per_tar,
        "key_fingerprint": fingerprint,
        "elapsed_seconds": outcome.elapsed.as_secs_f64(),
        "packets_per_second": outcome.packets_per_second(),
    }));
    Ok(EXIT_OK)
}

fn cmd_analyze(a: AnalyzeArgs) -> Result<i32, Failure> {
    let workers = workers(a.workers)?;
    let (archives, manifest) = pipeline::resolve_archives(&a.inputs).map_err(Failure::runtime)?;
    let outcome = pipeline::analyze(&archives, workers).map_err(Failure::runtime)?;
    let report = pipeline::stats_report(&outcome, manifest.as_ref());
    let json = report.to_json();
    match &a.report {
        Some(path) => {
            std::fs::write(path, &json)
                .map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
            print!("{}", report.stats.table());
        }
        None => {
            print!("{json}");
            eprint!("{}", report.stats.table());
        }
    }
    Ok(EXIT_OK)
}

fn cmd_verify(a: VerifyArgs) -> Result<i32, Failure> {
    let key = a.key.resolve().map_err(|e| Failure::Usage(e.to_string()))?;
    let anonymizer = Anonymizer::derive(&key);
    let side = match a.archives {
        Some(dir) => {
            let (archives, _) = pipeline::resolve_archives(&[dir]).map_err(Failure::runtime)?;
            PipelineSide::Archives(archives)
        }
        None => PipelineSide::Fresh {
            window: window(a.window)?,
            workers: workers(a.workers)?,
        },
    };
    let outcome = pipeline::verify(&a.inputs, &anonymizer, &side).map_err(Failure::runtime)?;
    print_json(&json!({
        "match": outcome.matches(),
        "pairs": outcome.pairs,
        "pipeline": outcome.pipeline,
        "oracle": outcome.oracle,
        "mismatches": outcome.diffs,
    }));
    if outcome.matches() {
        Ok(EXIT_OK)
    } else {
        for d in &outcome.diffs {
            eprintln!("mismatch {}: pipeline {} oracle {}", d.field, d.left, d.right);
        }
        Ok(EXIT_FAILURE)
    }
}

fn cmd_info() -> Result<i32, Failure> {
    println!("netsense {}", env!("CARGO_PKG_VERSION"));
    println!("capture input   classic pcap (usec/nsec, either byte order); link types 1 ethernet, 101 raw ip");
    println!(
        "matrix format   TMX magic {:?} version {TMX_VERSION}, little-endian",
        std::str::from_utf8(&TMX_MAGIC).unwrap()
    );
    println!("  header        {TMX_HEADER_LEN} bytes: magic u8[4] | version u32 | flags u32 | reserved u32 | window_index u64 | nnz u64");
    println!("  body          nnz x {TMX_TRIPLE_LEN}-byte triples (row u32, col u32, count u64), ascending (row, col)");
    println!("  aggregate     window_index = 0xFFFFFFFFFFFFFFFF");
    println!("archives        POSIX ustar tm_<first>_<last>.tar, members tm_<window:08>.tmx, mtime 0, mode 0644");
    println!("defaults        window {DEFAULT_PACKETS_PER_WINDOW} pairs, {DEFAULT_MATRICES_PER_TAR} matrices per archive");
    println!("anonymization   Crypto-PAn (AES-128, 32-byte key as 64 hex chars)");
    Ok(EXIT_OK)
}
