//! The whole pipeline through the library: synth, process, analyze, verify.
//!
//! cargo run --release --example end_to_end -- [packets] [workers]

use netsense::anonymizer::{AnonKey, Anonymizer};
use netsense::matrix::WindowConfig;
use netsense::pipeline::{self, PipelineSide, ProcessConfig};
use netsense::synth::{self, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let n_packets = args.next().map(|s| s.parse()).transpose()?.unwrap_or(1 << 18);
    let workers = args.next().map(|s| s.parse()).transpose()?.unwrap_or_else(pipeline::default_workers);

    let dir = tempfile::tempdir()?;
    let capture = dir.path().join("traffic.pcap");
    let config = SynthConfig {
        n_packets,
        n_sources: 20_000,
        n_destinations: 20_000,
        noise_fraction: 0.01,
        ..SynthConfig::default()
    };
    synth::write_pcap(&synth::generate_pairs(&config)?, &config, &capture)?;

    let key = AnonKey::from_bytes(&[42u8; 32])?;
    let anon = Anonymizer::derive(&key);
    let mut process = ProcessConfig::new(vec![capture.clone()], dir.path().join("out"));
    process.window = WindowConfig::new(1 << 15)?;
    process.matrices_per_tar = 4;
    process.workers = workers;
    process.progress_every = 0;
    let outcome = pipeline::process(&process, &anon, &key.fingerprint())?;
    println!(
        "processed {} packets into {} matrices / {} archives at {:.0} packets/s",
        outcome.ingest.packets_read,
        outcome.matrices,
        outcome.archives.len(),
        outcome.packets_per_second()
    );

    let analysis = pipeline::analyze(&outcome.archives, workers)?;
    let (_, manifest) = pipeline::resolve_archives(&[dir.path().join("out")])?;
    print!("{}", pipeline::stats_report(&analysis, manifest.as_ref()).to_json());

    let verdict = pipeline::verify(&[capture], &anon, &PipelineSide::Archives(outcome.archives))?;
    println!("oracle match: {}", verdict.matches());
    Ok(())
}
