//! Stream one or more pcap files and count what was extracted.
//!
//! cargo run --example ingest_pcap -- capture1.pcap [capture2.pcap ...]
//!
//! With no arguments a small mixed capture is synthesized first.

use std::collections::HashSet;
use std::path::PathBuf;

use netsense::pcap::ingest_files;
use netsense::synth::{self, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let mut inputs: Vec<PathBuf> = std::env::args().skip(1).map(Into::into).collect();
    if inputs.is_empty() {
        let config = SynthConfig {
            noise_fraction: 0.1,
            ..SynthConfig::default()
        };
        let path = dir.path().join("mixed.pcap");
        synth::write_pcap(&synth::generate_pairs(&config)?, &config, &path)?;
        inputs.push(path);
    }

    let mut sources = HashSet::new();
    let mut destinations = HashSet::new();
    let report = ingest_files(&inputs, |pair| {
        sources.insert(pair.src);
        destinations.insert(pair.dst);
    })?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    println!(
        "{} distinct sources, {} distinct destinations; conserved: {}",
        sources.len(),
        destinations.len(),
        report.is_conserved()
    );
    Ok(())
}
