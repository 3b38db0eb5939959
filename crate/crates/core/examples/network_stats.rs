//! Network statistics from an aggregate matrix, checked against the brute-force tally.
//!
//! cargo run --example network_stats -- [seed]

use netsense::anonymizer::{AnonKey, Anonymizer};
use netsense::matrix::{accumulate, sum, WindowConfig};
use netsense::netstats::{compute_stats, oracle_stats};
use netsense::synth::{self, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(42);
    let anon = Anonymizer::derive(&AnonKey::from_bytes(&[9u8; 32])?);
    let config = SynthConfig {
        seed,
        n_packets: 100_000,
        n_sources: 10_000,
        n_destinations: 10_000,
        ..SynthConfig::default()
    };
    let pairs: Vec<_> = synth::generate_pairs(&config)?
        .into_iter()
        .map(|p| anon.anonymize_pair(p))
        .collect();

    let aggregate = sum(accumulate(pairs.iter().copied(), WindowConfig::new(1 << 14)?))?;
    let stats = compute_stats(&aggregate);
    print!("{}", stats.table());

    let oracle = oracle_stats(&pairs);
    let diffs = stats.diff(&oracle);
    println!("oracle agreement: {}/14 fields", 14 - diffs.len());
    println!("inequality violations: {}", stats.violations().len());
    Ok(())
}
