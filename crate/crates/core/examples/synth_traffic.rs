//! Generate a seeded synthetic capture and show how skewed its sources are.
//!
//! cargo run --example synth_traffic -- [seed] [packets] [out.pcap]

use std::collections::HashMap;

use netsense::synth::{self, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let seed = args.next().map(|s| s.parse()).transpose()?.unwrap_or(42);
    let n_packets = args.next().map(|s| s.parse()).transpose()?.unwrap_or(50_000);
    let dir = tempfile::tempdir()?;
    let out = args.next().map(Into::into).unwrap_or_else(|| dir.path().join("synth.pcap"));

    let config = SynthConfig {
        seed,
        n_packets,
        noise_fraction: 0.02,
        ..SynthConfig::default()
    };
    let pairs = synth::generate_pairs(&config)?;
    let written = synth::write_pcap(&pairs, &config, &out)?;
    println!(
        "{} IPv4 + {} noise packets -> {}",
        written.ipv4_packets,
        written.noise_packets,
        out.display()
    );

    let mut per_source: HashMap<u32, u64> = HashMap::new();
    for p in &pairs {
        *per_source.entry(p.src).or_default() += 1;
    }
    let mut counts: Vec<u64> = per_source.into_values().collect();
    counts.sort_unstable_by(|a, b| b.cmp(a));
    println!("{} active sources of {}", counts.len(), config.n_sources);
    for (rank, c) in counts.iter().take(5).enumerate() {
        println!("  rank {:>2}: {c} packets", rank + 1);
    }
    Ok(())
}
