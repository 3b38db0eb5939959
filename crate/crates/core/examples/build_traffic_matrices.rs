//! Cut an anonymized pair stream into fixed-size windows, then sum them.
//!
//! cargo run --example build_traffic_matrices -- [window]

use netsense::anonymizer::{AnonKey, Anonymizer};
use netsense::matrix::{accumulate, par_sum, WindowConfig};
use netsense::synth::{self, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let window: u64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(4096);
    let anon = Anonymizer::derive(&AnonKey::from_bytes(&[7u8; 32])?);
    let config = SynthConfig {
        n_packets: 20_000,
        ..SynthConfig::default()
    };
    let pairs = synth::generate_pairs(&config)?.into_iter().map(|p| anon.anonymize_pair(p));

    let matrices: Vec<_> = accumulate(pairs, WindowConfig::new(window)?).collect();
    for m in &matrices {
        println!(
            "window {:>3}: {:>5} packets over {:>5} nonzeros",
            m.window_index(),
            m.total_count(),
            m.nnz()
        );
    }
    let total = par_sum(matrices)?;
    println!("aggregate: {} packets over {} links", total.total_count(), total.nnz());
    let heaviest = total.entries().iter().max_by_key(|e| e.count).unwrap();
    println!("heaviest link carries {} packets", heaviest.count);
    Ok(())
}
