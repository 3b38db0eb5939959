//! Serialize window matrices as TMX, group them into tar archives, read them back.
//!
//! cargo run --example store_matrices -- [matrices_per_tar]

use netsense::anonymizer::{AnonKey, Anonymizer};
use netsense::matrix::{accumulate, WindowConfig};
use netsense::store::{read_group, read_header, tmx_len, write_group, write_matrix, StoreLayout};
use netsense::synth::{self, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let per_tar: u32 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(4);
    let anon = Anonymizer::derive(&AnonKey::from_bytes(&[3u8; 32])?);
    let pairs = synth::generate_pairs(&SynthConfig::default())?;
    let matrices: Vec<_> =
        accumulate(pairs.into_iter().map(|p| anon.anonymize_pair(p)), WindowConfig::new(1000)?).collect();

    let first = write_matrix(&matrices[0]);
    let header = read_header(&first)?;
    println!(
        "TMX window {} holds {} triples in {} bytes (expected {})",
        header.window_index,
        header.nnz,
        first.len(),
        tmx_len(matrices[0].nnz())
    );

    let dir = tempfile::tempdir()?;
    let layout = StoreLayout::new(dir.path(), per_tar)?;
    let archives = write_group(&matrices, &layout)?;
    for a in &archives {
        println!("  {} ({} bytes)", a.file_name().unwrap().to_string_lossy(), std::fs::metadata(a)?.len());
    }
    let back = read_group(&archives)?;
    println!("{} matrices read back, identical: {}", back.len(), back == matrices);
    Ok(())
}
