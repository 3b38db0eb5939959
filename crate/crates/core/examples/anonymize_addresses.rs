//! Prefix-preserving anonymization: shared prefixes survive, addresses do not.
//!
//! cargo run --example anonymize_addresses

use netsense::anonymizer::{shared_prefix_len, AnonKey, Anonymizer, CachedAnonymizer};
use netsense::synth;
use rand_core::RngCore;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // a throwaway key; real runs read one from --key-file or --key-env
    let mut rng = synth::rng(2024);
    let mut bytes = [0u8; 32];
    rng.fill_bytes(&mut bytes);
    let key = AnonKey::from_bytes(&bytes)?;
    println!("key fingerprint {}", key.fingerprint());
    let anon = Anonymizer::derive(&key);

    let base = rng.next_u64() as u32;
    println!("prefix length  before -> after");
    for len in [0u32, 8, 16, 24, 31, 32] {
        let other = if len == 32 { base } else { base ^ (1 << (31 - len)) };
        let (a, b) = (anon.anonymize_ip(base), anon.anonymize_ip(other));
        println!(
            "  {:>2} -> {:>2}   anonymized {} / {}",
            shared_prefix_len(base, other),
            shared_prefix_len(a, b),
            dotted(a),
            dotted(b)
        );
    }

    let mut cached = CachedAnonymizer::new(&anon);
    let same = (0..10_000).all(|_| {
        let x = rng.next_u64() as u32 & 0xffff_00ff;
        cached.anonymize_ip(x) == anon.anonymize_ip(x)
    });
    println!("cache agrees with direct calls: {same}");
    Ok(())
}

fn dotted(a: u32) -> String {
    std::net::Ipv4Addr::from(a).to_string()
}
