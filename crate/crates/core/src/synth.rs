//! Seeded synthetic traffic for end-to-end runs.
//!
//! Pairs come from a single Xoshiro256** stream seeded through SplitMix64
//! (`Xoshiro256StarStar::seed_from_u64`). The stream is consumed in a fixed
//! order: the source pool, then the destination pool, then one source draw
//! and one destination draw per packet. Popularity within each pool follows a
//! Zipf law sampled by inverting its cumulative distribution, with
//! `u = (next_u64 >> 11) * 2^-53`.

use std::collections::HashSet;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;
use serde::Serialize;
use thiserror::Error;

use crate::pcap::{CaptureHeader, CaptureWriter, Endianness, IpPair, LinkType, TimestampResolution};

/// Pool sizes above this would make rejection sampling of distinct addresses slow.
pub const MAX_POOL: u64 = 1 << 30;

const ETHERNET_DST_MAC: [u8; 6] = [0x02, 0x00, 0x00, 0x00, 0x00, 0x02];
const ETHERNET_SRC_MAC: [u8; 6] = [0x02, 0x00, 0x00, 0x00, 0x00, 0x01];
const IP_PROTO_EXPERIMENTAL: u8 = 253;
const NOISE_STREAM: u64 = 0x6e6f_6973_6520_6172;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synthetic config: {0}")]
    InvalidConfig(String),
    #[error("timestamp overflows 32-bit seconds at packet {0}")]
    TimestampOverflow(u64),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_packets: u64,
    pub n_sources: u64,
    pub n_destinations: u64,
    /// Zipf exponent of source popularity; 0 is uniform.
    pub source_exponent: f64,
    pub destination_exponent: f64,
    pub link_type: SynthLinkType,
    pub timestamp_start: u64,
    pub inter_packet_micros: u64,
    /// Expected non-IPv4 packets per IPv4 packet, in `[0, 1]`.
    pub noise_fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthLinkType {
    Ethernet,
    RawIp,
}

impl From<SynthLinkType> for LinkType {
    fn from(l: SynthLinkType) -> Self {
        match l {
            SynthLinkType::Ethernet => LinkType::Ethernet,
            SynthLinkType::RawIp => LinkType::RawIp,
        }
    }
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 42,
            n_packets: 1 << 13,
            n_sources: 1000,
            n_destinations: 1000,
            source_exponent: 1.2,
            destination_exponent: 0.0,
            link_type: SynthLinkType::Ethernet,
            timestamp_start: 1_600_000_000,
            inter_packet_micros: 1,
            noise_fraction: 0.0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::InvalidConfig(m.into()));
        if self.n_sources == 0 || self.n_destinations == 0 {
            return bad("n_sources and n_destinations must be at least 1");
        }
        if self.n_sources + self.n_destinations > MAX_POOL {
            return bad("n_sources + n_destinations exceeds 2^30");
        }
        for e in [self.source_exponent, self.destination_exponent] {
            if !(e.is_finite() && e >= 0.0) {
                return bad("exponents must be finite and nonnegative");
            }
        }
        if !(0.0..=1.0).contains(&self.noise_fraction) {
            return bad("noise_fraction must lie in [0, 1]");
        }
        Ok(())
    }
}

/// The generator behind every synthetic stream.
pub fn rng(seed: u64) -> Xoshiro256StarStar {
    Xoshiro256StarStar::seed_from_u64(seed)
}

fn unit(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Zipf(s) over ranks `0..n` by cumulative-table inversion.
#[derive(Debug, Clone)]
pub struct ZipfTable {
    cdf: Vec<f64>,
}

impl ZipfTable {
    pub fn new(n: u64, exponent: f64) -> Self {
        let mut cdf = Vec::with_capacity(n as usize);
        let mut acc = 0.0;
        for k in 1..=n {
            acc += (k as f64).powf(-exponent);
            cdf.push(acc);
        }
        for c in &mut cdf {
            *c /= acc;
        }
        if let Some(last) = cdf.last_mut() {
            *last = 1.0;
        }
        ZipfTable { cdf }
    }

    /// Probability of rank `k` (0-based).
    pub fn probability(&self, k: usize) -> f64 {
        self.cdf[k] - if k == 0 { 0.0 } else { self.cdf[k - 1] }
    }

    pub fn sample(&self, rng: &mut impl RngCore) -> usize {
        let u = unit(rng);
        self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1)
    }
}

fn draw_pool(rng: &mut impl RngCore, n: u64, taken: &mut HashSet<u32>) -> Vec<u32> {
    let mut pool = Vec::with_capacity(n as usize);
    while (pool.len() as u64) < n {
        let addr = (rng.next_u64() >> 32) as u32;
        if taken.insert(addr) {
            pool.push(addr);
        }
    }
    pool
}

fn draw_pools(rng: &mut impl RngCore, config: &SynthConfig) -> (Vec<u32>, Vec<u32>) {
    let mut taken = HashSet::new();
    let sources = draw_pool(rng, config.n_sources, &mut taken);
    let destinations = draw_pool(rng, config.n_destinations, &mut taken);
    (sources, destinations)
}

/// Source and destination address pools, disjoint and fixed by the seed.
pub fn address_pools(config: &SynthConfig) -> Result<(Vec<u32>, Vec<u32>), SynthError> {
    config.validate()?;
    Ok(draw_pools(&mut rng(config.seed), config))
}

/// Exactly `n_packets` pairs; a pure function of `config`.
pub fn generate_pairs(config: &SynthConfig) -> Result<Vec<IpPair>, SynthError> {
    config.validate()?;
    let mut rng = rng(config.seed);
    let (sources, destinations) = draw_pools(&mut rng, config);
    let src_law = ZipfTable::new(config.n_sources, config.source_exponent);
    let dst_law = ZipfTable::new(config.n_destinations, config.destination_exponent);
    Ok((0..config.n_packets)
        .map(|_| {
            let s = sources[src_law.sample(&mut rng)];
            let d = destinations[dst_law.sample(&mut rng)];
            IpPair::new(s, d)
        })
        .collect())
}

/// Link-layer frame carrying a minimal 20-byte IPv4 header for `pair`.
///
/// The header checksum is left zero.
pub fn ipv4_frame(pair: IpPair, link_type: LinkType) -> Vec<u8> {
    let mut frame = Vec::with_capacity(34);
    if link_type == LinkType::Ethernet {
        frame.extend_from_slice(&ETHERNET_DST_MAC);
        frame.extend_from_slice(&ETHERNET_SRC_MAC);
        frame.extend_from_slice(&0x0800u16.to_be_bytes());
    }
    frame.extend_from_slice(&[0x45, 0x00, 0x00, 20, 0, 0, 0, 0, 64, IP_PROTO_EXPERIMENTAL, 0, 0]);
    frame.extend_from_slice(&pair.src.to_be_bytes());
    frame.extend_from_slice(&pair.dst.to_be_bytes());
    frame
}

/// A non-IPv4 frame: ARP request on Ethernet, bare IPv6 header on raw IP.
pub fn noise_frame(link_type: LinkType) -> Vec<u8> {
    match link_type {
        LinkType::Ethernet => {
            let mut f = Vec::with_capacity(42);
            f.extend_from_slice(&[0xff; 6]);
            f.extend_from_slice(&ETHERNET_SRC_MAC);
            f.extend_from_slice(&0x0806u16.to_be_bytes());
            // htype 1, ptype 0x0800, hlen 6, plen 4, op 1 (request)
            f.extend_from_slice(&[0, 1, 0x08, 0x00, 6, 4, 0, 1]);
            f.extend_from_slice(&ETHERNET_SRC_MAC);
            f.extend_from_slice(&[0; 4]);
            f.extend_from_slice(&[0; 6]);
            f.extend_from_slice(&[0; 4]);
            f
        }
        LinkType::RawIp => {
            let mut f = vec![0x60, 0, 0, 0, 0, 0, 59, 64];
            f.extend_from_slice(&[0; 32]);
            f
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct WriteSummary {
    pub ipv4_packets: u64,
    pub noise_packets: u64,
}

/// Write `pairs` as a little-endian microsecond pcap stream.
pub fn write_pcap_to<W: Write>(
    pairs: &[IpPair],
    config: &SynthConfig,
    sink: W,
) -> Result<WriteSummary, SynthError> {
    config.validate()?;
    let link_type = LinkType::from(config.link_type);
    let header = CaptureHeader::new(
        Endianness::Little,
        TimestampResolution::Microsecond,
        65_535,
        link_type,
    );
    let mut writer = CaptureWriter::new(sink, header)?;
    let mut noise_rng = rng(config.seed ^ NOISE_STREAM);
    let noise = noise_frame(link_type);
    let mut slot = 0u64;
    let mut summary = WriteSummary {
        ipv4_packets: 0,
        noise_packets: 0,
    };
    let stamp = |slot: u64| -> Result<(u32, u32), SynthError> {
        let micros = slot
            .checked_mul(config.inter_packet_micros)
            .ok_or(SynthError::TimestampOverflow(slot))?;
        let secs = config
            .timestamp_start
            .checked_add(micros / 1_000_000)
            .and_then(|s| u32::try_from(s).ok())
            .ok_or(SynthError::TimestampOverflow(slot))?;
        Ok((secs, (micros % 1_000_000) as u32))
    };
    for &pair in pairs {
        if config.noise_fraction > 0.0 && unit(&mut noise_rng) < config.noise_fraction {
            let (s, f) = stamp(slot)?;
            writer.write_packet(s, f, &noise)?;
            slot += 1;
            summary.noise_packets += 1;
        }
        let (s, f) = stamp(slot)?;
        writer.write_packet(s, f, &ipv4_frame(pair, link_type))?;
        slot += 1;
        summary.ipv4_packets += 1;
    }
    writer.flush()?;
    Ok(summary)
}

pub fn write_pcap(
    pairs: &[IpPair],
    config: &SynthConfig,
    path: impl AsRef<Path>,
) -> Result<WriteSummary, SynthError> {
    let file = File::create(path)?;
    write_pcap_to(pairs, config, BufWriter::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pcap::{ingest_stream, CaptureReader, IngestReport};

    fn cfg(n: u64) -> SynthConfig {
        SynthConfig {
            n_packets: n,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn reference_sequence_for_seed_42() {
        let mut r = rng(42);
        let first: Vec<u64> = (0..3).map(|_| r.next_u64()).collect();
        assert_eq!(
            first,
            [0x1578_0b2e_0c2e_c716, 0x6104_d986_6d11_3a7e, 0xae17_5332_39e4_99a1]
        );
    }

    #[test]
    fn zero_packets() {
        assert!(generate_pairs(&cfg(0)).unwrap().is_empty());
    }

    #[test]
    fn degenerate_pools_repeat_one_pair() {
        let c = SynthConfig {
            n_sources: 1,
            n_destinations: 1,
            source_exponent: 0.0,
            ..cfg(50)
        };
        let pairs = generate_pairs(&c).unwrap();
        assert!(pairs.iter().all(|&p| p == pairs[0]));
        assert_ne!(pairs[0].src, pairs[0].dst);
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        assert_eq!(generate_pairs(&cfg(500)).unwrap(), generate_pairs(&cfg(500)).unwrap());
        let other = SynthConfig { seed: 43, ..cfg(500) };
        assert_ne!(generate_pairs(&cfg(500)).unwrap(), generate_pairs(&other).unwrap());
    }

    #[test]
    fn pools_are_disjoint() {
        let (s, d) = address_pools(&SynthConfig { n_sources: 300, n_destinations: 700, ..cfg(0) }).unwrap();
        assert_eq!(s.len(), 300);
        assert_eq!(d.len(), 700);
        let s: HashSet<_> = s.into_iter().collect();
        assert_eq!(s.len(), 300);
        assert!(d.iter().all(|a| !s.contains(a)));
    }

    #[test]
    fn top_source_frequency_tracks_zipf() {
        let c = SynthConfig {
            n_packets: 100_000,
            n_sources: 1000,
            source_exponent: 1.2,
            ..SynthConfig::default()
        };
        let (sources, _) = address_pools(&c).unwrap();
        let pairs = generate_pairs(&c).unwrap();
        let top = pairs.iter().filter(|p| p.src == sources[0]).count() as f64 / 1e5;
        let harmonic: f64 = (1..=1000).map(|k| (k as f64).powf(-1.2)).sum();
        let predicted = 1.0 / harmonic;
        assert!(top > predicted / 2.0 && top < predicted * 2.0, "{top} vs {predicted}");
        assert!((ZipfTable::new(1000, 1.2).probability(0) - predicted).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_config() {
        for c in [
            SynthConfig { n_sources: 0, ..cfg(1) },
            SynthConfig { n_destinations: 0, ..cfg(1) },
            SynthConfig { source_exponent: -1.0, ..cfg(1) },
            SynthConfig { destination_exponent: f64::NAN, ..cfg(1) },
            SynthConfig { noise_fraction: 1.5, ..cfg(1) },
        ] {
            assert!(matches!(generate_pairs(&c), Err(SynthError::InvalidConfig(_))));
        }
    }

    #[test]
    fn timestamps_advance_by_interval() {
        let c = SynthConfig {
            inter_packet_micros: 500_000,
            timestamp_start: 1000,
            ..cfg(3)
        };
        let pairs = generate_pairs(&c).unwrap();
        let mut bytes = Vec::new();
        write_pcap_to(&pairs, &c, &mut bytes).unwrap();
        let stamps: Vec<(u32, u32)> = CaptureReader::open(&bytes[..])
            .unwrap()
            .map(|r| r.map(|r| (r.ts_seconds, r.ts_fraction)).unwrap())
            .collect();
        assert_eq!(stamps, [(1000, 0), (1000, 500_000), (1001, 0)]);
    }

    #[test]
    fn timestamp_overflow_is_reported() {
        let c = SynthConfig {
            timestamp_start: u64::from(u32::MAX),
            inter_packet_micros: 1_000_000,
            ..cfg(2)
        };
        let pairs = generate_pairs(&c).unwrap();
        assert!(matches!(
            write_pcap_to(&pairs, &c, io::sink()),
            Err(SynthError::TimestampOverflow(1))
        ));
    }

    #[test]
    fn round_trip_with_noise_for_both_link_types() {
        for link_type in [SynthLinkType::Ethernet, SynthLinkType::RawIp] {
            let c = SynthConfig {
                link_type,
                noise_fraction: 0.25,
                ..cfg(2000)
            };
            let pairs = generate_pairs(&c).unwrap();
            let mut bytes = Vec::new();
            let summary = write_pcap_to(&pairs, &c, &mut bytes).unwrap();
            assert!(summary.noise_packets > 300 && summary.noise_packets < 700);
            let mut report = IngestReport::default();
            let mut back = Vec::new();
            assert!(ingest_stream(&bytes[..], &mut report, &mut |p| back.push(p))
                .unwrap()
                .is_none());
            assert_eq!(back, pairs);
            assert_eq!(report.skipped_non_ipv4, summary.noise_packets);
            assert!(report.is_conserved());
        }
    }
}
