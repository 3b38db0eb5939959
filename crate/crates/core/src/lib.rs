//! Anonymized network-sensing pipeline.
//!
//! Packet captures go in; anonymized, windowed, hypersparse traffic matrices
//! come out, and from their sum a set of network-theoretic statistics.
//!
//! | stage | module |
//! |---|---|
//! | stream pcap files, pull IPv4 source/destination | [`pcap`] |
//! | prefix-preserving address anonymization | [`anonymizer`] |
//! | per-window traffic matrices and their sum | [`matrix`] |
//! | TMX matrix files grouped into tar archives | [`store`] |
//! | statistics and the brute-force oracle | [`netstats`] |
//! | seeded synthetic captures | [`synth`] |
//! | multi-threaded end-to-end runs | [`pipeline`] |
//!
//! The `examples/` directory has one runnable program per stage.

pub mod anonymizer;
pub mod cli;
pub mod matrix;
pub mod netstats;
pub mod pcap;
pub mod pipeline;
pub mod store;
pub mod synth;

pub use anonymizer::{AnonKey, AnonPair, Anonymizer};
pub use matrix::{TrafficMatrix, WindowConfig};
pub use netstats::NetStats;
pub use pcap::{IngestReport, IpPair};
