//! Network-theoretic statistics of an aggregate traffic matrix.
//!
//! [`compute_stats`] works on the sorted coordinate entries: one row-major
//! pass (rows are contiguous) and one pass over the entries regrouped by
//! column. [`oracle_stats`] recomputes every field from the raw pair list with
//! hash-map tallies and is kept independent of the matrix code.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::anonymizer::AnonPair;
use crate::matrix::TrafficMatrix;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetStats {
    /// Total packet count.
    pub valid_packets: u64,
    /// Nonzero cells.
    pub unique_links: u64,
    /// Nonzero rows.
    pub unique_sources: u64,
    /// Nonzero columns.
    pub unique_destinations: u64,
    pub max_link_packets: u64,
    pub max_source_packets: u64,
    pub max_source_fanout: u64,
    pub max_destination_packets: u64,
    pub max_destination_fanin: u64,
    pub links_with_one_packet: u64,
    pub sources_with_one_packet: u64,
    pub destinations_with_one_packet: u64,
    pub sources_with_fanout_one: u64,
    pub destinations_with_fanin_one: u64,
}

pub const FIELD_NAMES: [&str; 14] = [
    "valid_packets",
    "unique_links",
    "unique_sources",
    "unique_destinations",
    "max_link_packets",
    "max_source_packets",
    "max_source_fanout",
    "max_destination_packets",
    "max_destination_fanin",
    "links_with_one_packet",
    "sources_with_one_packet",
    "destinations_with_one_packet",
    "sources_with_fanout_one",
    "destinations_with_fanin_one",
];

/// One field that differs between two [`NetStats`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FieldDiff {
    pub field: &'static str,
    pub left: u64,
    pub right: u64,
}

impl NetStats {
    pub fn fields(&self) -> [(&'static str, u64); 14] {
        let values = [
            self.valid_packets,
            self.unique_links,
            self.unique_sources,
            self.unique_destinations,
            self.max_link_packets,
            self.max_source_packets,
            self.max_source_fanout,
            self.max_destination_packets,
            self.max_destination_fanin,
            self.links_with_one_packet,
            self.sources_with_one_packet,
            self.destinations_with_one_packet,
            self.sources_with_fanout_one,
            self.destinations_with_fanin_one,
        ];
        std::array::from_fn(|i| (FIELD_NAMES[i], values[i]))
    }

    pub fn diff(&self, other: &NetStats) -> Vec<FieldDiff> {
        self.fields()
            .iter()
            .zip(other.fields())
            .filter(|((_, a), (_, b))| a != b)
            .map(|(&(field, left), (_, right))| FieldDiff { field, left, right })
            .collect()
    }

    /// Names of the structural inequalities this instance violates.
    pub fn violations(&self) -> Vec<&'static str> {
        let s = self;
        let checks = [
            (s.unique_links <= s.valid_packets, "unique_links <= valid_packets"),
            (s.unique_sources <= s.unique_links, "unique_sources <= unique_links"),
            (s.unique_destinations <= s.unique_links, "unique_destinations <= unique_links"),
            (s.max_source_fanout <= s.unique_destinations, "max_source_fanout <= unique_destinations"),
            (s.max_destination_fanin <= s.unique_sources, "max_destination_fanin <= unique_sources"),
            (s.max_link_packets <= s.max_source_packets, "max_link_packets <= max_source_packets"),
            (s.max_link_packets <= s.max_destination_packets, "max_link_packets <= max_destination_packets"),
            (s.sources_with_one_packet <= s.sources_with_fanout_one, "sources_with_one_packet <= sources_with_fanout_one"),
            (s.destinations_with_one_packet <= s.destinations_with_fanin_one, "destinations_with_one_packet <= destinations_with_fanin_one"),
            (s.links_with_one_packet <= s.unique_links, "links_with_one_packet <= unique_links"),
            (s.max_source_packets <= s.valid_packets, "max_source_packets <= valid_packets"),
            (s.max_destination_packets <= s.valid_packets, "max_destination_packets <= valid_packets"),
        ];
        checks.iter().filter(|(ok, _)| !ok).map(|&(_, name)| name).collect()
    }

    /// Aligned two-column text table.
    pub fn table(&self) -> String {
        let width = FIELD_NAMES.iter().map(|n| n.len()).max().unwrap_or(0);
        let mut out = String::new();
        for (name, value) in self.fields() {
            let _ = writeln!(out, "{name:<width$}  {value:>20}");
        }
        out
    }
}

/// Tracks one row's or column's mass and degree while scanning a group.
#[derive(Default)]
struct LineStats {
    lines: u64,
    max_mass: u64,
    max_degree: u64,
    mass_one: u64,
    degree_one: u64,
}

impl LineStats {
    fn close(&mut self, mass: u64, degree: u64) {
        self.lines += 1;
        self.max_mass = self.max_mass.max(mass);
        self.max_degree = self.max_degree.max(degree);
        self.mass_one += u64::from(mass == 1);
        self.degree_one += u64::from(degree == 1);
    }

    /// Scan `(line, count)` items already grouped by line.
    fn scan(items: impl Iterator<Item = (u32, u64)>) -> Self {
        let mut stats = LineStats::default();
        let mut current: Option<(u32, u64, u64)> = None;
        for (line, count) in items {
            current = match current {
                Some((l, mass, degree)) if l == line => {
                    Some((l, mass.saturating_add(count), degree + 1))
                }
                Some((_, mass, degree)) => {
                    stats.close(mass, degree);
                    Some((line, count, 1))
                }
                None => Some((line, count, 1)),
            };
        }
        if let Some((_, mass, degree)) = current {
            stats.close(mass, degree);
        }
        stats
    }
}

/// Statistics of a traffic matrix, normally the aggregate of all windows.
pub fn compute_stats(m: &TrafficMatrix) -> NetStats {
    let entries = m.entries();
    let mut valid_packets = 0u64;
    let mut max_link_packets = 0u64;
    let mut links_with_one_packet = 0u64;
    for e in entries {
        valid_packets = valid_packets.saturating_add(e.count);
        max_link_packets = max_link_packets.max(e.count);
        links_with_one_packet += u64::from(e.count == 1);
    }

    // entries are row-major sorted, so rows are already contiguous
    let rows = LineStats::scan(entries.iter().map(|e| (e.row, e.count)));

    let mut by_column: Vec<(u32, u64)> = entries.iter().map(|e| (e.col, e.count)).collect();
    by_column.sort_unstable_by_key(|&(col, _)| col);
    let cols = LineStats::scan(by_column.into_iter());

    NetStats {
        valid_packets,
        unique_links: entries.len() as u64,
        unique_sources: rows.lines,
        unique_destinations: cols.lines,
        max_link_packets,
        max_source_packets: rows.max_mass,
        max_source_fanout: rows.max_degree,
        max_destination_packets: cols.max_mass,
        max_destination_fanin: cols.max_degree,
        links_with_one_packet,
        sources_with_one_packet: rows.mass_one,
        destinations_with_one_packet: cols.mass_one,
        sources_with_fanout_one: rows.degree_one,
        destinations_with_fanin_one: cols.degree_one,
    }
}

/// Brute-force statistics straight from the pair list (test scale).
pub fn oracle_stats<'a, I>(pairs: I) -> NetStats
where
    I: IntoIterator<Item = &'a AnonPair>,
{
    oracle_coordinate_stats(pairs.into_iter().map(|p| (p.src(), p.dst())))
}

/// [`oracle_stats`] over bare coordinates, for tallying addresses before anonymization.
pub fn oracle_coordinate_stats(pairs: impl Iterator<Item = (u32, u32)>) -> NetStats {
    let mut link_packets: HashMap<(u32, u32), u64> = HashMap::new();
    let mut source_packets: HashMap<u32, u64> = HashMap::new();
    let mut destination_packets: HashMap<u32, u64> = HashMap::new();
    let mut source_peers: HashMap<u32, HashSet<u32>> = HashMap::new();
    let mut destination_peers: HashMap<u32, HashSet<u32>> = HashMap::new();
    let mut total = 0u64;

    for (src, dst) in pairs {
        total += 1;
        *link_packets.entry((src, dst)).or_insert(0) += 1;
        *source_packets.entry(src).or_insert(0) += 1;
        *destination_packets.entry(dst).or_insert(0) += 1;
        source_peers.entry(src).or_default().insert(dst);
        destination_peers.entry(dst).or_default().insert(src);
    }

    fn max_of<K>(m: &HashMap<K, u64>) -> u64 {
        m.values().copied().max().unwrap_or(0)
    }
    fn ones<K>(m: &HashMap<K, u64>) -> u64 {
        m.values().filter(|&&v| v == 1).count() as u64
    }
    let max_degree =
        |m: &HashMap<u32, HashSet<u32>>| m.values().map(|s| s.len() as u64).max().unwrap_or(0);
    let degree_ones = |m: &HashMap<u32, HashSet<u32>>| m.values().filter(|s| s.len() == 1).count() as u64;

    NetStats {
        valid_packets: total,
        unique_links: link_packets.len() as u64,
        unique_sources: source_packets.len() as u64,
        unique_destinations: destination_packets.len() as u64,
        max_link_packets: max_of(&link_packets),
        max_source_packets: max_of(&source_packets),
        max_source_fanout: max_degree(&source_peers),
        max_destination_packets: max_of(&destination_packets),
        max_destination_fanin: max_degree(&destination_peers),
        links_with_one_packet: ones(&link_packets),
        sources_with_one_packet: ones(&source_packets),
        destinations_with_one_packet: ones(&destination_packets),
        sources_with_fanout_one: degree_ones(&source_peers),
        destinations_with_fanin_one: degree_ones(&destination_peers),
    }
}

/// Context recorded alongside the statistics.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub window_size: Option<u64>,
    pub matrix_count: u64,
    /// Short hash identifying the key; never the key itself.
    pub key_fingerprint: Option<String>,
}

/// The JSON statistics report: the 14 fields flat, plus `meta`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatsReport {
    #[serde(flatten)]
    pub stats: NetStats,
    pub meta: ReportMeta,
}

impl StatsReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}
