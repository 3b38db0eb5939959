//! Classic pcap capture files.
//!
//! Captures are read as a stream: [`CaptureReader::open`] validates the
//! 24-byte global header, then records are decoded one at a time so memory
//! use is bounded by the snap length. [`extract_ip_pair`] dissects the
//! link-layer frame down to the IPv4 source/destination addresses and
//! [`ingest_files`] drives both over an ordered list of files.
//!
//! Only classic pcap is understood (no pcapng), with Ethernet (1) and raw
//! IP (101) framing.

mod extract;
mod header;
mod reader;
mod writer;

use std::fs::File;
use std::io::{self, BufReader, Read};
use std::ops::ControlFlow;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use extract::{extract_ip_pair, Extraction, IpPair};
pub use header::{
    CaptureHeader, Endianness, LinkType, TimestampResolution, GLOBAL_HEADER_LEN, MAGIC_MICROS,
    MAGIC_NANOS, RECORD_HEADER_LEN,
};
pub use reader::{CaptureReader, PacketRecord};
pub use writer::CaptureWriter;

#[derive(Debug, Error)]
pub enum PcapError {
    #[error("unknown pcap magic {0:02x?}")]
    UnknownMagic([u8; 4]),
    #[error("pcap global header truncated: {0} of 24 bytes")]
    TruncatedHeader(usize),
    #[error("unsupported link type {0} (supported: 1 ethernet, 101 raw ip)")]
    UnsupportedLinkType(u32),
    #[error("pcap snap length is zero")]
    ZeroSnapLength,
    #[error("record truncated: needed {expected} bytes, {available} available")]
    TruncatedRecord { expected: usize, available: usize },
    #[error("record captured length {captured_length} exceeds snap length {snap_length}")]
    OversizedRecord { captured_length: u32, snap_length: u32 },
    #[error("record captured length {captured_length} exceeds original length {original_length}")]
    InconsistentLengths { captured_length: u32, original_length: u32 },
    #[error("record timestamp fraction {0} out of range")]
    InvalidTimestamp(u32),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Read until `buf` is full or the stream ends; returns the bytes read.
pub(crate) fn read_full<R: Read + ?Sized>(source: &mut R, buf: &mut [u8]) -> io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match source.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(filled)
}

/// Packet and file totals of an ingest run.
///
/// `packets_read == pairs_extracted + skipped_non_ipv4 + skipped_truncated`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub packets_read: u64,
    pub pairs_extracted: u64,
    pub skipped_non_ipv4: u64,
    pub skipped_truncated: u64,
    pub files_processed: u64,
    /// Files that could not be opened as a capture.
    pub files_skipped: u64,
    /// Opened files whose record stream ended in corruption.
    pub files_truncated: u64,
}

impl IngestReport {
    pub fn is_conserved(&self) -> bool {
        self.packets_read == self.pairs_extracted + self.skipped_non_ipv4 + self.skipped_truncated
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("no input files given")]
    NoInputs,
    #[error("none of the {0} input files could be opened")]
    NoReadableFiles(usize),
}

/// Stream one capture into `sink`, updating `report`.
///
/// Header errors are returned. A corrupt or truncated record ends the stream:
/// packets before it stay counted and the error is returned in `Ok(Some(..))`.
pub fn ingest_stream<R: Read>(
    source: R,
    report: &mut IngestReport,
    sink: &mut impl FnMut(IpPair),
) -> Result<Option<PcapError>, PcapError> {
    ingest_stream_until(source, report, &mut |p| {
        sink(p);
        ControlFlow::Continue(())
    })
    .map(|(_, e)| e)
}

/// Like [`ingest_stream`], but `sink` may stop the read early. The returned
/// flag is true when it did.
pub fn ingest_stream_until<R: Read>(
    source: R,
    report: &mut IngestReport,
    sink: &mut impl FnMut(IpPair) -> ControlFlow<()>,
) -> Result<(bool, Option<PcapError>), PcapError> {
    let mut reader = CaptureReader::open(source)?;
    let link_type = reader.header().link_type;
    let mut record = PacketRecord::default();
    loop {
        match reader.read_into(&mut record) {
            Ok(true) => {}
            Ok(false) => return Ok((false, None)),
            Err(e) => return Ok((false, Some(e))),
        }
        report.packets_read += 1;
        match extract_ip_pair(&record.payload, link_type) {
            Extraction::Pair(pair) => {
                report.pairs_extracted += 1;
                if sink(pair).is_break() {
                    return Ok((true, None));
                }
            }
            Extraction::NotIpv4 => report.skipped_non_ipv4 += 1,
            Extraction::Truncated => report.skipped_truncated += 1,
        }
    }
}

/// Feed every IPv4 pair of `paths`, in file order then packet order, to `sink`.
///
/// Files that fail to open are logged and skipped; the run fails only when
/// no file could be opened at all.
pub fn ingest_files<P: AsRef<Path>>(
    paths: &[P],
    mut sink: impl FnMut(IpPair),
) -> Result<IngestReport, IngestError> {
    ingest_files_until(paths, |p| {
        sink(p);
        ControlFlow::Continue(())
    })
}

/// [`ingest_files`] with a sink that can stop the whole run.
pub fn ingest_files_until<P: AsRef<Path>>(
    paths: &[P],
    mut sink: impl FnMut(IpPair) -> ControlFlow<()>,
) -> Result<IngestReport, IngestError> {
    if paths.is_empty() {
        return Err(IngestError::NoInputs);
    }
    let mut report = IngestReport::default();
    for path in paths {
        let path = path.as_ref();
        let opened = File::open(path)
            .map_err(PcapError::from)
            .and_then(|f| {
                ingest_stream_until(BufReader::with_capacity(1 << 16, f), &mut report, &mut sink)
            });
        match opened {
            Ok((stopped, corruption)) => {
                report.files_processed += 1;
                if let Some(e) = corruption {
                    log::warn!("{}: capture ends early: {e}", path.display());
                    report.files_truncated += 1;
                }
                if stopped {
                    return Ok(report);
                }
            }
            Err(e) => {
                log::warn!("{}: skipped: {e}", path.display());
                report.files_skipped += 1;
            }
        }
    }
    if report.files_processed == 0 {
        return Err(IngestError::NoReadableFiles(paths.len()));
    }
    Ok(report)
}
