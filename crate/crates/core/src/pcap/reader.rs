use std::io::Read;

use super::header::{CaptureHeader, RECORD_HEADER_LEN};
use super::{read_full, PcapError};

/// One captured packet as stored in the file.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PacketRecord {
    pub ts_seconds: u32,
    /// Sub-second part in the capture's timestamp resolution.
    pub ts_fraction: u32,
    pub captured_length: u32,
    pub original_length: u32,
    pub payload: Vec<u8>,
}

/// Streaming reader over a classic pcap capture.
///
/// Only one record is buffered at a time, so memory stays proportional to the
/// snap length whatever the size of the underlying stream.
pub struct CaptureReader<R> {
    source: R,
    header: CaptureHeader,
    finished: bool,
}

impl<R: Read> CaptureReader<R> {
    /// Validate the global header and position the reader at the first record.
    pub fn open(mut source: R) -> Result<Self, PcapError> {
        let header = CaptureHeader::read_from(&mut source)?;
        Ok(CaptureReader {
            source,
            header,
            finished: false,
        })
    }

    pub fn header(&self) -> &CaptureHeader {
        &self.header
    }

    /// Read the next record into `record`, reusing its payload allocation.
    ///
    /// Returns `Ok(false)` at a clean end of stream. Any record-level error
    /// ends the stream: later calls return `Ok(false)`.
    pub fn read_into(&mut self, record: &mut PacketRecord) -> Result<bool, PcapError> {
        if self.finished {
            return Ok(false);
        }
        let result = self.read_record(record);
        if !matches!(result, Ok(true)) {
            self.finished = true;
        }
        result
    }

    pub fn next_packet(&mut self) -> Result<Option<PacketRecord>, PcapError> {
        let mut record = PacketRecord::default();
        Ok(self.read_into(&mut record)?.then_some(record))
    }

    fn read_record(&mut self, record: &mut PacketRecord) -> Result<bool, PcapError> {
        let mut hdr = [0u8; RECORD_HEADER_LEN];
        let n = read_full(&mut self.source, &mut hdr)?;
        if n == 0 {
            return Ok(false);
        }
        if n < RECORD_HEADER_LEN {
            return Err(PcapError::TruncatedRecord {
                expected: RECORD_HEADER_LEN,
                available: n,
            });
        }
        let e = self.header.endianness;
        let ts_seconds = e.u32(hdr[0..4].try_into().unwrap());
        let ts_fraction = e.u32(hdr[4..8].try_into().unwrap());
        let captured_length = e.u32(hdr[8..12].try_into().unwrap());
        let original_length = e.u32(hdr[12..16].try_into().unwrap());

        if captured_length > self.header.snap_length {
            return Err(PcapError::OversizedRecord {
                captured_length,
                snap_length: self.header.snap_length,
            });
        }
        if captured_length > original_length {
            return Err(PcapError::InconsistentLengths {
                captured_length,
                original_length,
            });
        }
        if ts_fraction >= self.header.timestamp_resolution.units_per_second() {
            return Err(PcapError::InvalidTimestamp(ts_fraction));
        }

        let len = captured_length as usize;
        record.payload.resize(len, 0);
        let got = read_full(&mut self.source, &mut record.payload)?;
        if got < len {
            record.payload.truncate(got);
            return Err(PcapError::TruncatedRecord {
                expected: RECORD_HEADER_LEN + len,
                available: RECORD_HEADER_LEN + got,
            });
        }
        record.ts_seconds = ts_seconds;
        record.ts_fraction = ts_fraction;
        record.captured_length = captured_length;
        record.original_length = original_length;
        Ok(true)
    }
}

impl<R: Read> Iterator for CaptureReader<R> {
    type Item = Result<PacketRecord, PcapError>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_packet().transpose()
    }
}
