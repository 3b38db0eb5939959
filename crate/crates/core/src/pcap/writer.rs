use std::io::{self, Write};

use super::header::{CaptureHeader, RECORD_HEADER_LEN};

/// Writes classic pcap in the byte order and resolution of its header.
pub struct CaptureWriter<W> {
    sink: W,
    header: CaptureHeader,
}

impl<W: Write> CaptureWriter<W> {
    pub fn new(mut sink: W, header: CaptureHeader) -> io::Result<Self> {
        sink.write_all(&header.to_bytes())?;
        Ok(CaptureWriter { sink, header })
    }

    pub fn header(&self) -> &CaptureHeader {
        &self.header
    }

    /// Append one record whose original length equals the payload length.
    pub fn write_packet(&mut self, ts_seconds: u32, ts_fraction: u32, payload: &[u8]) -> io::Result<()> {
        self.write_record(ts_seconds, ts_fraction, payload.len() as u32, payload)
    }

    pub fn write_record(
        &mut self,
        ts_seconds: u32,
        ts_fraction: u32,
        original_length: u32,
        payload: &[u8],
    ) -> io::Result<()> {
        let e = self.header.endianness;
        let mut hdr = [0u8; RECORD_HEADER_LEN];
        hdr[0..4].copy_from_slice(&e.put_u32(ts_seconds));
        hdr[4..8].copy_from_slice(&e.put_u32(ts_fraction));
        hdr[8..12].copy_from_slice(&e.put_u32(payload.len() as u32));
        hdr[12..16].copy_from_slice(&e.put_u32(original_length));
        self.sink.write_all(&hdr)?;
        self.sink.write_all(payload)
    }

    pub fn flush(&mut self) -> io::Result<()> {
        self.sink.flush()
    }

    pub fn into_inner(self) -> W {
        self.sink
    }
}
