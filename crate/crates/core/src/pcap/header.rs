use std::io::Read;

use super::{read_full, PcapError};

/// Size in bytes of the classic pcap global header.
pub const GLOBAL_HEADER_LEN: usize = 24;
/// Size in bytes of a per-packet record header.
pub const RECORD_HEADER_LEN: usize = 16;

pub const MAGIC_MICROS: u32 = 0xa1b2_c3d4;
pub const MAGIC_NANOS: u32 = 0xa1b2_3c4d;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endianness {
    Little,
    Big,
}

impl Endianness {
    pub(crate) fn u16(self, b: [u8; 2]) -> u16 {
        match self {
            Endianness::Little => u16::from_le_bytes(b),
            Endianness::Big => u16::from_be_bytes(b),
        }
    }

    pub(crate) fn u32(self, b: [u8; 4]) -> u32 {
        match self {
            Endianness::Little => u32::from_le_bytes(b),
            Endianness::Big => u32::from_be_bytes(b),
        }
    }

    pub(crate) fn put_u16(self, v: u16) -> [u8; 2] {
        match self {
            Endianness::Little => v.to_le_bytes(),
            Endianness::Big => v.to_be_bytes(),
        }
    }

    pub(crate) fn put_u32(self, v: u32) -> [u8; 4] {
        match self {
            Endianness::Little => v.to_le_bytes(),
            Endianness::Big => v.to_be_bytes(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimestampResolution {
    Microsecond,
    Nanosecond,
}

impl TimestampResolution {
    /// Number of fraction units per second.
    pub fn units_per_second(self) -> u32 {
        match self {
            TimestampResolution::Microsecond => 1_000_000,
            TimestampResolution::Nanosecond => 1_000_000_000,
        }
    }
}

/// Link-layer framing of the packets in a capture.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LinkType {
    /// LINKTYPE_ETHERNET (1)
    Ethernet,
    /// LINKTYPE_RAW (101): packets start at the IP header.
    RawIp,
}

impl LinkType {
    pub fn code(self) -> u32 {
        match self {
            LinkType::Ethernet => 1,
            LinkType::RawIp => 101,
        }
    }

    pub fn from_code(code: u32) -> Option<Self> {
        match code {
            1 => Some(LinkType::Ethernet),
            101 => Some(LinkType::RawIp),
            _ => None,
        }
    }
}

/// Validated global header of a classic pcap file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CaptureHeader {
    pub endianness: Endianness,
    pub timestamp_resolution: TimestampResolution,
    pub version_major: u16,
    pub version_minor: u16,
    pub snap_length: u32,
    pub link_type: LinkType,
}

impl CaptureHeader {
    /// Header with the conventional 2.4 version and the given framing.
    pub fn new(
        endianness: Endianness,
        timestamp_resolution: TimestampResolution,
        snap_length: u32,
        link_type: LinkType,
    ) -> Self {
        CaptureHeader {
            endianness,
            timestamp_resolution,
            version_major: 2,
            version_minor: 4,
            snap_length,
            link_type,
        }
    }

    /// Decode the 24-byte global header.
    pub fn parse(bytes: &[u8; GLOBAL_HEADER_LEN]) -> Result<Self, PcapError> {
        let magic_le = u32::from_le_bytes(bytes[0..4].try_into().unwrap());
        let (endianness, timestamp_resolution) = match magic_le {
            MAGIC_MICROS => (Endianness::Little, TimestampResolution::Microsecond),
            MAGIC_NANOS => (Endianness::Little, TimestampResolution::Nanosecond),
            m if m.swap_bytes() == MAGIC_MICROS => (Endianness::Big, TimestampResolution::Microsecond),
            m if m.swap_bytes() == MAGIC_NANOS => (Endianness::Big, TimestampResolution::Nanosecond),
            _ => return Err(PcapError::UnknownMagic(bytes[0..4].try_into().unwrap())),
        };
        let e = endianness;
        let version_major = e.u16(bytes[4..6].try_into().unwrap());
        let version_minor = e.u16(bytes[6..8].try_into().unwrap());
        // bytes 8..16: thiszone and sigfigs, ignored
        let snap_length = e.u32(bytes[16..20].try_into().unwrap());
        let link_code = e.u32(bytes[20..24].try_into().unwrap());
        if snap_length == 0 {
            return Err(PcapError::ZeroSnapLength);
        }
        let link_type =
            LinkType::from_code(link_code).ok_or(PcapError::UnsupportedLinkType(link_code))?;
        Ok(CaptureHeader {
            endianness,
            timestamp_resolution,
            version_major,
            version_minor,
            snap_length,
            link_type,
        })
    }

    /// Read and validate the global header, leaving `source` at the first record.
    pub fn read_from<R: Read>(source: &mut R) -> Result<Self, PcapError> {
        let mut buf = [0u8; GLOBAL_HEADER_LEN];
        let n = read_full(source, &mut buf)?;
        if n < GLOBAL_HEADER_LEN {
            return Err(PcapError::TruncatedHeader(n));
        }
        Self::parse(&buf)
    }

    pub fn to_bytes(&self) -> [u8; GLOBAL_HEADER_LEN] {
        let e = self.endianness;
        let magic = match self.timestamp_resolution {
            TimestampResolution::Microsecond => MAGIC_MICROS,
            TimestampResolution::Nanosecond => MAGIC_NANOS,
        };
        let mut out = [0u8; GLOBAL_HEADER_LEN];
        out[0..4].copy_from_slice(&e.put_u32(magic));
        out[4..6].copy_from_slice(&e.put_u16(self.version_major));
        out[6..8].copy_from_slice(&e.put_u16(self.version_minor));
        out[16..20].copy_from_slice(&e.put_u32(self.snap_length));
        out[20..24].copy_from_slice(&e.put_u32(self.link_type.code()));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header_bytes(magic: [u8; 4], big: bool, snap: u32, link: u32) -> [u8; 24] {
        let mut b = [0u8; 24];
        b[0..4].copy_from_slice(&magic);
        let put = |v: u32| if big { v.to_be_bytes() } else { v.to_le_bytes() };
        let put16 = |v: u16| if big { v.to_be_bytes() } else { v.to_le_bytes() };
        b[4..6].copy_from_slice(&put16(2));
        b[6..8].copy_from_slice(&put16(4));
        b[16..20].copy_from_slice(&put(snap));
        b[20..24].copy_from_slice(&put(link));
        b
    }

    #[test]
    fn magic_selects_endianness_and_resolution() {
        let cases = [
            ([0xd4, 0xc3, 0xb2, 0xa1], false, Endianness::Little, TimestampResolution::Microsecond),
            ([0xa1, 0xb2, 0xc3, 0xd4], true, Endianness::Big, TimestampResolution::Microsecond),
            ([0x4d, 0x3c, 0xb2, 0xa1], false, Endianness::Little, TimestampResolution::Nanosecond),
            ([0xa1, 0xb2, 0x3c, 0x4d], true, Endianness::Big, TimestampResolution::Nanosecond),
        ];
        for (magic, big, endianness, res) in cases {
            let h = CaptureHeader::parse(&header_bytes(magic, big, 65535, 1)).unwrap();
            assert_eq!(h.endianness, endianness);
            assert_eq!(h.timestamp_resolution, res);
            assert_eq!((h.version_major, h.version_minor), (2, 4));
            assert_eq!(h.snap_length, 65535);
            assert_eq!(h.link_type, LinkType::Ethernet);
        }
    }

    #[test]
    fn short_header_is_truncated() {
        let bytes = header_bytes([0xd4, 0xc3, 0xb2, 0xa1], false, 65535, 1);
        let err = CaptureHeader::read_from(&mut &bytes[..20]).unwrap_err();
        assert!(matches!(err, PcapError::TruncatedHeader(20)));
    }

    #[test]
    fn rejects_unknown_magic_and_link_types() {
        let err = CaptureHeader::parse(&header_bytes(*b"XXXX", false, 65535, 1)).unwrap_err();
        assert!(matches!(err, PcapError::UnknownMagic(_)));
        let err =
            CaptureHeader::parse(&header_bytes([0xd4, 0xc3, 0xb2, 0xa1], false, 65535, 113))
                .unwrap_err();
        assert!(matches!(err, PcapError::UnsupportedLinkType(113)));
        let err = CaptureHeader::parse(&header_bytes([0xd4, 0xc3, 0xb2, 0xa1], false, 0, 101))
            .unwrap_err();
        assert!(matches!(err, PcapError::ZeroSnapLength));
    }

    #[test]
    fn encode_decode() {
        for e in [Endianness::Little, Endianness::Big] {
            for r in [TimestampResolution::Microsecond, TimestampResolution::Nanosecond] {
                let h = CaptureHeader::new(e, r, 262_144, LinkType::RawIp);
                assert_eq!(CaptureHeader::parse(&h.to_bytes()).unwrap(), h);
            }
        }
    }
}
