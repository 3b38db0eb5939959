use super::header::LinkType;

const ETHERNET_HEADER_LEN: usize = 14;
const ETHERTYPE_IPV4: u16 = 0x0800;
const ETHERTYPE_VLAN: u16 = 0x8100;
const ETHERTYPE_QINQ: u16 = 0x88a8;
const IPV4_ADDR_END: usize = 20;

/// Source and destination IPv4 addresses of one packet, as big-endian integers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct IpPair {
    pub src: u32,
    pub dst: u32,
}

impl IpPair {
    pub fn new(src: u32, dst: u32) -> Self {
        IpPair { src, dst }
    }
}

/// What a packet yields after header dissection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extraction {
    Pair(IpPair),
    NotIpv4,
    /// Too short to hold the headers needed to decide.
    Truncated,
}

/// Pull the IPv4 source/destination pair out of one link-layer frame.
///
/// Ethernet frames may carry any number of stacked 802.1Q / 802.1ad tags.
/// Raw-IP frames must start with a version-4 header. IP options do not
/// matter: the addresses sit at fixed offsets 12..20 of the IP header.
pub fn extract_ip_pair(payload: &[u8], link_type: LinkType) -> Extraction {
    let ip = match link_type {
        LinkType::Ethernet => {
            if payload.len() < ETHERNET_HEADER_LEN {
                return Extraction::Truncated;
            }
            let mut offset = 12;
            let ethertype = loop {
                let Some(b) = payload.get(offset..offset + 2) else {
                    return Extraction::Truncated;
                };
                let et = u16::from_be_bytes([b[0], b[1]]);
                offset += 2;
                if et == ETHERTYPE_VLAN || et == ETHERTYPE_QINQ {
                    offset += 2; // tag control info
                } else {
                    break et;
                }
            };
            if ethertype != ETHERTYPE_IPV4 {
                return Extraction::NotIpv4;
            }
            &payload[offset.min(payload.len())..]
        }
        LinkType::RawIp => {
            let Some(first) = payload.first() else {
                return Extraction::Truncated;
            };
            if first >> 4 != 4 {
                return Extraction::NotIpv4;
            }
            payload
        }
    };
    if ip.len() < IPV4_ADDR_END {
        return Extraction::Truncated;
    }
    Extraction::Pair(IpPair {
        src: u32::from_be_bytes(ip[12..16].try_into().unwrap()),
        dst: u32::from_be_bytes(ip[16..20].try_into().unwrap()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ipv4_header(src: [u8; 4], dst: [u8; 4]) -> Vec<u8> {
        let mut h = vec![0x45, 0, 0, 20, 0, 0, 0, 0, 64, 253, 0, 0];
        h.extend_from_slice(&src);
        h.extend_from_slice(&dst);
        h
    }

    fn ethernet(tags: &[u16], ethertype: u16, body: &[u8]) -> Vec<u8> {
        let mut f = vec![0x02, 0, 0, 0, 0, 2, 0x02, 0, 0, 0, 0, 1];
        for &t in tags {
            f.extend_from_slice(&t.to_be_bytes());
            f.extend_from_slice(&[0x00, 0x2a]);
        }
        f.extend_from_slice(&ethertype.to_be_bytes());
        f.extend_from_slice(body);
        f
    }

    #[test]
    fn ethernet_ipv4() {
        let frame = ethernet(&[], 0x0800, &ipv4_header([10, 0, 0, 1], [192, 168, 1, 2]));
        assert_eq!(
            extract_ip_pair(&frame, LinkType::Ethernet),
            Extraction::Pair(IpPair::new(0x0A00_0001, 0xC0A8_0102))
        );
    }

    #[test]
    fn ipv6_and_arp_are_skipped() {
        let frame = ethernet(&[], 0x86DD, &[0x60; 40]);
        assert_eq!(extract_ip_pair(&frame, LinkType::Ethernet), Extraction::NotIpv4);
        let frame = ethernet(&[], 0x0806, &[0; 28]);
        assert_eq!(extract_ip_pair(&frame, LinkType::Ethernet), Extraction::NotIpv4);
    }

    #[test]
    fn vlan_tags_shift_the_ip_header() {
        let ip = ipv4_header([1, 2, 3, 4], [5, 6, 7, 8]);
        let single = ethernet(&[0x8100], 0x0800, &ip);
        let stacked = ethernet(&[0x88a8, 0x8100], 0x0800, &ip);
        let want = Extraction::Pair(IpPair::new(0x0102_0304, 0x0506_0708));
        assert_eq!(single.len(), 14 + 4 + 20);
        assert_eq!(&single[18 + 12..18 + 16], &[1, 2, 3, 4]);
        assert_eq!(extract_ip_pair(&single, LinkType::Ethernet), want);
        assert_eq!(extract_ip_pair(&stacked, LinkType::Ethernet), want);
        let tagged_v6 = ethernet(&[0x8100], 0x86DD, &[0x60; 40]);
        assert_eq!(extract_ip_pair(&tagged_v6, LinkType::Ethernet), Extraction::NotIpv4);
    }

    #[test]
    fn raw_ip_requires_version_four() {
        let ip = ipv4_header([9, 9, 9, 9], [8, 8, 8, 8]);
        assert_eq!(
            extract_ip_pair(&ip, LinkType::RawIp),
            Extraction::Pair(IpPair::new(0x0909_0909, 0x0808_0808))
        );
        assert_eq!(extract_ip_pair(&[0x60; 40], LinkType::RawIp), Extraction::NotIpv4);
        assert_eq!(extract_ip_pair(&[], LinkType::RawIp), Extraction::Truncated);
    }

    #[test]
    fn options_do_not_move_addresses() {
        let mut ip = ipv4_header([1, 1, 1, 1], [2, 2, 2, 2]);
        ip[0] = 0x46;
        ip.extend_from_slice(&[1, 1, 1, 0]);
        assert_eq!(
            extract_ip_pair(&ip, LinkType::RawIp),
            Extraction::Pair(IpPair::new(0x0101_0101, 0x0202_0202))
        );
    }

    #[test]
    fn short_frames_are_truncated() {
        let ip = ipv4_header([1, 2, 3, 4], [5, 6, 7, 8]);
        let frame = ethernet(&[], 0x0800, &ip[..19]);
        assert_eq!(extract_ip_pair(&frame, LinkType::Ethernet), Extraction::Truncated);
        assert_eq!(extract_ip_pair(&frame[..10], LinkType::Ethernet), Extraction::Truncated);
        let tagged = ethernet(&[0x8100], 0x0800, &[]);
        assert_eq!(extract_ip_pair(&tagged[..15], LinkType::Ethernet), Extraction::Truncated);
        assert_eq!(extract_ip_pair(&ip[..19], LinkType::RawIp), Extraction::Truncated);
    }
}
