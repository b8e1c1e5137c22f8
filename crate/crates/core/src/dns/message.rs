use std::fmt;
use std::net::{Ipv4Addr, Ipv6Addr};

use super::{Name, WireError};

pub const HEADER_LEN: usize = 12;
pub const CLASS_IN: u16 = 1;
pub const DEFAULT_EDNS_PAYLOAD: u16 = 1232;
const MAX_POINTER_HOPS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum RecordType {
    A,
    Ns,
    Txt,
    Aaaa,
    Opt,
    Ds,
    Rrsig,
    Dnskey,
    Other(u16),
}

impl RecordType {
    pub fn code(self) -> u16 {
        match self {
            RecordType::A => 1,
            RecordType::Ns => 2,
            RecordType::Txt => 16,
            RecordType::Aaaa => 28,
            RecordType::Opt => 41,
            RecordType::Ds => 43,
            RecordType::Rrsig => 46,
            RecordType::Dnskey => 48,
            RecordType::Other(c) => c,
        }
    }

    pub fn from_code(code: u16) -> Self {
        match code {
            1 => RecordType::A,
            2 => RecordType::Ns,
            16 => RecordType::Txt,
            28 => RecordType::Aaaa,
            41 => RecordType::Opt,
            43 => RecordType::Ds,
            46 => RecordType::Rrsig,
            48 => RecordType::Dnskey,
            c => RecordType::Other(c),
        }
    }

    pub fn mnemonic(self) -> String {
        match self {
            RecordType::A => "A".into(),
            RecordType::Ns => "NS".into(),
            RecordType::Txt => "TXT".into(),
            RecordType::Aaaa => "AAAA".into(),
            RecordType::Opt => "OPT".into(),
            RecordType::Ds => "DS".into(),
            RecordType::Rrsig => "RRSIG".into(),
            RecordType::Dnskey => "DNSKEY".into(),
            RecordType::Other(c) => format!("TYPE{c}"),
        }
    }

    pub fn from_mnemonic(s: &str) -> Option<Self> {
        let upper = s.to_ascii_uppercase();
        let t = match upper.as_str() {
            "A" => RecordType::A,
            "NS" => RecordType::Ns,
            "TXT" => RecordType::Txt,
            "AAAA" => RecordType::Aaaa,
            "OPT" => RecordType::Opt,
            "DS" => RecordType::Ds,
            "RRSIG" => RecordType::Rrsig,
            "DNSKEY" => RecordType::Dnskey,
            other => RecordType::from_code(other.strip_prefix("TYPE")?.parse().ok()?),
        };
        Some(t)
    }
}

impl fmt::Display for RecordType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.mnemonic())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Rcode {
    #[default]
    NoError,
    FormErr,
    ServFail,
    NxDomain,
    NotImp,
    Refused,
    Other(u8),
}

impl Rcode {
    pub fn code(self) -> u8 {
        match self {
            Rcode::NoError => 0,
            Rcode::FormErr => 1,
            Rcode::ServFail => 2,
            Rcode::NxDomain => 3,
            Rcode::NotImp => 4,
            Rcode::Refused => 5,
            Rcode::Other(c) => c & 0x0f,
        }
    }

    pub fn from_code(code: u8) -> Self {
        match code & 0x0f {
            0 => Rcode::NoError,
            1 => Rcode::FormErr,
            2 => Rcode::ServFail,
            3 => Rcode::NxDomain,
            4 => Rcode::NotImp,
            5 => Rcode::Refused,
            c => Rcode::Other(c),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Flags {
    pub response: bool,
    pub opcode: u8,
    pub authoritative: bool,
    pub truncated: bool,
    pub recursion_desired: bool,
    pub recursion_available: bool,
    pub authenticated_data: bool,
    pub checking_disabled: bool,
    pub rcode: Rcode,
}

impl Flags {
    fn to_u16(self) -> u16 {
        (u16::from(self.response) << 15)
            | (u16::from(self.opcode & 0x0f) << 11)
            | (u16::from(self.authoritative) << 10)
            | (u16::from(self.truncated) << 9)
            | (u16::from(self.recursion_desired) << 8)
            | (u16::from(self.recursion_available) << 7)
            | (u16::from(self.authenticated_data) << 5)
            | (u16::from(self.checking_disabled) << 4)
            | u16::from(self.rcode.code())
    }

    fn from_u16(v: u16) -> Self {
        Self {
            response: v & 0x8000 != 0,
            opcode: ((v >> 11) & 0x0f) as u8,
            authoritative: v & 0x0400 != 0,
            truncated: v & 0x0200 != 0,
            recursion_desired: v & 0x0100 != 0,
            recursion_available: v & 0x0080 != 0,
            authenticated_data: v & 0x0020 != 0,
            checking_disabled: v & 0x0010 != 0,
            rcode: Rcode::from_code((v & 0x0f) as u8),
        }
    }
}

/// EDNS(0) pseudo-record parameters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edns {
    pub udp_payload: u16,
    pub extended_rcode: u8,
    pub version: u8,
    pub dnssec_ok: bool,
    pub options: Vec<u8>,
}

impl Default for Edns {
    fn default() -> Self {
        Self {
            udp_payload: DEFAULT_EDNS_PAYLOAD,
            extended_rcode: 0,
            version: 0,
            dnssec_ok: false,
            options: Vec::new(),
        }
    }
}

impl Edns {
    /// Size of the OPT record on the wire.
    pub fn wire_len(&self) -> usize {
        11 + self.options.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Question {
    pub name: Name,
    pub qtype: RecordType,
    pub qclass: u16,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum RData {
    A(Ipv4Addr),
    Aaaa(Ipv6Addr),
    Ns(Name),
    Txt(Vec<Vec<u8>>),
    Dnskey {
        flags: u16,
        protocol: u8,
        algorithm: u8,
        public_key: Vec<u8>,
    },
    Ds {
        key_tag: u16,
        algorithm: u8,
        digest_type: u8,
        digest: Vec<u8>,
    },
    Rrsig {
        type_covered: RecordType,
        algorithm: u8,
        labels: u8,
        original_ttl: u32,
        expiration: u32,
        inception: u32,
        key_tag: u16,
        signer: Name,
        signature: Vec<u8>,
    },
    Unknown(Vec<u8>),
}

impl std::hash::Hash for RecordType {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.code().hash(state);
    }
}

impl RData {
    /// Wire encoding. Embedded names are written uncompressed; `canonical`
    /// additionally lowercases them.
    pub fn to_wire(&self, canonical: bool) -> Result<Vec<u8>, WireError> {
        let mut out = Vec::new();
        let put_name = |n: &Name, out: &mut Vec<u8>| -> Result<(), WireError> {
            if canonical {
                n.check()?;
                out.extend(n.canonical_wire());
                Ok(())
            } else {
                n.write(out)
            }
        };
        match self {
            RData::A(ip) => out.extend_from_slice(&ip.octets()),
            RData::Aaaa(ip) => out.extend_from_slice(&ip.octets()),
            RData::Ns(n) => put_name(n, &mut out)?,
            RData::Txt(strings) => {
                for s in strings {
                    if s.len() > 255 {
                        return Err(WireError::OversizeRecord("TXT string over 255 bytes".into()));
                    }
                    out.push(s.len() as u8);
                    out.extend_from_slice(s);
                }
            }
            RData::Dnskey {
                flags,
                protocol,
                algorithm,
                public_key,
            } => {
                out.extend_from_slice(&flags.to_be_bytes());
                out.push(*protocol);
                out.push(*algorithm);
                out.extend_from_slice(public_key);
            }
            RData::Ds {
                key_tag,
                algorithm,
                digest_type,
                digest,
            } => {
                out.extend_from_slice(&key_tag.to_be_bytes());
                out.push(*algorithm);
                out.push(*digest_type);
                out.extend_from_slice(digest);
            }
            RData::Rrsig {
                type_covered,
                algorithm,
                labels,
                original_ttl,
                expiration,
                inception,
                key_tag,
                signer,
                signature,
            } => {
                out.extend_from_slice(&rrsig_prefix(
                    *type_covered,
                    *algorithm,
                    *labels,
                    *original_ttl,
                    *expiration,
                    *inception,
                    *key_tag,
                ));
                put_name(signer, &mut out)?;
                out.extend_from_slice(signature);
            }
            RData::Unknown(bytes) => out.extend_from_slice(bytes),
        }
        if out.len() > u16::MAX as usize {
            return Err(WireError::OversizeRecord(format!(
                "rdata of {} bytes",
                out.len()
            )));
        }
        Ok(out)
    }
}

/// Fixed 18-byte head of RRSIG rdata.
pub(crate) fn rrsig_prefix(
    type_covered: RecordType,
    algorithm: u8,
    labels: u8,
    original_ttl: u32,
    expiration: u32,
    inception: u32,
    key_tag: u16,
) -> [u8; 18] {
    let mut b = [0u8; 18];
    b[0..2].copy_from_slice(&type_covered.code().to_be_bytes());
    b[2] = algorithm;
    b[3] = labels;
    b[4..8].copy_from_slice(&original_ttl.to_be_bytes());
    b[8..12].copy_from_slice(&expiration.to_be_bytes());
    b[12..16].copy_from_slice(&inception.to_be_bytes());
    b[16..18].copy_from_slice(&key_tag.to_be_bytes());
    b
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ResourceRecord {
    pub name: Name,
    pub rtype: RecordType,
    pub class: u16,
    pub ttl: u32,
    pub rdata: RData,
}

impl ResourceRecord {
    pub fn new(name: Name, ttl: u32, rdata: RData) -> Self {
        let rtype = match &rdata {
            RData::A(_) => RecordType::A,
            RData::Aaaa(_) => RecordType::Aaaa,
            RData::Ns(_) => RecordType::Ns,
            RData::Txt(_) => RecordType::Txt,
            RData::Dnskey { .. } => RecordType::Dnskey,
            RData::Ds { .. } => RecordType::Ds,
            RData::Rrsig { .. } => RecordType::Rrsig,
            RData::Unknown(_) => RecordType::Other(0),
        };
        Self {
            name,
            rtype,
            class: CLASS_IN,
            ttl,
            rdata,
        }
    }

    /// Encoded size of this record, uncompressed.
    pub fn wire_len(&self) -> Result<usize, WireError> {
        Ok(self.name.wire_len() + 10 + self.rdata.to_wire(false)?.len())
    }

    fn write(&self, out: &mut Vec<u8>) -> Result<(), WireError> {
        self.name.write(out)?;
        let rdata = self.rdata.to_wire(false)?;
        out.extend_from_slice(&self.rtype.code().to_be_bytes());
        out.extend_from_slice(&self.class.to_be_bytes());
        out.extend_from_slice(&self.ttl.to_be_bytes());
        out.extend_from_slice(&(rdata.len() as u16).to_be_bytes());
        out.extend_from_slice(&rdata);
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DnsMessage {
    pub id: u16,
    pub flags: Flags,
    pub questions: Vec<Question>,
    pub answers: Vec<ResourceRecord>,
    pub authority: Vec<ResourceRecord>,
    /// Additional records other than OPT.
    pub additional: Vec<ResourceRecord>,
    pub edns: Option<Edns>,
}

impl DnsMessage {
    pub fn question(&self) -> Option<&Question> {
        self.questions.first()
    }

    pub fn dnssec_ok(&self) -> bool {
        self.edns.as_ref().is_some_and(|e| e.dnssec_ok)
    }

    /// Response skeleton echoing id, question, RD and EDNS.
    pub fn response_to(query: &DnsMessage) -> DnsMessage {
        DnsMessage {
            id: query.id,
            flags: Flags {
                response: true,
                opcode: query.flags.opcode,
                recursion_desired: query.flags.recursion_desired,
                recursion_available: true,
                checking_disabled: query.flags.checking_disabled,
                ..Flags::default()
            },
            questions: query.questions.clone(),
            edns: query.edns.as_ref().map(|e| Edns {
                udp_payload: e.udp_payload,
                dnssec_ok: e.dnssec_ok,
                ..Edns::default()
            }),
            ..DnsMessage::default()
        }
    }

    pub fn all_records(&self) -> impl Iterator<Item = &ResourceRecord> {
        self.answers
            .iter()
            .chain(&self.authority)
            .chain(&self.additional)
    }
}

pub fn encode_message(m: &DnsMessage) -> Result<Vec<u8>, WireError> {
    let counts = [
        m.questions.len(),
        m.answers.len(),
        m.authority.len(),
        m.additional.len() + usize::from(m.edns.is_some()),
    ];
    if counts.iter().any(|&c| c > u16::MAX as usize) {
        return Err(WireError::OversizeRecord("section count over 65535".into()));
    }
    let mut out = Vec::with_capacity(512);
    out.extend_from_slice(&m.id.to_be_bytes());
    out.extend_from_slice(&m.flags.to_u16().to_be_bytes());
    for c in counts {
        out.extend_from_slice(&(c as u16).to_be_bytes());
    }
    for q in &m.questions {
        q.name.write(&mut out)?;
        out.extend_from_slice(&q.qtype.code().to_be_bytes());
        out.extend_from_slice(&q.qclass.to_be_bytes());
    }
    for rr in m.answers.iter().chain(&m.authority).chain(&m.additional) {
        rr.write(&mut out)?;
    }
    if let Some(edns) = &m.edns {
        if edns.options.len() > u16::MAX as usize {
            return Err(WireError::OversizeRecord("EDNS options".into()));
        }
        out.push(0);
        out.extend_from_slice(&RecordType::Opt.code().to_be_bytes());
        out.extend_from_slice(&edns.udp_payload.to_be_bytes());
        out.push(edns.extended_rcode);
        out.push(edns.version);
        let flags: u16 = if edns.dnssec_ok { 0x8000 } else { 0 };
        out.extend_from_slice(&flags.to_be_bytes());
        out.extend_from_slice(&(edns.options.len() as u16).to_be_bytes());
        out.extend_from_slice(&edns.options);
    }
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn malformed(&self, reason: &'static str) -> WireError {
        WireError::Malformed {
            offset: self.pos,
            reason,
        }
    }

    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], WireError> {
        if self.buf.len() - self.pos < n {
            return Err(self.malformed(what));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &'static str) -> Result<u8, WireError> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &'static str) -> Result<u16, WireError> {
        let b = self.take(2, what)?;
        Ok(u16::from_be_bytes([b[0], b[1]]))
    }

    fn u32(&mut self, what: &'static str) -> Result<u32, WireError> {
        let b = self.take(4, what)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    /// Reads a possibly compressed name. Pointers must point strictly
    /// backwards, which bounds the walk.
    fn name(&mut self) -> Result<Name, WireError> {
        let mut labels = Vec::new();
        let mut cursor = self.pos;
        let mut resume = None;
        let mut total = 1usize;
        let mut hops = 0usize;
        loop {
            let Some(&len) = self.buf.get(cursor) else {
                return Err(WireError::Malformed {
                    offset: cursor,
                    reason: "name runs past end of message",
                });
            };
            match len & 0xc0 {
                0x00 => {
                    if len == 0 {
                        cursor += 1;
                        break;
                    }
                    let len = len as usize;
                    let start = cursor + 1;
                    let Some(label) = self.buf.get(start..start + len) else {
                        return Err(WireError::Malformed {
                            offset: cursor,
                            reason: "label runs past end of message",
                        });
                    };
                    total += len + 1;
                    if total > super::name::MAX_NAME {
                        return Err(WireError::Malformed {
                            offset: cursor,
                            reason: "name longer than 255 bytes",
                        });
                    }
                    labels.push(label.to_vec());
                    cursor = start + len;
                }
                0xc0 => {
                    let Some(&lo) = self.buf.get(cursor + 1) else {
                        return Err(WireError::Malformed {
                            offset: cursor,
                            reason: "truncated compression pointer",
                        });
                    };
                    let target = (usize::from(len & 0x3f) << 8) | usize::from(lo);
                    hops += 1;
                    if target >= cursor || hops > MAX_POINTER_HOPS {
                        return Err(WireError::CompressionLoop { offset: cursor });
                    }
                    resume.get_or_insert(cursor + 2);
                    cursor = target;
                }
                _ => {
                    return Err(WireError::Malformed {
                        offset: cursor,
                        reason: "reserved label type",
                    })
                }
            }
        }
        self.pos = resume.unwrap_or(cursor);
        Ok(Name::from_labels(labels))
    }

    fn record(&mut self) -> Result<RawRecord, WireError> {
        let name = self.name()?;
        let rtype = RecordType::from_code(self.u16("record type")?);
        let class = self.u16("record class")?;
        let ttl = self.u32("record ttl")?;
        let rdlen = self.u16("rdata length")? as usize;
        let start = self.pos;
        if self.buf.len() - start < rdlen {
            return Err(self.malformed("rdata runs past end of message"));
        }
        let end = start + rdlen;
        Ok(RawRecord {
            name,
            rtype,
            class,
            ttl,
            start,
            end,
        })
    }
}

struct RawRecord {
    name: Name,
    rtype: RecordType,
    class: u16,
    ttl: u32,
    start: usize,
    end: usize,
}

fn decode_rdata(buf: &[u8], rtype: RecordType, start: usize, end: usize) -> Result<RData, WireError> {
    // Parse against the full message so compressed names resolve, but cap
    // every fixed-size read at the rdata boundary.
    let mut r = Reader {
        buf: &buf[..end],
        pos: start,
    };
    let rdata = match rtype {
        RecordType::A => {
            let b = r.take(4, "A rdata")?;
            RData::A(Ipv4Addr::new(b[0], b[1], b[2], b[3]))
        }
        RecordType::Aaaa => {
            let b: [u8; 16] = r.take(16, "AAAA rdata")?.try_into().expect("16 bytes");
            RData::Aaaa(Ipv6Addr::from(b))
        }
        RecordType::Ns => {
            let mut full = Reader { buf, pos: start };
            let n = full.name()?;
            r.pos = full.pos;
            RData::Ns(n)
        }
        RecordType::Txt => {
            let mut strings = Vec::new();
            while r.pos < end {
                let len = r.u8("TXT length")? as usize;
                strings.push(r.take(len, "TXT string")?.to_vec());
            }
            RData::Txt(strings)
        }
        RecordType::Dnskey => RData::Dnskey {
            flags: r.u16("DNSKEY flags")?,
            protocol: r.u8("DNSKEY protocol")?,
            algorithm: r.u8("DNSKEY algorithm")?,
            public_key: r.take(end - r.pos, "DNSKEY key")?.to_vec(),
        },
        RecordType::Ds => RData::Ds {
            key_tag: r.u16("DS key tag")?,
            algorithm: r.u8("DS algorithm")?,
            digest_type: r.u8("DS digest type")?,
            digest: r.take(end - r.pos, "DS digest")?.to_vec(),
        },
        RecordType::Rrsig => {
            let type_covered = RecordType::from_code(r.u16("RRSIG type")?);
            let algorithm = r.u8("RRSIG algorithm")?;
            let labels = r.u8("RRSIG labels")?;
            let original_ttl = r.u32("RRSIG ttl")?;
            let expiration = r.u32("RRSIG expiration")?;
            let inception = r.u32("RRSIG inception")?;
            let key_tag = r.u16("RRSIG key tag")?;
            let mut full = Reader { buf, pos: r.pos };
            let signer = full.name()?;
            if full.pos > end {
                return Err(WireError::Malformed {
                    offset: end,
                    reason: "RRSIG signer overruns rdata",
                });
            }
            r.pos = full.pos;
            RData::Rrsig {
                type_covered,
                algorithm,
                labels,
                original_ttl,
                expiration,
                inception,
                key_tag,
                signer,
                signature: r.take(end - r.pos, "RRSIG signature")?.to_vec(),
            }
        }
        _ => RData::Unknown(r.take(end - start, "rdata")?.to_vec()),
    };
    if r.pos != end {
        return Err(WireError::Malformed {
            offset: r.pos,
            reason: "rdata length mismatch",
        });
    }
    Ok(rdata)
}

pub fn decode_message(bytes: &[u8]) -> Result<DnsMessage, WireError> {
    let mut r = Reader { buf: bytes, pos: 0 };
    let id = r.u16("header")?;
    let flags = Flags::from_u16(r.u16("header")?);
    let qd = r.u16("header")?;
    let an = r.u16("header")?;
    let ns = r.u16("header")?;
    let ar = r.u16("header")?;
    let mut m = DnsMessage {
        id,
        flags,
        ..DnsMessage::default()
    };
    for _ in 0..qd {
        let name = r.name()?;
        let qtype = RecordType::from_code(r.u16("question type")?);
        let qclass = r.u16("question class")?;
        m.questions.push(Question { name, qtype, qclass });
    }
    for section in 0..3 {
        let count = [an, ns, ar][section];
        for _ in 0..count {
            let raw = r.record()?;
            if section == 2 && raw.rtype == RecordType::Opt {
                if m.edns.is_some() || !raw.name.is_root() {
                    return Err(WireError::Malformed {
                        offset: raw.start,
                        reason: "unexpected OPT record",
                    });
                }
                m.edns = Some(Edns {
                    udp_payload: raw.class,
                    extended_rcode: (raw.ttl >> 24) as u8,
                    version: (raw.ttl >> 16) as u8,
                    dnssec_ok: raw.ttl & 0x8000 != 0,
                    options: bytes[raw.start..raw.end].to_vec(),
                });
                r.pos = raw.end;
                continue;
            }
            let rdata = decode_rdata(bytes, raw.rtype, raw.start, raw.end)?;
            r.pos = raw.end;
            let rr = ResourceRecord {
                name: raw.name,
                rtype: raw.rtype,
                class: raw.class,
                ttl: raw.ttl,
                rdata,
            };
            match section {
                0 => m.answers.push(rr),
                1 => m.authority.push(rr),
                _ => m.additional.push(rr),
            }
        }
    }
    if r.pos != bytes.len() {
        return Err(r.malformed("trailing bytes after message"));
    }
    Ok(m)
}

/// Builds a recursive query with a random id. `want_dnssec` attaches an
/// EDNS OPT record with the DO bit set.
pub fn build_query(name: &str, rtype: RecordType, want_dnssec: bool) -> Result<DnsMessage, WireError> {
    build_query_with(name, rtype, want_dnssec, DEFAULT_EDNS_PAYLOAD)
}

pub fn build_query_with(
    name: &str,
    rtype: RecordType,
    want_dnssec: bool,
    udp_payload: u16,
) -> Result<DnsMessage, WireError> {
    let name = Name::parse(name)?;
    Ok(DnsMessage {
        id: rand::random(),
        flags: Flags {
            recursion_desired: true,
            ..Flags::default()
        },
        questions: vec![Question {
            name,
            qtype: rtype,
            qclass: CLASS_IN,
        }],
        edns: want_dnssec.then(|| Edns {
            udp_payload,
            dnssec_ok: true,
            ..Edns::default()
        }),
        ..DnsMessage::default()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Hand-written layout of `example.com A` with id 0x1234, RD set.
    fn golden_query(edns: bool) -> Vec<u8> {
        let mut b = vec![0x12, 0x34, 0x01, 0x00, 0, 1, 0, 0, 0, 0, 0, u8::from(edns)];
        b.extend_from_slice(b"\x07example\x03com\x00");
        b.extend_from_slice(&[0, 1, 0, 1]);
        if edns {
            // root, type 41, payload 1232, rcode/version 0, DO, rdlen 0
            b.extend_from_slice(&[0, 0, 41, 0x04, 0xd0, 0, 0, 0x80, 0, 0, 0]);
        }
        b
    }

    #[test]
    fn query_matches_golden_layout() {
        for edns in [false, true] {
            let mut q = build_query("example.com", RecordType::A, edns).unwrap();
            q.id = 0x1234;
            let wire = encode_message(&q).unwrap();
            assert_eq!(wire, golden_query(edns));
            assert_eq!(wire.len(), if edns { 40 } else { 29 });
            assert_eq!(decode_message(&wire).unwrap(), q);
        }
    }

    #[test]
    fn build_query_flags() {
        let q = build_query("example.com", RecordType::A, false).unwrap();
        assert_eq!(q.questions.len(), 1);
        assert!(!q.dnssec_ok() && q.edns.is_none());
        assert!(build_query("example.com", RecordType::A, true).unwrap().dnssec_ok());
        assert!(matches!(
            build_query("a..b", RecordType::A, false),
            Err(WireError::InvalidName(_))
        ));
    }

    #[test]
    fn long_label_is_oversize() {
        let mut q = build_query("example.com", RecordType::A, false).unwrap();
        q.answers.push(ResourceRecord::new(
            Name::from_labels(vec![vec![b'a'; 70]]),
            60,
            RData::A(Ipv4Addr::LOCALHOST),
        ));
        assert!(matches!(encode_message(&q), Err(WireError::OversizeRecord(_))));
    }

    #[test]
    fn self_pointer_is_a_loop() {
        let mut b = golden_query(false);
        b.truncate(12);
        b.extend_from_slice(&[0xc0, 12, 0, 1, 0, 1]);
        assert!(matches!(decode_message(&b), Err(WireError::CompressionLoop { offset: 12 })));
    }

    #[test]
    fn backward_pointer_is_followed() {
        let mut b = golden_query(false);
        b[7] = 1; // ancount
        b.extend_from_slice(&[0xc0, 12, 0, 1, 0, 1, 0, 0, 0, 60, 0, 4, 10, 0, 0, 1]);
        let m = decode_message(&b).unwrap();
        assert_eq!(m.answers[0].name.to_string(), "example.com.");
        assert_eq!(m.answers[0].rdata, RData::A(Ipv4Addr::new(10, 0, 0, 1)));
    }

    #[test]
    fn truncated_header_is_malformed_early() {
        let b = golden_query(false);
        for n in 0..12 {
            match decode_message(&b[..n]) {
                Err(WireError::Malformed { offset, .. }) => assert!(offset < 12),
                other => panic!("{other:?}"),
            }
        }
    }

    #[test]
    fn rrsig_round_trip() {
        let signer = Name::parse("example.com").unwrap();
        let rr = ResourceRecord::new(
            signer.clone(),
            300,
            RData::Rrsig {
                type_covered: RecordType::A,
                algorithm: 15,
                labels: 2,
                original_ttl: 300,
                expiration: 2000,
                inception: 1000,
                key_tag: 4242,
                signer,
                signature: vec![7; 64],
            },
        );
        let mut m = DnsMessage::default();
        m.answers.push(rr.clone());
        let wire = encode_message(&m).unwrap();
        assert_eq!(wire.len(), 12 + rr.wire_len().unwrap());
        assert_eq!(decode_message(&wire).unwrap(), m);
    }
}
