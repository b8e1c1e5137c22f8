//! Line-oriented zone text format.
//!
//! One record per line: `name ttl type rdata...`. Blank lines and text after
//! `;` are ignored. RDATA presentation:
//!
//! ```text
//! A       192.0.2.1
//! AAAA    2001:db8::1
//! NS      ns1.example.com.
//! TXT     "free text"
//! DNSKEY  <flags> <protocol> <algorithm> <base64 key>
//! DS      <key tag> <algorithm> <digest type> <hex digest>
//! RRSIG   <type> <alg> <labels> <orig ttl> <expiration> <inception> <key tag> <signer> <base64 sig>
//! ```

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;

use super::{Name, RData, RecordType, ResourceRecord, WireError};

fn err(line: usize, message: impl Into<String>) -> WireError {
    WireError::ParseError {
        line,
        message: message.into(),
    }
}

fn field<'a, T: std::str::FromStr>(
    parts: &[&'a str],
    idx: usize,
    what: &str,
    line: usize,
) -> Result<T, WireError> {
    parts
        .get(idx)
        .ok_or_else(|| err(line, format!("missing {what}")))?
        .parse()
        .map_err(|_| err(line, format!("invalid {what}")))
}

fn parse_rdata(rtype: RecordType, parts: &[&str], raw: &str, line: usize) -> Result<RData, WireError> {
    let name_at = |idx: usize| -> Result<Name, WireError> {
        let text = parts.get(idx).ok_or_else(|| err(line, "missing name"))?;
        Name::parse(text).map_err(|e| err(line, e.to_string()))
    };
    let b64 = |idx: usize, what: &str| -> Result<Vec<u8>, WireError> {
        let joined: String = parts.get(idx..).unwrap_or_default().concat();
        B64.decode(joined)
            .map_err(|_| err(line, format!("invalid base64 {what}")))
    };
    let rdata = match rtype {
        RecordType::A => RData::A(field(parts, 0, "IPv4 address", line)?),
        RecordType::Aaaa => RData::Aaaa(field(parts, 0, "IPv6 address", line)?),
        RecordType::Ns => RData::Ns(name_at(0)?),
        RecordType::Txt => {
            let text = raw.trim();
            let inner = text
                .strip_prefix('"')
                .and_then(|t| t.strip_suffix('"'))
                .ok_or_else(|| err(line, "TXT data must be quoted"))?;
            RData::Txt(inner.as_bytes().chunks(255).map(<[u8]>::to_vec).collect())
        }
        RecordType::Dnskey => RData::Dnskey {
            flags: field(parts, 0, "DNSKEY flags", line)?,
            protocol: field(parts, 1, "DNSKEY protocol", line)?,
            algorithm: field(parts, 2, "DNSKEY algorithm", line)?,
            public_key: b64(3, "DNSKEY key")?,
        },
        RecordType::Ds => {
            let digest: String = parts.get(3..).unwrap_or_default().concat();
            RData::Ds {
                key_tag: field(parts, 0, "DS key tag", line)?,
                algorithm: field(parts, 1, "DS algorithm", line)?,
                digest_type: field(parts, 2, "DS digest type", line)?,
                digest: hex::decode(digest).map_err(|_| err(line, "invalid hex DS digest"))?,
            }
        }
        RecordType::Rrsig => {
            let covered = parts.first().ok_or_else(|| err(line, "missing type covered"))?;
            RData::Rrsig {
                type_covered: RecordType::from_mnemonic(covered)
                    .ok_or_else(|| err(line, format!("unknown type {covered}")))?,
                algorithm: field(parts, 1, "RRSIG algorithm", line)?,
                labels: field(parts, 2, "RRSIG labels", line)?,
                original_ttl: field(parts, 3, "RRSIG original ttl", line)?,
                expiration: field(parts, 4, "RRSIG expiration", line)?,
                inception: field(parts, 5, "RRSIG inception", line)?,
                key_tag: field(parts, 6, "RRSIG key tag", line)?,
                signer: name_at(7)?,
                signature: b64(8, "RRSIG signature")?,
            }
        }
        other => return Err(err(line, format!("unsupported record type {other}"))),
    };
    let expected_fields = match rtype {
        RecordType::A | RecordType::Aaaa | RecordType::Ns => Some(1),
        _ => None,
    };
    if let Some(n) = expected_fields {
        if parts.len() != n {
            return Err(err(line, "unexpected trailing fields"));
        }
    }
    Ok(rdata)
}

pub fn parse_zone(text: &str) -> Result<Vec<ResourceRecord>, WireError> {
    let mut records = Vec::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line = idx + 1;
        let content = match raw_line.find(';') {
            // Semicolons inside quoted TXT data are kept.
            Some(pos) if !raw_line[..pos].contains('"') => &raw_line[..pos],
            _ => raw_line,
        };
        let content = content.trim();
        if content.is_empty() {
            continue;
        }
        let mut split = content.splitn(4, char::is_whitespace).filter(|s| !s.is_empty());
        let name = split.next().ok_or_else(|| err(line, "missing owner name"))?;
        let ttl_text = split.next().ok_or_else(|| err(line, "missing ttl"))?;
        let type_text = split.next().ok_or_else(|| err(line, "missing type"))?;
        let rest = split.next().unwrap_or("").trim();
        let name = Name::parse(name).map_err(|e| err(line, e.to_string()))?;
        let ttl: u32 = ttl_text
            .parse()
            .map_err(|_| err(line, format!("invalid ttl `{ttl_text}`")))?;
        let rtype = RecordType::from_mnemonic(type_text)
            .ok_or_else(|| err(line, format!("unknown type `{type_text}`")))?;
        let parts: Vec<&str> = rest.split_whitespace().collect();
        let rdata = parse_rdata(rtype, &parts, rest, line)?;
        records.push(ResourceRecord {
            name,
            rtype,
            class: super::CLASS_IN,
            ttl,
            rdata,
        });
    }
    Ok(records)
}

/// Presentation form of one record, readable by [`parse_zone`].
pub fn format_record(rr: &ResourceRecord) -> String {
    let rdata = match &rr.rdata {
        RData::A(ip) => ip.to_string(),
        RData::Aaaa(ip) => ip.to_string(),
        RData::Ns(n) => n.to_string(),
        RData::Txt(parts) => format!("\"{}\"", String::from_utf8_lossy(&parts.concat())),
        RData::Dnskey {
            flags,
            protocol,
            algorithm,
            public_key,
        } => format!("{flags} {protocol} {algorithm} {}", B64.encode(public_key)),
        RData::Ds {
            key_tag,
            algorithm,
            digest_type,
            digest,
        } => format!("{key_tag} {algorithm} {digest_type} {}", hex::encode(digest)),
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
        } => format!(
            "{type_covered} {algorithm} {labels} {original_ttl} {expiration} {inception} {key_tag} {signer} {}",
            B64.encode(signature)
        ),
        RData::Unknown(bytes) => hex::encode(bytes),
    };
    format!("{} {} {} {}", rr.name, rr.ttl, rr.rtype, rdata)
}

pub fn format_zone(records: &[ResourceRecord]) -> String {
    records
        .iter()
        .map(|rr| format_record(rr) + "\n")
        .collect()
}
