//! DNS message framings carried over the secure channel (DoT, DoH) or bare
//! UDP.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TransportError {
    #[error("message of {len} bytes exceeds {max}")]
    Oversize { len: usize, max: usize },
    #[error("frame declares {declared} bytes but only {available} are present")]
    TruncatedFrame { declared: usize, available: usize },
    #[error("malformed HTTP message: {0}")]
    MalformedHttp(String),
    #[error("unexpected content type `{0}`")]
    WrongContentType(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum TransportKind {
    #[default]
    Dot,
    Doh,
    UdpPlain,
}

impl TransportKind {
    pub fn default_port(self) -> u16 {
        match self {
            TransportKind::Dot => 853,
            TransportKind::Doh => 443,
            TransportKind::UdpPlain => 53,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TransportKind::Dot => "dot",
            TransportKind::Doh => "doh",
            TransportKind::UdpPlain => "udp",
        }
    }

    /// Whether the transport runs over the secure channel.
    pub fn is_secure(self) -> bool {
        !matches!(self, TransportKind::UdpPlain)
    }
}

impl fmt::Display for TransportKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TransportKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "dot" | "tls" => Ok(TransportKind::Dot),
            "doh" | "https" => Ok(TransportKind::Doh),
            "udp" | "udpplain" | "plain" => Ok(TransportKind::UdpPlain),
            _ => Err(format!("unknown transport `{s}` (dot|doh|udp)")),
        }
    }
}

pub const MAX_DNS_MESSAGE: usize = 65535;

pub fn frame_dot(dns: &[u8]) -> Result<Vec<u8>, TransportError> {
    if dns.len() > MAX_DNS_MESSAGE {
        return Err(TransportError::Oversize { len: dns.len(), max: MAX_DNS_MESSAGE });
    }
    let mut out = Vec::with_capacity(dns.len() + 2);
    out.extend_from_slice(&(dns.len() as u16).to_be_bytes());
    out.extend_from_slice(dns);
    Ok(out)
}

/// Strips the length prefix. Bytes past the declared length are ignored.
pub fn deframe_dot(framed: &[u8]) -> Result<&[u8], TransportError> {
    if framed.len() < 2 {
        return Err(TransportError::TruncatedFrame { declared: 2, available: framed.len() });
    }
    let declared = u16::from_be_bytes([framed[0], framed[1]]) as usize;
    framed[2..]
        .get(..declared)
        .ok_or(TransportError::TruncatedFrame { declared, available: framed.len() - 2 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Request,
    Response,
}

const CONTENT_TYPE: &str = "application/dns-message";
/// Content-Length is zero-padded to this many digits so the header block
/// has the same size for every message.
const LENGTH_DIGITS: usize = 5;

/// HTTP/1.1-shaped DoH framing with a fixed-size header block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DohFraming {
    pub host: String,
    pub path: String,
    /// Additional `name: value` headers sent on both directions.
    pub extra_headers: Vec<(String, String)>,
}

impl Default for DohFraming {
    fn default() -> Self {
        Self {
            host: "dns.example".into(),
            path: "/dns-query".into(),
            extra_headers: Vec::new(),
        }
    }
}

impl DohFraming {
    /// Pads the header block with a filler header so each direction's
    /// overhead is at least `target` bytes.
    pub fn with_target_overhead(mut self, target: usize) -> Self {
        let current = self.overhead(Direction::Request).min(self.overhead(Direction::Response));
        // "X-Pad: " plus CRLF
        let fixed = 9;
        if target > current + fixed {
            self.extra_headers.push(("X-Pad".into(), "0".repeat(target - current - fixed)));
        }
        self
    }

    fn header_block(&self, direction: Direction, body_len: usize) -> String {
        let mut h = String::with_capacity(256);
        match direction {
            Direction::Request => {
                h.push_str(&format!("POST {} HTTP/1.1\r\n", self.path));
                h.push_str(&format!("Host: {}\r\n", self.host));
                h.push_str("User-Agent: qsdns/0.1\r\n");
                h.push_str(&format!("Accept: {CONTENT_TYPE}\r\n"));
            }
            Direction::Response => {
                h.push_str("HTTP/1.1 200 OK\r\n");
                h.push_str("Server: qsdns/0.1\r\n");
                h.push_str("Cache-Control: max-age=0\r\n");
                h.push_str("X-Content-Type-Options: nosniff\r\n");
            }
        }
        h.push_str("Connection: keep-alive\r\n");
        h.push_str(&format!("Content-Type: {CONTENT_TYPE}\r\n"));
        h.push_str(&format!("Content-Length: {body_len:0LENGTH_DIGITS$}\r\n"));
        for (k, v) in &self.extra_headers {
            h.push_str(&format!("{k}: {v}\r\n"));
        }
        h.push_str("\r\n");
        h
    }

    /// Header bytes added to every message in `direction`.
    pub fn overhead(&self, direction: Direction) -> usize {
        self.header_block(direction, 0).len()
    }

    pub fn wrap(&self, dns: &[u8], direction: Direction) -> Result<Vec<u8>, TransportError> {
        if dns.len() > MAX_DNS_MESSAGE {
            return Err(TransportError::Oversize { len: dns.len(), max: MAX_DNS_MESSAGE });
        }
        let mut out = self.header_block(direction, dns.len()).into_bytes();
        out.extend_from_slice(dns);
        Ok(out)
    }
}

/// Parses a DoH message produced by [`DohFraming::wrap`] or any equivalent
/// HTTP/1.1 message, returning its direction and body.
pub fn unwrap_doh(http: &[u8]) -> Result<(Direction, &[u8]), TransportError> {
    let malformed = |m: &str| TransportError::MalformedHttp(m.to_string());
    let end = http
        .windows(4)
        .position(|w| w == b"\r\n\r\n")
        .ok_or_else(|| malformed("missing end of headers"))?;
    let head = std::str::from_utf8(&http[..end]).map_err(|_| malformed("non-UTF-8 headers"))?;
    let body = &http[end + 4..];
    let mut lines = head.split("\r\n");
    let start = lines.next().unwrap_or_default();
    let direction = if start.starts_with("POST ") && start.ends_with(" HTTP/1.1") {
        Direction::Request
    } else if let Some(status) = start.strip_prefix("HTTP/1.1 ") {
        if !status.starts_with("200") {
            return Err(TransportError::MalformedHttp(format!("status {status}")));
        }
        Direction::Response
    } else {
        return Err(TransportError::MalformedHttp(format!("bad start line `{start}`")));
    };
    let mut content_type = None;
    let mut content_length = None;
    for line in lines {
        let (k, v) = line.split_once(':').ok_or_else(|| malformed("header without colon"))?;
        let v = v.trim();
        if k.eq_ignore_ascii_case("content-type") {
            content_type = Some(v);
        } else if k.eq_ignore_ascii_case("content-length") {
            content_length = Some(v.parse::<usize>().map_err(|_| malformed("bad content-length"))?);
        }
    }
    match content_type {
        Some(ct) if ct.eq_ignore_ascii_case(CONTENT_TYPE) => {}
        Some(ct) => return Err(TransportError::WrongContentType(ct.to_string())),
        None => return Err(TransportError::WrongContentType(String::new())),
    }
    let len = content_length.ok_or_else(|| malformed("missing content-length"))?;
    if body.len() < len {
        return Err(TransportError::TruncatedFrame { declared: len, available: body.len() });
    }
    if body.len() > len {
        return Err(malformed("trailing bytes after body"));
    }
    Ok((direction, body))
}

/// Wraps a DNS message for the given secure transport.
pub fn encapsulate(
    kind: TransportKind,
    doh: &DohFraming,
    dns: &[u8],
    direction: Direction,
) -> Result<Vec<u8>, TransportError> {
    match kind {
        TransportKind::Dot => frame_dot(dns),
        TransportKind::Doh => doh.wrap(dns, direction),
        TransportKind::UdpPlain => {
            if dns.len() > MAX_DNS_MESSAGE {
                Err(TransportError::Oversize { len: dns.len(), max: MAX_DNS_MESSAGE })
            } else {
                Ok(dns.to_vec())
            }
        }
    }
}

pub fn decapsulate(kind: TransportKind, framed: &[u8]) -> Result<Vec<u8>, TransportError> {
    match kind {
        TransportKind::Dot => deframe_dot(framed).map(<[u8]>::to_vec),
        TransportKind::Doh => unwrap_doh(framed).map(|(_, b)| b.to_vec()),
        TransportKind::UdpPlain => Ok(framed.to_vec()),
    }
}

/// Framing bytes added to one message of `kind`.
pub fn framing_overhead(kind: TransportKind, doh: &DohFraming, direction: Direction) -> usize {
    match kind {
        TransportKind::Dot => 2,
        TransportKind::Doh => doh.overhead(direction),
        TransportKind::UdpPlain => 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn dot_frame_adds_two_bytes() {
        let q = vec![7u8; 29];
        let f = frame_dot(&q).unwrap();
        assert_eq!(f.len(), 31);
        assert_eq!(&f[..2], &[0, 29]);
        assert_eq!(deframe_dot(&f).unwrap(), &q[..]);
        assert_eq!(
            deframe_dot(&[0, 40, 1, 2]),
            Err(TransportError::TruncatedFrame { declared: 40, available: 2 })
        );
        assert!(matches!(frame_dot(&vec![0; 70_000]), Err(TransportError::Oversize { .. })));
    }

    #[test]
    fn doh_overhead_is_constant_and_in_range() {
        let doh = DohFraming::default();
        let req = doh.overhead(Direction::Request);
        let resp = doh.overhead(Direction::Response);
        for len in [0usize, 1, 29, 1232, 65535] {
            let body = vec![0u8; len];
            assert_eq!(doh.wrap(&body, Direction::Request).unwrap().len(), len + req);
            assert_eq!(doh.wrap(&body, Direction::Response).unwrap().len(), len + resp);
        }
        for o in [req, resp] {
            assert!((150..=450).contains(&o), "{o}");
        }
        // Pair delta against DoT, in kB.
        let delta = (req + resp - 4) as f64 / 1024.0;
        assert!((0.1..=0.5).contains(&delta), "{delta}");
    }

    #[test]
    fn doh_header_block_text() {
        let w = DohFraming::default().wrap(b"ab", Direction::Request).unwrap();
        let text = String::from_utf8(w).unwrap();
        assert!(text.starts_with("POST /dns-query HTTP/1.1\r\nHost: dns.example\r\n"));
        assert!(text.contains("Content-Length: 00002\r\n"));
        assert!(text.ends_with("\r\n\r\nab"));
    }

    #[test]
    fn target_overhead_padding() {
        let doh = DohFraming::default().with_target_overhead(400);
        assert_eq!(doh.overhead(Direction::Request).min(doh.overhead(Direction::Response)), 400);
    }

    #[test]
    fn doh_errors() {
        let ok = DohFraming::default().wrap(b"xyz", Direction::Response).unwrap();
        let text = String::from_utf8(ok.clone()).unwrap();
        let wrong = text.replace("application/dns-message", "text/html");
        assert_eq!(
            unwrap_doh(wrong.as_bytes()),
            Err(TransportError::WrongContentType("text/html".into()))
        );
        assert!(matches!(unwrap_doh(b"garbage"), Err(TransportError::MalformedHttp(_))));
        let err = text.replace("200 OK", "500 Oops");
        assert!(matches!(unwrap_doh(err.as_bytes()), Err(TransportError::MalformedHttp(_))));
        assert!(matches!(
            unwrap_doh(&ok[..ok.len() - 1]),
            Err(TransportError::TruncatedFrame { declared: 3, available: 2 })
        ));
    }

    #[test]
    fn ports() {
        assert_eq!(TransportKind::Dot.default_port(), 853);
        assert_eq!(TransportKind::Doh.default_port(), 443);
        assert_eq!(TransportKind::UdpPlain.default_port(), 53);
        assert_eq!("DoH".parse::<TransportKind>().unwrap(), TransportKind::Doh);
    }

    proptest! {
        #[test]
        fn framings_invert(body in proptest::collection::vec(any::<u8>(), 0..2000), resp in any::<bool>()) {
            let dir = if resp { Direction::Response } else { Direction::Request };
            let doh = DohFraming::default();
            for kind in [TransportKind::Dot, TransportKind::Doh, TransportKind::UdpPlain] {
                let framed = encapsulate(kind, &doh, &body, dir).unwrap();
                prop_assert_eq!(framed.len(), body.len() + framing_overhead(kind, &doh, dir));
                prop_assert_eq!(decapsulate(kind, &framed).unwrap(), body.clone());
            }
            let w = doh.wrap(&body, dir).unwrap();
            prop_assert_eq!(unwrap_doh(&w).unwrap().0, dir);
        }
    }
}
