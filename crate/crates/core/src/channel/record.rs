//! Record framing and AEAD protection.
//!
//! Header: content type (1) + 24-bit length. Protected records always carry
//! the application-data outer type; the real type is the last plaintext byte.

use std::io::{self, Read};

use chacha20poly1305::aead::{Aead, KeyInit, Payload};
use chacha20poly1305::ChaCha20Poly1305;

use super::keyschedule::TrafficKeys;
use super::ChannelError;

pub const RECORD_HEADER: usize = 4;
pub const AEAD_TAG: usize = 16;
/// Bytes a protected record adds to its plaintext.
pub const PROTECTED_OVERHEAD: usize = RECORD_HEADER + 1 + AEAD_TAG;
pub const MAX_RECORD: usize = (1 << 24) - 1;
/// Sequence numbers this far behind the expected one are recognised as
/// replays rather than forgeries.
pub const REPLAY_WINDOW: u64 = 64;
pub const AEAD_NAME: &str = "chacha20poly1305";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContentType {
    Alert = 21,
    Handshake = 22,
    ApplicationData = 23,
}

impl ContentType {
    pub fn from_u8(v: u8) -> Result<Self, ChannelError> {
        Ok(match v {
            21 => Self::Alert,
            22 => Self::Handshake,
            23 => Self::ApplicationData,
            _ => return Err(ChannelError::Decode(format!("unknown content type {v}"))),
        })
    }
}

fn header(ct: ContentType, len: usize) -> [u8; RECORD_HEADER] {
    let l = (len as u32).to_be_bytes();
    [ct as u8, l[1], l[2], l[3]]
}

pub fn encode_plain(ct: ContentType, payload: &[u8]) -> Result<Vec<u8>, ChannelError> {
    if payload.len() > MAX_RECORD {
        return Err(ChannelError::RecordOverflow(payload.len()));
    }
    let mut out = Vec::with_capacity(RECORD_HEADER + payload.len());
    out.extend_from_slice(&header(ct, payload.len()));
    out.extend_from_slice(payload);
    Ok(out)
}

/// Splits one record off the front of `buf`: (outer type, payload, rest).
pub fn split_record(buf: &[u8]) -> Result<(ContentType, &[u8], &[u8]), ChannelError> {
    if buf.len() < RECORD_HEADER {
        return Err(ChannelError::Decode("short record header".into()));
    }
    let ct = ContentType::from_u8(buf[0])?;
    let len = u32::from_be_bytes([0, buf[1], buf[2], buf[3]]) as usize;
    let body = &buf[RECORD_HEADER..];
    if body.len() < len {
        return Err(ChannelError::Decode(format!("record declares {len} bytes, {} present", body.len())));
    }
    Ok((ct, &body[..len], &body[len..]))
}

/// Reads one whole record from a stream. `None` on clean EOF before any
/// header byte.
pub fn read_record<R: Read>(r: &mut R) -> io::Result<Option<Vec<u8>>> {
    let mut hdr = [0u8; RECORD_HEADER];
    let mut got = 0;
    while got < RECORD_HEADER {
        match r.read(&mut hdr[got..]) {
            Ok(0) if got == 0 => return Ok(None),
            Ok(0) => return Err(io::ErrorKind::UnexpectedEof.into()),
            Ok(n) => got += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    let len = u32::from_be_bytes([0, hdr[1], hdr[2], hdr[3]]) as usize;
    let mut out = vec![0u8; RECORD_HEADER + len];
    out[..RECORD_HEADER].copy_from_slice(&hdr);
    r.read_exact(&mut out[RECORD_HEADER..])?;
    Ok(Some(out))
}

fn nonce(iv: &[u8; 12], seq: u64) -> [u8; 12] {
    let mut n = *iv;
    for (b, s) in n[4..].iter_mut().zip(seq.to_be_bytes()) {
        *b ^= s;
    }
    n
}

/// Sending half of a protected direction.
pub struct RecordProtector {
    cipher: ChaCha20Poly1305,
    iv: [u8; 12],
    seq: u64,
}

impl RecordProtector {
    pub fn new(keys: &TrafficKeys) -> Self {
        Self {
            cipher: ChaCha20Poly1305::new(&keys.key.into()),
            iv: keys.iv,
            seq: 0,
        }
    }

    pub fn protect(&mut self, ct: ContentType, plaintext: &[u8]) -> Result<Vec<u8>, ChannelError> {
        let inner_len = plaintext.len() + 1 + AEAD_TAG;
        if inner_len > MAX_RECORD {
            return Err(ChannelError::RecordOverflow(plaintext.len()));
        }
        let hdr = header(ContentType::ApplicationData, inner_len);
        let mut inner = Vec::with_capacity(plaintext.len() + 1);
        inner.extend_from_slice(plaintext);
        inner.push(ct as u8);
        let sealed = self
            .cipher
            .encrypt(&nonce(&self.iv, self.seq).into(), Payload { msg: &inner, aad: &hdr })
            .map_err(|_| ChannelError::AuthFailure)?;
        self.seq += 1;
        let mut out = Vec::with_capacity(RECORD_HEADER + sealed.len());
        out.extend_from_slice(&hdr);
        out.extend_from_slice(&sealed);
        Ok(out)
    }
}

/// Receiving half of a protected direction.
pub struct RecordOpener {
    cipher: ChaCha20Poly1305,
    iv: [u8; 12],
    next_seq: u64,
}

impl RecordOpener {
    pub fn new(keys: &TrafficKeys) -> Self {
        Self {
            cipher: ChaCha20Poly1305::new(&keys.key.into()),
            iv: keys.iv,
            next_seq: 0,
        }
    }

    fn open_at(&self, seq: u64, hdr: &[u8], body: &[u8]) -> Option<Vec<u8>> {
        self.cipher
            .decrypt(&nonce(&self.iv, seq).into(), Payload { msg: body, aad: hdr })
            .ok()
    }

    /// Opens one whole protected record.
    pub fn unprotect(&mut self, record: &[u8]) -> Result<(ContentType, Vec<u8>), ChannelError> {
        let (outer, body, rest) = split_record(record)?;
        if outer != ContentType::ApplicationData || !rest.is_empty() {
            return Err(ChannelError::Decode("not a single protected record".into()));
        }
        let hdr = &record[..RECORD_HEADER];
        let Some(mut inner) = self.open_at(self.next_seq, hdr, body) else {
            let start = self.next_seq.saturating_sub(REPLAY_WINDOW);
            if (start..self.next_seq).rev().any(|s| self.open_at(s, hdr, body).is_some()) {
                return Err(ChannelError::ReplayDetected);
            }
            return Err(ChannelError::AuthFailure);
        };
        self.next_seq += 1;
        let ct = inner.pop().ok_or(ChannelError::AuthFailure)?;
        Ok((ContentType::from_u8(ct)?, inner))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn keys() -> TrafficKeys {
        TrafficKeys { key: [4; 32], iv: [5; 12] }
    }

    #[test]
    fn tamper_and_replay() {
        let mut tx = RecordProtector::new(&keys());
        let mut rx = RecordOpener::new(&keys());
        let r0 = tx.protect(ContentType::ApplicationData, b"hello").unwrap();
        assert_eq!(r0.len(), 5 + PROTECTED_OVERHEAD);
        assert_eq!(rx.unprotect(&r0).unwrap(), (ContentType::ApplicationData, b"hello".to_vec()));
        assert!(matches!(rx.unprotect(&r0), Err(ChannelError::ReplayDetected)));
        let mut r1 = tx.protect(ContentType::Alert, b"\x01\x00").unwrap();
        let last = r1.len() - 1;
        r1[last] ^= 0x80;
        assert!(matches!(rx.unprotect(&r1), Err(ChannelError::AuthFailure)));
        r1[last] ^= 0x80;
        assert_eq!(rx.unprotect(&r1).unwrap().0, ContentType::Alert);
    }

    #[test]
    fn stream_reader() {
        let a = encode_plain(ContentType::Handshake, b"abc").unwrap();
        let b = encode_plain(ContentType::Alert, b"").unwrap();
        let joined = [a.clone(), b.clone()].concat();
        let mut cur = std::io::Cursor::new(joined);
        assert_eq!(read_record(&mut cur).unwrap().unwrap(), a);
        assert_eq!(read_record(&mut cur).unwrap().unwrap(), b);
        assert!(read_record(&mut cur).unwrap().is_none());
        let mut short = std::io::Cursor::new(a[..5].to_vec());
        assert!(read_record(&mut short).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn round_trip_up_to_64k(len in 0usize..65536, seed in any::<u8>(), flip in any::<usize>()) {
            let data: Vec<u8> = (0..len).map(|i| (i as u8).wrapping_mul(seed)).collect();
            let mut tx = RecordProtector::new(&keys());
            let mut rx = RecordOpener::new(&keys());
            let rec = tx.protect(ContentType::ApplicationData, &data).unwrap();
            let mut bad = rec.clone();
            let i = RECORD_HEADER + flip % (bad.len() - RECORD_HEADER);
            bad[i] ^= 1;
            prop_assert!(matches!(rx.unprotect(&bad), Err(ChannelError::AuthFailure)));
            prop_assert_eq!(rx.unprotect(&rec).unwrap().1, data);
        }
    }
}
