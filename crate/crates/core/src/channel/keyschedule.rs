//! Extract-then-expand key schedule over the transcript hash.

use std::fmt;

use hkdf::Hkdf;
use hmac::{Hmac, Mac};
use sha2::{Digest, Sha256};

pub const KEY_LEN: usize = 32;
pub const IV_LEN: usize = 12;
const HASH_LEN: usize = 32;
const LABEL_PREFIX: &[u8] = b"qsdns ";

pub(crate) fn expand_label(secret: &[u8], label: &str, context: &[u8], len: usize) -> Vec<u8> {
    let full = [LABEL_PREFIX, label.as_bytes()].concat();
    let mut info = Vec::with_capacity(4 + full.len() + context.len());
    info.extend_from_slice(&(len as u16).to_be_bytes());
    info.push(full.len() as u8);
    info.extend_from_slice(&full);
    info.push(context.len() as u8);
    info.extend_from_slice(context);
    let hk = Hkdf::<Sha256>::from_prk(secret).expect("secret is a full hash length");
    let mut out = vec![0u8; len];
    hk.expand(&info, &mut out).expect("length within HKDF bound");
    out
}

fn extract(salt: &[u8], ikm: &[u8]) -> Vec<u8> {
    Hkdf::<Sha256>::extract(Some(salt), ikm).0.to_vec()
}

fn empty_hash() -> Vec<u8> {
    Sha256::digest(b"").to_vec()
}

/// Key and IV for one traffic direction.
#[derive(Clone, PartialEq, Eq)]
pub struct TrafficKeys {
    pub key: [u8; KEY_LEN],
    pub iv: [u8; IV_LEN],
}

impl TrafficKeys {
    fn from_secret(secret: &[u8]) -> Self {
        Self {
            key: expand_label(secret, "key", &[], KEY_LEN).try_into().expect("32"),
            iv: expand_label(secret, "iv", &[], IV_LEN).try_into().expect("12"),
        }
    }
}

impl fmt::Debug for TrafficKeys {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("TrafficKeys(..)")
    }
}

/// Application traffic keys for both directions.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct SessionKeys {
    pub client_write: TrafficKeys,
    pub server_write: TrafficKeys,
}

pub(crate) struct KeySchedule {
    handshake_secret: Vec<u8>,
    client_hs: Vec<u8>,
    server_hs: Vec<u8>,
}

impl KeySchedule {
    /// `hello_hash` covers the transcript through ServerHello.
    pub fn new(shared_secret: &[u8], hello_hash: &[u8]) -> Self {
        let early = extract(&[0u8; HASH_LEN], &[0u8; HASH_LEN]);
        let derived = expand_label(&early, "derived", &empty_hash(), HASH_LEN);
        let handshake_secret = extract(&derived, shared_secret);
        let client_hs = expand_label(&handshake_secret, "c hs traffic", hello_hash, HASH_LEN);
        let server_hs = expand_label(&handshake_secret, "s hs traffic", hello_hash, HASH_LEN);
        Self { handshake_secret, client_hs, server_hs }
    }

    pub fn client_handshake_keys(&self) -> TrafficKeys {
        TrafficKeys::from_secret(&self.client_hs)
    }

    pub fn server_handshake_keys(&self) -> TrafficKeys {
        TrafficKeys::from_secret(&self.server_hs)
    }

    fn finished(base: &[u8], transcript_hash: &[u8]) -> [u8; HASH_LEN] {
        let key = expand_label(base, "finished", &[], HASH_LEN);
        let mut mac = Hmac::<Sha256>::new_from_slice(&key).expect("any key length");
        mac.update(transcript_hash);
        mac.finalize().into_bytes().into()
    }

    pub fn server_finished(&self, transcript_hash: &[u8]) -> [u8; HASH_LEN] {
        Self::finished(&self.server_hs, transcript_hash)
    }

    pub fn client_finished(&self, transcript_hash: &[u8]) -> [u8; HASH_LEN] {
        Self::finished(&self.client_hs, transcript_hash)
    }

    /// `finished_hash` covers the transcript through the server Finished.
    pub fn application(&self, finished_hash: &[u8]) -> SessionKeys {
        let derived = expand_label(&self.handshake_secret, "derived", &empty_hash(), HASH_LEN);
        let master = extract(&derived, &[0u8; HASH_LEN]);
        SessionKeys {
            client_write: TrafficKeys::from_secret(&expand_label(&master, "c ap traffic", finished_hash, HASH_LEN)),
            server_write: TrafficKeys::from_secret(&expand_label(&master, "s ap traffic", finished_hash, HASH_LEN)),
        }
    }
}

/// Constant-time comparison for Finished values.
pub(crate) fn verify_finished(expected: &[u8; HASH_LEN], got: &[u8; HASH_LEN]) -> bool {
    expected.iter().zip(got).fold(0u8, |acc, (a, b)| acc | (a ^ b)) == 0
}
