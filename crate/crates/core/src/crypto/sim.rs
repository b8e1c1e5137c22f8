//! Deterministic stand-in provider.
//!
//! Artifacts are SHA-256 counter-mode expansions sized exactly to the
//! registry. Verification and decapsulation work by recomputation, so
//! any bit flip in a key, ciphertext or signature is detected.

use sha2::{Digest, Sha256};

use super::{AlgorithmId, CryptoError};

const SEED_BYTES: usize = 32;

pub(crate) fn expand(label: &[u8], input: &[&[u8]], len: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(len + 32);
    let mut counter: u32 = 0;
    while out.len() < len {
        let mut h = Sha256::new();
        h.update((label.len() as u16).to_be_bytes());
        h.update(label);
        for part in input {
            h.update(part);
        }
        h.update(counter.to_be_bytes());
        out.extend_from_slice(&h.finalize());
        counter += 1;
    }
    out.truncate(len);
    out
}

fn key_id(label: &[u8], alg: AlgorithmId, seed: &[u8]) -> Vec<u8> {
    expand(label, &[alg.name().as_bytes(), seed], SEED_BYTES)
}

fn public_from_id(label: &[u8], id: &[u8], len: usize) -> Vec<u8> {
    let mut pk = id.to_vec();
    pk.extend(expand(label, &[id], len - id.len()));
    pk
}

fn secret_from_seed(label: &[u8], seed: &[u8], len: usize) -> Vec<u8> {
    let mut sk = seed.to_vec();
    sk.extend(expand(label, &[seed], len - seed.len()));
    sk
}

fn check_len(
    alg: AlgorithmId,
    got: usize,
    want: usize,
    as_ct: bool,
) -> Result<(), CryptoError> {
    if got == want {
        return Ok(());
    }
    let algorithm = alg.name().to_string();
    Err(if as_ct {
        CryptoError::MalformedCiphertext {
            algorithm,
            expected: want,
            actual: got,
        }
    } else {
        CryptoError::MalformedKey {
            algorithm,
            expected: want,
            actual: got,
        }
    })
}

fn malformed_key(alg: AlgorithmId, len: usize) -> CryptoError {
    CryptoError::MalformedKey {
        algorithm: alg.name().to_string(),
        expected: len,
        actual: len,
    }
}

pub(crate) fn kem_keygen(alg: AlgorithmId, seed: [u8; SEED_BYTES]) -> (Vec<u8>, Vec<u8>) {
    let p = alg.params();
    let id = key_id(b"kem-id", alg, &seed);
    let pk = public_from_id(b"kem-pk", &id, p.public_key_bytes);
    let sk = secret_from_seed(b"kem-sk", &seed, p.secret_key_bytes);
    (pk, sk)
}

pub(crate) fn kem_encapsulate(
    alg: AlgorithmId,
    pk: &[u8],
    r: [u8; SEED_BYTES],
) -> Result<(Vec<u8>, Vec<u8>), CryptoError> {
    let p = alg.params();
    check_len(alg, pk.len(), p.public_key_bytes, false)?;
    let id = &pk[..SEED_BYTES];
    if public_from_id(b"kem-pk", id, p.public_key_bytes) != pk {
        return Err(malformed_key(alg, pk.len()));
    }
    let mut ct = r.to_vec();
    ct.extend(expand(b"kem-ct", &[id, &r], p.ciphertext_or_signature_bytes - SEED_BYTES));
    let ss = expand(b"kem-ss", &[id, &r], p.shared_secret_bytes);
    Ok((ct, ss))
}

pub(crate) fn kem_decapsulate(
    alg: AlgorithmId,
    sk: &[u8],
    ct: &[u8],
) -> Result<Vec<u8>, CryptoError> {
    let p = alg.params();
    check_len(alg, sk.len(), p.secret_key_bytes, false)?;
    check_len(alg, ct.len(), p.ciphertext_or_signature_bytes, true)?;
    let seed = &sk[..SEED_BYTES];
    if secret_from_seed(b"kem-sk", seed, p.secret_key_bytes) != sk {
        return Err(malformed_key(alg, sk.len()));
    }
    let id = key_id(b"kem-id", alg, seed);
    let r = &ct[..SEED_BYTES];
    let expected_tail = expand(b"kem-ct", &[&id, r], p.ciphertext_or_signature_bytes - SEED_BYTES);
    if expected_tail[..] != ct[SEED_BYTES..] {
        // Implicit rejection: a pseudorandom secret bound to the key and ciphertext.
        return Ok(expand(b"kem-reject", &[seed, ct], p.shared_secret_bytes));
    }
    Ok(expand(b"kem-ss", &[&id, r], p.shared_secret_bytes))
}

pub(crate) fn sig_keygen(alg: AlgorithmId, seed: [u8; SEED_BYTES]) -> (Vec<u8>, Vec<u8>) {
    let p = alg.params();
    let id = key_id(b"sig-id", alg, &seed);
    let pk = public_from_id(b"sig-pk", &id, p.public_key_bytes);
    let sk = secret_from_seed(b"sig-sk", &seed, p.secret_key_bytes);
    (pk, sk)
}

fn signature_for(alg: AlgorithmId, id: &[u8], msg: &[u8]) -> Vec<u8> {
    let len = alg.params().ciphertext_or_signature_bytes;
    let tag = expand(b"sig", &[alg.name().as_bytes(), id, msg], SEED_BYTES);
    let mut sig = tag.clone();
    sig.extend(expand(b"sig-pad", &[&tag], len - SEED_BYTES));
    sig
}

pub(crate) fn sign(alg: AlgorithmId, sk: &[u8], msg: &[u8]) -> Result<Vec<u8>, CryptoError> {
    let p = alg.params();
    check_len(alg, sk.len(), p.secret_key_bytes, false)?;
    let seed = &sk[..SEED_BYTES];
    if secret_from_seed(b"sig-sk", seed, p.secret_key_bytes) != sk {
        return Err(malformed_key(alg, sk.len()));
    }
    let id = key_id(b"sig-id", alg, seed);
    Ok(signature_for(alg, &id, msg))
}

pub(crate) fn verify(alg: AlgorithmId, pk: &[u8], msg: &[u8], sig: &[u8]) -> bool {
    let p = alg.params();
    if pk.len() != p.public_key_bytes || sig.len() != p.ciphertext_or_signature_bytes {
        return false;
    }
    let id = &pk[..SEED_BYTES];
    if public_from_id(b"sig-pk", id, p.public_key_bytes) != pk {
        return false;
    }
    let expected = signature_for(alg, id, msg);
    // Accumulate differences instead of short-circuiting.
    expected
        .iter()
        .zip(sig)
        .fold(0u8, |acc, (a, b)| acc | (a ^ b))
        == 0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn id(n: &str) -> AlgorithmId {
        AlgorithmId::lookup(n).unwrap()
    }

    #[test]
    fn expand_is_prefix_stable() {
        let short = expand(b"x", &[b"in"], 10);
        let long = expand(b"x", &[b"in"], 100);
        assert_eq!(&long[..10], &short[..]);
        assert_ne!(expand(b"y", &[b"in"], 10), short);
    }

    #[test]
    fn kem_artifacts_have_registry_sizes() {
        let alg = id("hqc128");
        let (pk, sk) = kem_keygen(alg, [7; 32]);
        assert_eq!((pk.len(), sk.len()), (2249, 2305));
        let (ct, ss) = kem_encapsulate(alg, &pk, [9; 32]).unwrap();
        assert_eq!((ct.len(), ss.len()), (4433, 64));
        assert_eq!(kem_decapsulate(alg, &sk, &ct).unwrap(), ss);
    }

    #[test]
    fn tampered_public_key_is_rejected() {
        let alg = id("mlkem512");
        let (mut pk, _) = kem_keygen(alg, [1; 32]);
        pk[500] ^= 1;
        assert!(matches!(
            kem_encapsulate(alg, &pk, [0; 32]),
            Err(CryptoError::MalformedKey { .. })
        ));
    }

    #[test]
    fn signature_depends_on_key() {
        let alg = id("rsa2048");
        let (pk1, sk1) = sig_keygen(alg, [1; 32]);
        let (pk2, _) = sig_keygen(alg, [2; 32]);
        let s = sign(alg, &sk1, b"m").unwrap();
        assert_eq!(s.len(), 256);
        assert!(verify(alg, &pk1, b"m", &s));
        assert!(!verify(alg, &pk2, b"m", &s));
    }
}
