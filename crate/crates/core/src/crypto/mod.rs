//! KEM and signature registry plus the providers that implement them.

mod provider;
mod real;
mod registry;
mod sim;

use hkdf::Hkdf;
use sha2::Sha256;
use thiserror::Error;

pub use provider::{Backend, KemKeypair, Provider, ProviderMode, ProviderStats, SigKeypair};
pub use registry::{
    algorithm_params, algorithm_params_by_name, classify_profile, registry_table, AlgorithmId,
    AlgorithmInfo, AlgorithmParams, AlgorithmSuite, Classicality, DeploymentClass, Family, Kind,
    SecurityLevel, ALIASES, REGISTRY,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CryptoError {
    #[error("unknown algorithm `{0}`")]
    UnknownAlgorithm(String),
    #[error("`{algorithm}` is not a {expected:?} algorithm")]
    WrongKind { algorithm: String, expected: Kind },
    #[error("malformed {algorithm} key: expected {expected} bytes, got {actual}")]
    MalformedKey {
        algorithm: String,
        expected: usize,
        actual: usize,
    },
    #[error("malformed {algorithm} ciphertext: expected {expected} bytes, got {actual}")]
    MalformedCiphertext {
        algorithm: String,
        expected: usize,
        actual: usize,
    },
    #[error("hybrid combiner input is empty")]
    EmptySecret,
}

const HYBRID_SALT: &[u8] = b"qsdns hybrid kem v1";
const HYBRID_INFO: &[u8] = b"qsdns hybrid shared secret";

/// Width of [`hybrid_combine`] output.
pub const HYBRID_SECRET_BYTES: usize = 32;

/// Combines two shared secrets with HKDF-SHA256 over the length-prefixed,
/// ordered concatenation `len(a) || a || len(b) || b`.
pub fn hybrid_combine(secret_a: &[u8], secret_b: &[u8]) -> Result<Vec<u8>, CryptoError> {
    if secret_a.is_empty() || secret_b.is_empty() {
        return Err(CryptoError::EmptySecret);
    }
    let mut ikm = Vec::with_capacity(secret_a.len() + secret_b.len() + 8);
    ikm.extend_from_slice(&(secret_a.len() as u32).to_be_bytes());
    ikm.extend_from_slice(secret_a);
    ikm.extend_from_slice(&(secret_b.len() as u32).to_be_bytes());
    ikm.extend_from_slice(secret_b);
    let hk = Hkdf::<Sha256>::new(Some(HYBRID_SALT), &ikm);
    let mut out = vec![0u8; HYBRID_SECRET_BYTES];
    hk.expand(HYBRID_INFO, &mut out)
        .expect("32 bytes is a valid HKDF-SHA256 output length");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn combine_rejects_empty_inputs() {
        assert_eq!(hybrid_combine(b"a", b""), Err(CryptoError::EmptySecret));
        assert_eq!(hybrid_combine(b"", b"a"), Err(CryptoError::EmptySecret));
    }

    #[test]
    fn combine_matches_manual_hkdf() {
        // Independent recomputation through the hmac crate.
        use hmac::{Hmac, Mac};
        let a = [1u8; 32];
        let b = [2u8; 32];
        let mut ikm = vec![0, 0, 0, 32];
        ikm.extend_from_slice(&a);
        ikm.extend_from_slice(&[0, 0, 0, 32]);
        ikm.extend_from_slice(&b);
        let mut ext = Hmac::<Sha256>::new_from_slice(HYBRID_SALT).unwrap();
        ext.update(&ikm);
        let prk = ext.finalize().into_bytes();
        let mut exp = Hmac::<Sha256>::new_from_slice(&prk).unwrap();
        exp.update(HYBRID_INFO);
        exp.update(&[1]);
        let okm = exp.finalize().into_bytes();
        assert_eq!(hybrid_combine(&a, &b).unwrap(), okm.to_vec());
    }

    proptest! {
        #[test]
        fn combine_is_fixed_width_and_never_identity(s in proptest::collection::vec(any::<u8>(), 1..96)) {
            let out = hybrid_combine(&s, &s).unwrap();
            prop_assert_eq!(out.len(), HYBRID_SECRET_BYTES);
            prop_assert_ne!(out, s);
        }

        #[test]
        fn combine_is_order_sensitive(
            a in proptest::collection::vec(any::<u8>(), 1..64),
            b in proptest::collection::vec(any::<u8>(), 1..64),
        ) {
            prop_assume!(a != b);
            prop_assert_ne!(hybrid_combine(&a, &b).unwrap(), hybrid_combine(&b, &a).unwrap());
            prop_assert_eq!(hybrid_combine(&a, &b).unwrap(), hybrid_combine(&a, &b).unwrap());
        }
    }
}
