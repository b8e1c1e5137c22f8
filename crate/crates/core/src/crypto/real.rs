//! Bindings to real implementations where a pure-Rust crate is available.

use ml_dsa::{
    EncodedSignature, EncodedSigningKey, EncodedVerifyingKey, KeyGen, MlDsa44, MlDsa65, MlDsa87,
    MlDsaParams, Signature, SigningKey, VerifyingKey,
};
use ml_kem::kem::{Decapsulate, Encapsulate};
use ml_kem::{Ciphertext, Encoded, EncodedSizeUser, KemCore, MlKem1024, MlKem512, MlKem768};
use rand::rngs::StdRng;

use super::{AlgorithmId, CryptoError};

pub(crate) fn supports(alg: AlgorithmId) -> bool {
    matches!(
        alg.name(),
        "mlkem512"
            | "mlkem768"
            | "mlkem1024"
            | "mldsa44"
            | "mldsa65"
            | "mldsa87"
            | "x25519"
            | "ed25519"
    )
}

fn malformed_key(alg: AlgorithmId, actual: usize) -> CryptoError {
    CryptoError::MalformedKey {
        algorithm: alg.name().to_string(),
        expected: alg.params().public_key_bytes,
        actual,
    }
}

fn malformed_secret(alg: AlgorithmId, actual: usize) -> CryptoError {
    CryptoError::MalformedKey {
        algorithm: alg.name().to_string(),
        expected: alg.params().secret_key_bytes,
        actual,
    }
}

fn malformed_ct(alg: AlgorithmId, actual: usize) -> CryptoError {
    CryptoError::MalformedCiphertext {
        algorithm: alg.name().to_string(),
        expected: alg.params().ciphertext_or_signature_bytes,
        actual,
    }
}

fn mlkem_keygen<K: KemCore>(rng: &mut StdRng) -> (Vec<u8>, Vec<u8>) {
    let (dk, ek) = K::generate(rng);
    (ek.as_bytes().to_vec(), dk.as_bytes().to_vec())
}

fn mlkem_encapsulate<K: KemCore>(
    alg: AlgorithmId,
    pk: &[u8],
    rng: &mut StdRng,
) -> Result<(Vec<u8>, Vec<u8>), CryptoError> {
    let enc = Encoded::<K::EncapsulationKey>::try_from(pk).map_err(|_| malformed_key(alg, pk.len()))?;
    let ek = K::EncapsulationKey::from_bytes(&enc);
    let (ct, ss) = ek
        .encapsulate(rng)
        .map_err(|_| malformed_key(alg, pk.len()))?;
    Ok((ct.to_vec(), ss.to_vec()))
}

fn mlkem_decapsulate<K: KemCore>(
    alg: AlgorithmId,
    sk: &[u8],
    ct: &[u8],
) -> Result<Vec<u8>, CryptoError> {
    let enc =
        Encoded::<K::DecapsulationKey>::try_from(sk).map_err(|_| malformed_secret(alg, sk.len()))?;
    let dk = K::DecapsulationKey::from_bytes(&enc);
    let ct = Ciphertext::<K>::try_from(ct).map_err(|_| malformed_ct(alg, ct.len()))?;
    let ss = dk
        .decapsulate(&ct)
        .map_err(|_| malformed_ct(alg, ct.len()))?;
    Ok(ss.to_vec())
}

fn mldsa_keygen<P: MlDsaParams>(rng: &mut StdRng) -> (Vec<u8>, Vec<u8>) {
    let kp = P::key_gen(rng);
    (
        kp.verifying_key().encode().to_vec(),
        kp.signing_key().encode().to_vec(),
    )
}

fn mldsa_sign<P: MlDsaParams>(alg: AlgorithmId, sk: &[u8], msg: &[u8]) -> Result<Vec<u8>, CryptoError> {
    let enc = EncodedSigningKey::<P>::try_from(sk).map_err(|_| malformed_secret(alg, sk.len()))?;
    let key = SigningKey::<P>::decode(&enc);
    let sig = key
        .sign_deterministic(msg, &[])
        .map_err(|_| malformed_secret(alg, sk.len()))?;
    Ok(sig.encode().to_vec())
}

fn mldsa_verify<P: MlDsaParams>(pk: &[u8], msg: &[u8], sig: &[u8]) -> bool {
    let (Ok(pk), Ok(sig)) = (
        EncodedVerifyingKey::<P>::try_from(pk),
        EncodedSignature::<P>::try_from(sig),
    ) else {
        return false;
    };
    let Some(sig) = Signature::<P>::decode(&sig) else {
        return false;
    };
    VerifyingKey::<P>::decode(&pk).verify_with_context(msg, &[], &sig)
}

fn array32(bytes: &[u8]) -> Option<[u8; 32]> {
    bytes.try_into().ok()
}

pub(crate) fn kem_keygen(alg: AlgorithmId, rng: &mut StdRng) -> (Vec<u8>, Vec<u8>) {
    match alg.name() {
        "mlkem512" => mlkem_keygen::<MlKem512>(rng),
        "mlkem768" => mlkem_keygen::<MlKem768>(rng),
        "mlkem1024" => mlkem_keygen::<MlKem1024>(rng),
        "x25519" => {
            let sk = x25519_dalek::StaticSecret::random_from_rng(rng);
            let pk = x25519_dalek::PublicKey::from(&sk);
            (pk.as_bytes().to_vec(), sk.to_bytes().to_vec())
        }
        other => unreachable!("no real KEM for {other}"),
    }
}

pub(crate) fn kem_encapsulate(
    alg: AlgorithmId,
    pk: &[u8],
    rng: &mut StdRng,
) -> Result<(Vec<u8>, Vec<u8>), CryptoError> {
    match alg.name() {
        "mlkem512" => mlkem_encapsulate::<MlKem512>(alg, pk, rng),
        "mlkem768" => mlkem_encapsulate::<MlKem768>(alg, pk, rng),
        "mlkem1024" => mlkem_encapsulate::<MlKem1024>(alg, pk, rng),
        "x25519" => {
            let peer = array32(pk).ok_or_else(|| malformed_key(alg, pk.len()))?;
            let eph = x25519_dalek::StaticSecret::random_from_rng(rng);
            let ct = x25519_dalek::PublicKey::from(&eph);
            let ss = eph.diffie_hellman(&x25519_dalek::PublicKey::from(peer));
            Ok((ct.as_bytes().to_vec(), ss.as_bytes().to_vec()))
        }
        other => unreachable!("no real KEM for {other}"),
    }
}

pub(crate) fn kem_decapsulate(
    alg: AlgorithmId,
    sk: &[u8],
    ct: &[u8],
) -> Result<Vec<u8>, CryptoError> {
    match alg.name() {
        "mlkem512" => mlkem_decapsulate::<MlKem512>(alg, sk, ct),
        "mlkem768" => mlkem_decapsulate::<MlKem768>(alg, sk, ct),
        "mlkem1024" => mlkem_decapsulate::<MlKem1024>(alg, sk, ct),
        "x25519" => {
            let sk = array32(sk).ok_or_else(|| malformed_secret(alg, sk.len()))?;
            let ct = array32(ct).ok_or_else(|| malformed_ct(alg, ct.len()))?;
            let secret = x25519_dalek::StaticSecret::from(sk);
            let ss = secret.diffie_hellman(&x25519_dalek::PublicKey::from(ct));
            Ok(ss.as_bytes().to_vec())
        }
        other => unreachable!("no real KEM for {other}"),
    }
}

pub(crate) fn sig_keygen(alg: AlgorithmId, rng: &mut StdRng) -> (Vec<u8>, Vec<u8>) {
    match alg.name() {
        "mldsa44" => mldsa_keygen::<MlDsa44>(rng),
        "mldsa65" => mldsa_keygen::<MlDsa65>(rng),
        "mldsa87" => mldsa_keygen::<MlDsa87>(rng),
        "ed25519" => {
            let sk = ed25519_dalek::SigningKey::generate(rng);
            (sk.verifying_key().to_bytes().to_vec(), sk.to_bytes().to_vec())
        }
        other => unreachable!("no real signature for {other}"),
    }
}

pub(crate) fn sign(alg: AlgorithmId, sk: &[u8], msg: &[u8]) -> Result<Vec<u8>, CryptoError> {
    match alg.name() {
        "mldsa44" => mldsa_sign::<MlDsa44>(alg, sk, msg),
        "mldsa65" => mldsa_sign::<MlDsa65>(alg, sk, msg),
        "mldsa87" => mldsa_sign::<MlDsa87>(alg, sk, msg),
        "ed25519" => {
            use ed25519_dalek::Signer;
            let sk = array32(sk).ok_or_else(|| malformed_secret(alg, sk.len()))?;
            let key = ed25519_dalek::SigningKey::from_bytes(&sk);
            Ok(key.sign(msg).to_bytes().to_vec())
        }
        other => unreachable!("no real signature for {other}"),
    }
}

pub(crate) fn verify(alg: AlgorithmId, pk: &[u8], msg: &[u8], sig: &[u8]) -> bool {
    match alg.name() {
        "mldsa44" => mldsa_verify::<MlDsa44>(pk, msg, sig),
        "mldsa65" => mldsa_verify::<MlDsa65>(pk, msg, sig),
        "mldsa87" => mldsa_verify::<MlDsa87>(pk, msg, sig),
        "ed25519" => {
            let Some(pk) = array32(pk) else { return false };
            let Ok(key) = ed25519_dalek::VerifyingKey::from_bytes(&pk) else {
                return false;
            };
            let Ok(sig) = ed25519_dalek::Signature::from_slice(sig) else {
                return false;
            };
            key.verify_strict(msg, &sig).is_ok()
        }
        _ => false,
    }
}
