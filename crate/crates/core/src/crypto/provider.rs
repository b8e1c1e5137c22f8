use std::sync::atomic::{AtomicU64, Ordering};

use rand::rngs::StdRng;
use rand::{RngCore, SeedableRng};
use sha2::{Digest, Sha256};

use super::{hybrid_combine, real, sim, AlgorithmId, CryptoError, Kind};

/// Which implementation family a provider prefers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ProviderMode {
    /// Every algorithm runs on the size-faithful simulator.
    #[default]
    Simulated,
    /// Real implementations where available, simulator otherwise.
    Real,
}

impl ProviderMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ProviderMode::Simulated => "simulated",
            ProviderMode::Real => "real",
        }
    }
}

impl std::fmt::Display for ProviderMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ProviderMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "simulated" | "sim" => Ok(Self::Simulated),
            "real" => Ok(Self::Real),
            other => Err(format!("unknown provider `{other}` (expected real|simulated)")),
        }
    }
}

/// Implementation actually serving an algorithm.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    Real,
    Simulated,
}

#[derive(Debug, Clone)]
pub struct KemKeypair {
    pub public: Vec<u8>,
    pub secret: Vec<u8>,
}

#[derive(Debug, Clone)]
pub struct SigKeypair {
    pub public: Vec<u8>,
    pub secret: Vec<u8>,
}

/// Snapshot of per-operation call counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ProviderStats {
    pub kem_keygen: u64,
    pub encapsulate: u64,
    pub decapsulate: u64,
    pub sig_keygen: u64,
    pub sign: u64,
    pub verify: u64,
}

#[derive(Debug, Default)]
struct Counters {
    kem_keygen: AtomicU64,
    encapsulate: AtomicU64,
    decapsulate: AtomicU64,
    sig_keygen: AtomicU64,
    sign: AtomicU64,
    verify: AtomicU64,
}

/// Entry point for all KEM and signature operations.
///
/// Safe to share between threads. With a seed, randomness is derived from
/// `seed || call index`, so a single-threaded run is reproducible.
#[derive(Debug)]
pub struct Provider {
    mode: ProviderMode,
    seed: Option<[u8; 32]>,
    draws: AtomicU64,
    counters: Counters,
}

impl Default for Provider {
    fn default() -> Self {
        Self::new(ProviderMode::Simulated, None)
    }
}

impl Provider {
    pub fn new(mode: ProviderMode, seed: Option<u64>) -> Self {
        let seed = seed.map(|s| {
            let mut h = Sha256::new();
            h.update(b"qsdns provider seed");
            h.update(s.to_be_bytes());
            h.finalize().into()
        });
        Self {
            mode,
            seed,
            draws: AtomicU64::new(0),
            counters: Counters::default(),
        }
    }

    pub fn simulated() -> Self {
        Self::new(ProviderMode::Simulated, None)
    }

    pub fn real() -> Self {
        Self::new(ProviderMode::Real, None)
    }

    pub fn mode(&self) -> ProviderMode {
        self.mode
    }

    pub fn backend_for(&self, alg: AlgorithmId) -> Backend {
        match self.mode {
            ProviderMode::Real if real::supports(alg) => Backend::Real,
            _ => Backend::Simulated,
        }
    }

    pub fn stats(&self) -> ProviderStats {
        let c = &self.counters;
        ProviderStats {
            kem_keygen: c.kem_keygen.load(Ordering::Relaxed),
            encapsulate: c.encapsulate.load(Ordering::Relaxed),
            decapsulate: c.decapsulate.load(Ordering::Relaxed),
            sig_keygen: c.sig_keygen.load(Ordering::Relaxed),
            sign: c.sign.load(Ordering::Relaxed),
            verify: c.verify.load(Ordering::Relaxed),
        }
    }

    fn rng(&self) -> StdRng {
        match self.seed {
            Some(seed) => {
                let n = self.draws.fetch_add(1, Ordering::Relaxed);
                let mut h = Sha256::new();
                h.update(seed);
                h.update(n.to_be_bytes());
                StdRng::from_seed(h.finalize().into())
            }
            None => StdRng::from_entropy(),
        }
    }

    fn seed32(&self) -> [u8; 32] {
        let mut out = [0u8; 32];
        self.rng().fill_bytes(&mut out);
        out
    }

    pub fn kem_keygen(&self, alg: AlgorithmId) -> Result<KemKeypair, CryptoError> {
        alg.expect_kind(Kind::Kem)?;
        self.counters.kem_keygen.fetch_add(1, Ordering::Relaxed);
        let (public, secret) = self.kem_keygen_inner(alg);
        Ok(KemKeypair { public, secret })
    }

    fn kem_keygen_inner(&self, alg: AlgorithmId) -> (Vec<u8>, Vec<u8>) {
        if let Some((a, b)) = alg.components() {
            let (pa, sa) = self.kem_keygen_inner(a);
            let (pb, sb) = self.kem_keygen_inner(b);
            return ([pa, pb].concat(), [sa, sb].concat());
        }
        match self.backend_for(alg) {
            Backend::Real => real::kem_keygen(alg, &mut self.rng()),
            Backend::Simulated => sim::kem_keygen(alg, self.seed32()),
        }
    }

    pub fn kem_encapsulate(
        &self,
        alg: AlgorithmId,
        pk: &[u8],
    ) -> Result<(Vec<u8>, Vec<u8>), CryptoError> {
        alg.expect_kind(Kind::Kem)?;
        self.counters.encapsulate.fetch_add(1, Ordering::Relaxed);
        self.kem_encapsulate_inner(alg, pk)
    }

    fn kem_encapsulate_inner(
        &self,
        alg: AlgorithmId,
        pk: &[u8],
    ) -> Result<(Vec<u8>, Vec<u8>), CryptoError> {
        let expected = alg.params().public_key_bytes;
        if pk.len() != expected {
            return Err(CryptoError::MalformedKey {
                algorithm: alg.name().to_string(),
                expected,
                actual: pk.len(),
            });
        }
        if let Some((a, b)) = alg.components() {
            let (pk_a, pk_b) = pk.split_at(a.params().public_key_bytes);
            let (ct_a, ss_a) = self.kem_encapsulate_inner(a, pk_a)?;
            let (ct_b, ss_b) = self.kem_encapsulate_inner(b, pk_b)?;
            return Ok(([ct_a, ct_b].concat(), hybrid_combine(&ss_a, &ss_b)?));
        }
        match self.backend_for(alg) {
            Backend::Real => real::kem_encapsulate(alg, pk, &mut self.rng()),
            Backend::Simulated => sim::kem_encapsulate(alg, pk, self.seed32()),
        }
    }

    pub fn kem_decapsulate(
        &self,
        alg: AlgorithmId,
        sk: &[u8],
        ct: &[u8],
    ) -> Result<Vec<u8>, CryptoError> {
        alg.expect_kind(Kind::Kem)?;
        self.counters.decapsulate.fetch_add(1, Ordering::Relaxed);
        self.kem_decapsulate_inner(alg, sk, ct)
    }

    fn kem_decapsulate_inner(
        &self,
        alg: AlgorithmId,
        sk: &[u8],
        ct: &[u8],
    ) -> Result<Vec<u8>, CryptoError> {
        let p = alg.params();
        if sk.len() != p.secret_key_bytes {
            return Err(CryptoError::MalformedKey {
                algorithm: alg.name().to_string(),
                expected: p.secret_key_bytes,
                actual: sk.len(),
            });
        }
        if ct.len() != p.ciphertext_or_signature_bytes {
            return Err(CryptoError::MalformedCiphertext {
                algorithm: alg.name().to_string(),
                expected: p.ciphertext_or_signature_bytes,
                actual: ct.len(),
            });
        }
        if let Some((a, b)) = alg.components() {
            let (sk_a, sk_b) = sk.split_at(a.params().secret_key_bytes);
            let (ct_a, ct_b) = ct.split_at(a.params().ciphertext_or_signature_bytes);
            let ss_a = self.kem_decapsulate_inner(a, sk_a, ct_a)?;
            let ss_b = self.kem_decapsulate_inner(b, sk_b, ct_b)?;
            return hybrid_combine(&ss_a, &ss_b);
        }
        match self.backend_for(alg) {
            Backend::Real => real::kem_decapsulate(alg, sk, ct),
            Backend::Simulated => sim::kem_decapsulate(alg, sk, ct),
        }
    }

    pub fn sig_keygen(&self, alg: AlgorithmId) -> Result<SigKeypair, CryptoError> {
        alg.expect_kind(Kind::Signature)?;
        self.counters.sig_keygen.fetch_add(1, Ordering::Relaxed);
        let (public, secret) = match self.backend_for(alg) {
            Backend::Real => real::sig_keygen(alg, &mut self.rng()),
            Backend::Simulated => sim::sig_keygen(alg, self.seed32()),
        };
        Ok(SigKeypair { public, secret })
    }

    pub fn sign(&self, alg: AlgorithmId, sk: &[u8], msg: &[u8]) -> Result<Vec<u8>, CryptoError> {
        alg.expect_kind(Kind::Signature)?;
        self.counters.sign.fetch_add(1, Ordering::Relaxed);
        match self.backend_for(alg) {
            Backend::Real => real::sign(alg, sk, msg),
            Backend::Simulated => sim::sign(alg, sk, msg),
        }
    }

    /// Returns false for any malformed key or signature; errors only on a
    /// non-signature algorithm.
    pub fn verify(
        &self,
        alg: AlgorithmId,
        pk: &[u8],
        msg: &[u8],
        sig: &[u8],
    ) -> Result<bool, CryptoError> {
        alg.expect_kind(Kind::Signature)?;
        self.counters.verify.fetch_add(1, Ordering::Relaxed);
        Ok(match self.backend_for(alg) {
            Backend::Real => real::verify(alg, pk, msg, sig),
            Backend::Simulated => sim::verify(alg, pk, msg, sig),
        })
    }
}
