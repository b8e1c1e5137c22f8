//! Static algorithm registry.
//!
//! Every KEM and signature scheme the stack can negotiate is declared once in
//! [`REGISTRY`] together with its artifact sizes. Sizes follow the encodings
//! the providers emit: raw `x || y` points for ECDSA, RFC 3110 layout for RSA
//! public keys, FIPS 203/204 encodings for ML-KEM/ML-DSA and the liboqs
//! encodings for HQC, Falcon and SPHINCS+.

use std::fmt;
use std::hash::{Hash, Hasher};

use super::CryptoError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Kem,
    Signature,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Lattice,
    Hash,
    Code,
    FiniteField,
    EllipticCurve,
    Rsa,
}

/// NIST security category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize)]
pub enum SecurityLevel {
    L1 = 1,
    L3 = 3,
    L5 = 5,
}

impl SecurityLevel {
    pub fn as_u8(self) -> u8 {
        self as u8
    }

    pub fn from_u8(level: u8) -> Option<Self> {
        match level {
            1 => Some(Self::L1),
            3 => Some(Self::L3),
            5 => Some(Self::L5),
            _ => None,
        }
    }
}

/// Whether an algorithm resists a quantum adversary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classicality {
    Classical,
    PostQuantum,
    /// Classical and post-quantum components combined in one primitive.
    Hybrid,
}

impl Classicality {
    /// True when at least one component is post-quantum.
    pub fn quantum_resistant(self) -> bool {
        !matches!(self, Classicality::Classical)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
pub enum DeploymentClass {
    LegacyOnly,
    PqcOnly,
    HybridKemLegacySig,
    HybridLegacyKemPqcSig,
    HybridDual,
}

impl DeploymentClass {
    /// Table grouping label, e.g. `PQC(KEM) + Legacy(DS)`.
    pub fn label(self) -> &'static str {
        match self {
            DeploymentClass::LegacyOnly => "Legacy(KEM) + Legacy(DS)",
            DeploymentClass::PqcOnly => "PQC(KEM) + PQC(DS)",
            DeploymentClass::HybridKemLegacySig => "PQC(KEM) + Legacy(DS)",
            DeploymentClass::HybridLegacyKemPqcSig => "Legacy(KEM) + PQC(DS)",
            DeploymentClass::HybridDual => "Hybrid(KEM) + Any(DS)",
        }
    }

    /// True when the key exchange offers no post-quantum protection.
    pub fn classical_key_exchange(self) -> bool {
        matches!(
            self,
            DeploymentClass::LegacyOnly | DeploymentClass::HybridLegacyKemPqcSig
        )
    }
}

impl fmt::Display for DeploymentClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DeploymentClass::LegacyOnly => "legacy-only",
            DeploymentClass::PqcOnly => "pqc-only",
            DeploymentClass::HybridKemLegacySig => "hybrid-pqkem-legacysig",
            DeploymentClass::HybridLegacyKemPqcSig => "hybrid-legacykem-pqsig",
            DeploymentClass::HybridDual => "hybrid-dual",
        };
        f.write_str(s)
    }
}

/// Artifact sizes in bytes.
///
/// For signatures `ciphertext_or_signature_bytes` is the maximum length;
/// only schemes flagged `variable_length` may emit less.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct AlgorithmParams {
    pub public_key_bytes: usize,
    pub secret_key_bytes: usize,
    pub ciphertext_or_signature_bytes: usize,
    /// Zero for signature schemes.
    pub shared_secret_bytes: usize,
    pub variable_length: bool,
}

#[derive(Debug)]
pub struct AlgorithmInfo {
    pub name: &'static str,
    pub kind: Kind,
    pub family: Family,
    pub level: SecurityLevel,
    pub classicality: Classicality,
    pub params: AlgorithmParams,
    /// Identifier carried in handshake messages.
    pub codepoint: u16,
    /// DNSKEY/RRSIG algorithm number, signatures only.
    pub dnssec_number: Option<u8>,
    /// Classical and post-quantum component names of a composite KEM.
    pub components: Option<(&'static str, &'static str)>,
}

const fn kem(pk: usize, sk: usize, ct: usize, ss: usize) -> AlgorithmParams {
    AlgorithmParams {
        public_key_bytes: pk,
        secret_key_bytes: sk,
        ciphertext_or_signature_bytes: ct,
        shared_secret_bytes: ss,
        variable_length: false,
    }
}

const fn sig(pk: usize, sk: usize, sig: usize) -> AlgorithmParams {
    AlgorithmParams {
        public_key_bytes: pk,
        secret_key_bytes: sk,
        ciphertext_or_signature_bytes: sig,
        shared_secret_bytes: 0,
        variable_length: false,
    }
}

const fn var_sig(pk: usize, sk: usize, max_sig: usize) -> AlgorithmParams {
    AlgorithmParams {
        public_key_bytes: pk,
        secret_key_bytes: sk,
        ciphertext_or_signature_bytes: max_sig,
        shared_secret_bytes: 0,
        variable_length: true,
    }
}

macro_rules! kem_entry {
    ($name:literal, $family:ident, $level:ident, $class:ident, $cp:literal, $params:expr) => {
        AlgorithmInfo {
            name: $name,
            kind: Kind::Kem,
            family: Family::$family,
            level: SecurityLevel::$level,
            classicality: Classicality::$class,
            params: $params,
            codepoint: $cp,
            dnssec_number: None,
            components: None,
        }
    };
}

macro_rules! hybrid_entry {
    ($name:literal, $level:ident, $cp:literal, $classical:literal, $pq:literal, $params:expr) => {
        AlgorithmInfo {
            name: $name,
            kind: Kind::Kem,
            family: Family::Lattice,
            level: SecurityLevel::$level,
            classicality: Classicality::Hybrid,
            params: $params,
            codepoint: $cp,
            dnssec_number: None,
            components: Some(($classical, $pq)),
        }
    };
}

macro_rules! sig_entry {
    ($name:literal, $family:ident, $level:ident, $class:ident, $cp:literal, $dnssec:literal, $params:expr) => {
        AlgorithmInfo {
            name: $name,
            kind: Kind::Signature,
            family: Family::$family,
            level: SecurityLevel::$level,
            classicality: Classicality::$class,
            params: $params,
            codepoint: $cp,
            dnssec_number: Some($dnssec),
            components: None,
        }
    };
}

pub static REGISTRY: &[AlgorithmInfo] = &[
    // Classical key exchange, modelled as KEMs (ciphertext = peer share).
    kem_entry!("ffdhe2048", FiniteField, L1, Classical, 0x0100, kem(256, 256, 256, 256)),
    kem_entry!("ffdhe3072", FiniteField, L3, Classical, 0x0101, kem(384, 384, 384, 384)),
    kem_entry!("ffdhe4096", FiniteField, L5, Classical, 0x0102, kem(512, 512, 512, 512)),
    kem_entry!("secp256r1", EllipticCurve, L1, Classical, 0x0110, kem(65, 32, 65, 32)),
    kem_entry!("secp384r1", EllipticCurve, L3, Classical, 0x0111, kem(97, 48, 97, 48)),
    kem_entry!("secp521r1", EllipticCurve, L5, Classical, 0x0112, kem(133, 66, 133, 66)),
    kem_entry!("x25519", EllipticCurve, L1, Classical, 0x0120, kem(32, 32, 32, 32)),
    kem_entry!("x448", EllipticCurve, L5, Classical, 0x0121, kem(56, 56, 56, 56)),
    // Post-quantum KEMs.
    kem_entry!("mlkem512", Lattice, L1, PostQuantum, 0x0200, kem(800, 1632, 768, 32)),
    kem_entry!("mlkem768", Lattice, L3, PostQuantum, 0x0201, kem(1184, 2400, 1088, 32)),
    kem_entry!("mlkem1024", Lattice, L5, PostQuantum, 0x0202, kem(1568, 3168, 1568, 32)),
    kem_entry!("hqc128", Code, L1, PostQuantum, 0x0210, kem(2249, 2305, 4433, 64)),
    kem_entry!("hqc192", Code, L3, PostQuantum, 0x0211, kem(4522, 4586, 8978, 64)),
    kem_entry!("hqc256", Code, L5, PostQuantum, 0x0212, kem(7245, 7317, 14421, 64)),
    // Composite classical + post-quantum KEMs (concatenated shares).
    hybrid_entry!("x25519_mlkem512", L1, 0x0300, "x25519", "mlkem512", kem(832, 1664, 800, 32)),
    hybrid_entry!("secp256r1_mlkem512", L1, 0x0301, "secp256r1", "mlkem512", kem(865, 1664, 833, 32)),
    hybrid_entry!("x25519_mlkem768", L3, 0x0302, "x25519", "mlkem768", kem(1216, 2432, 1120, 32)),
    hybrid_entry!("secp384r1_mlkem768", L3, 0x0303, "secp384r1", "mlkem768", kem(1281, 2448, 1185, 32)),
    hybrid_entry!("secp521r1_mlkem1024", L5, 0x0304, "secp521r1", "mlkem1024", kem(1701, 3234, 1701, 32)),
    // Classical signatures.
    sig_entry!("rsa2048", Rsa, L1, Classical, 0x0800, 8, sig(260, 1192, 256)),
    sig_entry!("rsa3072", Rsa, L3, Classical, 0x0801, 230, sig(388, 1766, 384)),
    sig_entry!("rsa4096", Rsa, L5, Classical, 0x0802, 231, sig(516, 2350, 512)),
    sig_entry!("ecdsa-p256", EllipticCurve, L1, Classical, 0x0810, 13, sig(64, 32, 64)),
    sig_entry!("ecdsa-p384", EllipticCurve, L3, Classical, 0x0811, 14, sig(96, 48, 96)),
    sig_entry!("ecdsa-p521", EllipticCurve, L5, Classical, 0x0812, 232, sig(132, 66, 132)),
    sig_entry!("ed25519", EllipticCurve, L1, Classical, 0x0820, 15, sig(32, 32, 64)),
    sig_entry!("ed448", EllipticCurve, L5, Classical, 0x0821, 16, sig(57, 57, 114)),
    // Post-quantum signatures.
    sig_entry!("mldsa44", Lattice, L1, PostQuantum, 0x0900, 240, sig(1312, 2560, 2420)),
    sig_entry!("mldsa65", Lattice, L3, PostQuantum, 0x0901, 241, sig(1952, 4032, 3309)),
    sig_entry!("mldsa87", Lattice, L5, PostQuantum, 0x0902, 242, sig(2592, 4896, 4627)),
    sig_entry!("falcon512", Lattice, L1, PostQuantum, 0x0910, 243, var_sig(897, 1281, 666)),
    sig_entry!("falcon1024", Lattice, L5, PostQuantum, 0x0911, 244, var_sig(1793, 2305, 1280)),
    sig_entry!("falconpadded512", Lattice, L1, PostQuantum, 0x0912, 245, sig(897, 1281, 666)),
    sig_entry!("falconpadded1024", Lattice, L5, PostQuantum, 0x0913, 246, sig(1793, 2305, 1280)),
    sig_entry!("sphincssha2128f", Hash, L1, PostQuantum, 0x0920, 247, sig(32, 64, 17088)),
    sig_entry!("sphincssha2192f", Hash, L3, PostQuantum, 0x0921, 248, sig(48, 96, 35664)),
];

/// Alternative spellings used by DNSSEC tooling and benchmark tables.
pub static ALIASES: &[(&str, &str)] = &[
    ("rsa2048sha256", "rsa2048"),
    ("ecdsap256sha256", "ecdsa-p256"),
    ("ecdsap256", "ecdsa-p256"),
    ("ecdsap384sha384", "ecdsa-p384"),
    ("ecdsap384", "ecdsa-p384"),
    ("falconp512", "falconpadded512"),
    ("falconp1024", "falconpadded1024"),
    ("sphincssha2128fsimple", "sphincssha2128f"),
    ("sphincssha2192fsimple", "sphincssha2192f"),
    ("p256", "secp256r1"),
    ("p384", "secp384r1"),
    ("p521", "secp521r1"),
];

/// Handle to a registered algorithm. Cheap to copy; equality is by name.
#[derive(Clone, Copy)]
pub struct AlgorithmId(&'static AlgorithmInfo);

impl AlgorithmId {
    /// Resolves a canonical name or alias (case-insensitive).
    pub fn lookup(name: &str) -> Result<Self, CryptoError> {
        let lowered = name.trim().to_ascii_lowercase();
        let canonical = ALIASES
            .iter()
            .find(|(alias, _)| *alias == lowered)
            .map(|(_, target)| *target)
            .unwrap_or(lowered.as_str());
        REGISTRY
            .iter()
            .find(|info| info.name == canonical)
            .map(AlgorithmId)
            .ok_or_else(|| CryptoError::UnknownAlgorithm(name.to_string()))
    }

    pub fn from_codepoint(codepoint: u16) -> Option<Self> {
        REGISTRY
            .iter()
            .find(|info| info.codepoint == codepoint)
            .map(AlgorithmId)
    }

    pub fn from_dnssec_number(number: u8) -> Option<Self> {
        REGISTRY
            .iter()
            .find(|info| info.dnssec_number == Some(number))
            .map(AlgorithmId)
    }

    /// Looks up `name` and checks that it is of the requested kind.
    pub fn lookup_kind(name: &str, kind: Kind) -> Result<Self, CryptoError> {
        let id = Self::lookup(name)?;
        id.expect_kind(kind)?;
        Ok(id)
    }

    pub fn all() -> impl Iterator<Item = AlgorithmId> {
        REGISTRY.iter().map(AlgorithmId)
    }

    pub fn all_of(kind: Kind) -> impl Iterator<Item = AlgorithmId> {
        Self::all().filter(move |id| id.kind() == kind)
    }

    pub fn info(self) -> &'static AlgorithmInfo {
        self.0
    }

    pub fn name(self) -> &'static str {
        self.0.name
    }

    pub fn kind(self) -> Kind {
        self.0.kind
    }

    pub fn family(self) -> Family {
        self.0.family
    }

    pub fn level(self) -> SecurityLevel {
        self.0.level
    }

    pub fn classicality(self) -> Classicality {
        self.0.classicality
    }

    pub fn params(self) -> AlgorithmParams {
        self.0.params
    }

    pub fn codepoint(self) -> u16 {
        self.0.codepoint
    }

    pub fn dnssec_number(self) -> Option<u8> {
        self.0.dnssec_number
    }

    /// Component algorithms of a composite KEM.
    pub fn components(self) -> Option<(AlgorithmId, AlgorithmId)> {
        self.0.components.map(|(classical, pq)| {
            (
                AlgorithmId::lookup(classical).expect("registered component"),
                AlgorithmId::lookup(pq).expect("registered component"),
            )
        })
    }

    pub fn expect_kind(self, kind: Kind) -> Result<(), CryptoError> {
        if self.kind() == kind {
            Ok(())
        } else {
            Err(CryptoError::WrongKind {
                algorithm: self.name().to_string(),
                expected: kind,
            })
        }
    }
}

impl PartialEq for AlgorithmId {
    fn eq(&self, other: &Self) -> bool {
        self.0.name == other.0.name
    }
}

impl Eq for AlgorithmId {}

impl Hash for AlgorithmId {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.0.name.hash(state);
    }
}

impl PartialOrd for AlgorithmId {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for AlgorithmId {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.name.cmp(other.0.name)
    }
}

impl fmt::Debug for AlgorithmId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "AlgorithmId({})", self.0.name)
    }
}

impl fmt::Display for AlgorithmId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.0.name)
    }
}

impl std::str::FromStr for AlgorithmId {
    type Err = CryptoError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AlgorithmId::lookup(s)
    }
}

impl serde::Serialize for AlgorithmId {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name())
    }
}

/// Returns the pinned size record for `alg`.
pub fn algorithm_params(alg: AlgorithmId) -> AlgorithmParams {
    alg.params()
}

/// Resolves `name` and returns its size record.
pub fn algorithm_params_by_name(name: &str) -> Result<AlgorithmParams, CryptoError> {
    AlgorithmId::lookup(name).map(AlgorithmId::params)
}

/// Deployment class of a (KEM, signature) pair.
pub fn classify_profile(kem: AlgorithmId, sig: AlgorithmId) -> DeploymentClass {
    match (kem.classicality(), sig.classicality()) {
        (Classicality::Hybrid, _) | (_, Classicality::Hybrid) => DeploymentClass::HybridDual,
        (Classicality::Classical, Classicality::Classical) => DeploymentClass::LegacyOnly,
        (Classicality::PostQuantum, Classicality::PostQuantum) => DeploymentClass::PqcOnly,
        (Classicality::PostQuantum, Classicality::Classical) => {
            DeploymentClass::HybridKemLegacySig
        }
        (Classicality::Classical, Classicality::PostQuantum) => {
            DeploymentClass::HybridLegacyKemPqcSig
        }
    }
}

/// The `(k, s)` pair a session or benchmark runs under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AlgorithmSuite {
    pub kem: AlgorithmId,
    pub sig: AlgorithmId,
    pub dnssec_sig: Option<AlgorithmId>,
    pub deployment_class: DeploymentClass,
}

impl AlgorithmSuite {
    pub fn new(kem: AlgorithmId, sig: AlgorithmId) -> Result<Self, CryptoError> {
        kem.expect_kind(Kind::Kem)?;
        sig.expect_kind(Kind::Signature)?;
        Ok(Self {
            kem,
            sig,
            dnssec_sig: None,
            deployment_class: classify_profile(kem, sig),
        })
    }

    pub fn from_names(kem: &str, sig: &str) -> Result<Self, CryptoError> {
        Self::new(AlgorithmId::lookup(kem)?, AlgorithmId::lookup(sig)?)
    }

    pub fn with_dnssec(mut self, dnssec_sig: AlgorithmId) -> Result<Self, CryptoError> {
        dnssec_sig.expect_kind(Kind::Signature)?;
        self.dnssec_sig = Some(dnssec_sig);
        Ok(self)
    }

    /// Highest security level among the members.
    pub fn level(&self) -> SecurityLevel {
        self.kem.level().max(self.sig.level())
    }
}

impl fmt::Display for AlgorithmSuite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}+{}", self.kem, self.sig)?;
        if let Some(d) = self.dnssec_sig {
            write!(f, " (dnssec {d})")?;
        }
        Ok(())
    }
}

/// Human-readable registry dump: one row per algorithm.
pub fn registry_table() -> String {
    use std::fmt::Write;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<20} {:<9} {:<14} {:>5} {:>7} {:>7} {:>8} {:>6} {:<12}",
        "name", "kind", "family", "level", "pk", "sk", "ct/sig", "ss", "class"
    );
    for id in AlgorithmId::all() {
        let p = id.params();
        let kind = match id.kind() {
            Kind::Kem => "kem",
            Kind::Signature => "signature",
        };
        let family = match id.family() {
            Family::Lattice => "lattice",
            Family::Hash => "hash",
            Family::Code => "code",
            Family::FiniteField => "finite-field",
            Family::EllipticCurve => "elliptic-curve",
            Family::Rsa => "rsa",
        };
        let class = match id.classicality() {
            Classicality::Classical => "classical",
            Classicality::PostQuantum => "post-quantum",
            Classicality::Hybrid => "hybrid",
        };
        let sig_col = if p.variable_length {
            format!("<={}", p.ciphertext_or_signature_bytes)
        } else {
            p.ciphertext_or_signature_bytes.to_string()
        };
        let _ = writeln!(
            out,
            "{:<20} {:<9} {:<14} {:>5} {:>7} {:>7} {:>8} {:>6} {:<12}",
            id.name(),
            kind,
            family,
            id.level().as_u8(),
            p.public_key_bytes,
            p.secret_key_bytes,
            sig_col,
            p.shared_secret_bytes,
            class
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn names_codepoints_and_dnssec_numbers_are_unique() {
        let mut names = HashSet::new();
        let mut cps = HashSet::new();
        let mut nums = HashSet::new();
        for info in REGISTRY {
            assert!(names.insert(info.name), "duplicate name {}", info.name);
            assert!(cps.insert(info.codepoint), "duplicate codepoint {}", info.name);
            if let Some(n) = info.dnssec_number {
                assert!(nums.insert(n), "duplicate dnssec number {}", info.name);
            }
            assert_eq!(info.name, info.name.to_ascii_lowercase());
        }
        for (alias, target) in ALIASES {
            assert!(!names.contains(alias), "alias shadows {alias}");
            assert!(names.contains(target), "alias target {target} missing");
        }
    }

    #[test]
    fn all_counts_positive_and_kem_has_secret() {
        for id in AlgorithmId::all() {
            let p = id.params();
            assert!(p.public_key_bytes > 0 && p.secret_key_bytes > 0);
            assert!(p.ciphertext_or_signature_bytes > 0);
            match id.kind() {
                Kind::Kem => assert!(p.shared_secret_bytes > 0, "{id}"),
                Kind::Signature => {
                    assert_eq!(p.shared_secret_bytes, 0);
                    assert!(id.dnssec_number().is_some());
                }
            }
        }
    }

    #[test]
    fn composite_sizes_are_sums_of_components() {
        for id in AlgorithmId::all_of(Kind::Kem) {
            let Some((classical, pq)) = id.components() else {
                continue;
            };
            let (p, c, q) = (id.params(), classical.params(), pq.params());
            assert_eq!(p.public_key_bytes, c.public_key_bytes + q.public_key_bytes);
            assert_eq!(p.secret_key_bytes, c.secret_key_bytes + q.secret_key_bytes);
            assert_eq!(
                p.ciphertext_or_signature_bytes,
                c.ciphertext_or_signature_bytes + q.ciphertext_or_signature_bytes
            );
            assert_eq!(p.shared_secret_bytes, 32);
        }
    }

    #[test]
    fn table_algorithms_are_registered() {
        let names = [
            "ffdhe2048", "ffdhe3072", "ffdhe4096", "secp256r1", "secp384r1", "secp521r1",
            "x25519", "x448", "mlkem512", "mlkem768", "mlkem1024", "hqc128", "hqc192",
            "hqc256", "rsa2048", "rsa3072", "rsa4096", "ecdsa-p256", "ecdsa-p384",
            "ecdsa-p521", "ed25519", "ed448", "mldsa44", "mldsa65", "mldsa87", "falcon512",
            "falcon1024", "sphincssha2128f", "sphincssha2192f", "rsa2048sha256",
            "ecdsap256sha256", "falconpadded512", "sphincssha2128fsimple", "falconp512",
            "ecdsap256",
        ];
        for n in names {
            AlgorithmId::lookup(n).unwrap_or_else(|_| panic!("{n} missing"));
        }
    }

    #[test]
    fn params_examples() {
        let falcon = algorithm_params_by_name("falconpadded512").unwrap();
        assert_eq!(falcon.ciphertext_or_signature_bytes, 666);
        assert!(!falcon.variable_length);
        let l1 = algorithm_params_by_name("mldsa44").unwrap();
        let l5 = algorithm_params_by_name("mldsa87").unwrap();
        assert!(l5.ciphertext_or_signature_bytes > l1.ciphertext_or_signature_bytes);
        assert!(matches!(
            algorithm_params_by_name("kyber9000"),
            Err(CryptoError::UnknownAlgorithm(_))
        ));
        // Stable across calls.
        assert_eq!(algorithm_params_by_name("mldsa44").unwrap(), l1);
    }

    #[test]
    fn falcon_variants_stay_distinct() {
        let a = AlgorithmId::lookup("falcon512").unwrap();
        let b = AlgorithmId::lookup("falconpadded512").unwrap();
        assert_ne!(a, b);
        assert!(a.params().variable_length);
        assert!(b.params().ciphertext_or_signature_bytes <= a.params().ciphertext_or_signature_bytes);
    }

    #[test]
    fn classify_profile_examples() {
        let id = |n| AlgorithmId::lookup(n).unwrap();
        assert_eq!(classify_profile(id("ffdhe2048"), id("rsa2048")), DeploymentClass::LegacyOnly);
        assert_eq!(
            classify_profile(id("mlkem512"), id("ed25519")),
            DeploymentClass::HybridKemLegacySig
        );
        assert_eq!(classify_profile(id("mlkem512"), id("mldsa44")), DeploymentClass::PqcOnly);
        assert_eq!(
            classify_profile(id("x25519"), id("falcon512")),
            DeploymentClass::HybridLegacyKemPqcSig
        );
        assert_eq!(
            classify_profile(id("x25519_mlkem512"), id("ed25519")),
            DeploymentClass::HybridDual
        );
    }

    #[test]
    fn classify_profile_is_consistent_with_classicality_flags() {
        for k in AlgorithmId::all_of(Kind::Kem) {
            for s in AlgorithmId::all_of(Kind::Signature) {
                let class = classify_profile(k, s);
                let kc = k.classicality();
                let sc = s.classicality();
                assert_eq!(
                    class == DeploymentClass::LegacyOnly,
                    kc == Classicality::Classical && sc == Classicality::Classical
                );
                assert_eq!(
                    class == DeploymentClass::PqcOnly,
                    kc == Classicality::PostQuantum && sc == Classicality::PostQuantum
                );
                assert_eq!(class.classical_key_exchange(), !kc.quantum_resistant());
            }
        }
    }

    #[test]
    fn suite_rejects_wrong_kinds() {
        assert!(matches!(
            AlgorithmSuite::from_names("falcon512", "mldsa44"),
            Err(CryptoError::WrongKind { .. })
        ));
        assert!(matches!(
            AlgorithmSuite::from_names("mlkem512", "mlkem768"),
            Err(CryptoError::WrongKind { .. })
        ));
        let s = AlgorithmSuite::from_names("MLKEM512", "falcon512").unwrap();
        assert_eq!(s.deployment_class, DeploymentClass::PqcOnly);
        assert_eq!(s.to_string(), "mlkem512+falcon512");
    }

    #[test]
    fn registry_table_lists_every_algorithm() {
        let table = registry_table();
        assert_eq!(table.lines().count(), REGISTRY.len() + 1);
        assert!(table.contains("<=666"));
    }
}
