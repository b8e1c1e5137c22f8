use crate::crypto::AlgorithmId;
use crate::transport::TransportKind;

/// One benchmarked configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TableRow {
    /// `None` for plain DNSSEC rows over UDP.
    pub kem: Option<AlgorithmId>,
    pub ds: AlgorithmId,
    pub dnssec_alg: Option<AlgorithmId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableSpec {
    pub name: &'static str,
    pub transport: TransportKind,
    pub workers: usize,
    pub rows: Vec<TableRow>,
}

const SL1: &[(&str, &str)] = &[
    ("ffdhe2048", "rsa2048"),
    ("ffdhe2048", "ecdsa-p256"),
    ("ffdhe2048", "ed25519"),
    ("secp256r1", "rsa2048"),
    ("x25519", "rsa2048"),
    ("mlkem512", "mldsa44"),
    ("mlkem512", "falcon512"),
    ("mlkem512", "sphincssha2128f"),
    ("hqc128", "mldsa44"),
    ("hqc128", "falcon512"),
    ("ffdhe2048", "mldsa44"),
    ("ffdhe2048", "falcon512"),
    ("ffdhe2048", "sphincssha2128f"),
    ("secp256r1", "mldsa44"),
    ("x25519", "falcon512"),
    ("mlkem512", "rsa2048"),
    ("mlkem512", "ecdsa-p256"),
    ("mlkem512", "ed25519"),
    ("hqc128", "rsa2048"),
    ("hqc128", "ecdsa-p256"),
];

const SL3: &[(&str, &str)] = &[
    ("ffdhe3072", "rsa3072"),
    ("ffdhe3072", "ecdsa-p384"),
    ("secp384r1", "rsa3072"),
    ("secp384r1", "ecdsa-p384"),
    ("mlkem768", "mldsa65"),
    ("mlkem768", "sphincssha2192f"),
    ("hqc192", "mldsa65"),
    ("hqc192", "sphincssha2192f"),
    ("ffdhe3072", "mldsa65"),
    ("ffdhe3072", "sphincssha2192f"),
    ("secp384r1", "mldsa65"),
    ("secp384r1", "sphincssha2192f"),
    ("mlkem768", "rsa3072"),
    ("mlkem768", "ecdsa-p384"),
    ("hqc192", "rsa3072"),
    ("hqc192", "ecdsa-p384"),
];

const SL5: &[(&str, &str)] = &[
    ("ffdhe4096", "rsa4096"),
    ("ffdhe4096", "ecdsa-p521"),
    ("ffdhe4096", "ed448"),
    ("secp521r1", "rsa4096"),
    ("x448", "rsa4096"),
    ("mlkem1024", "mldsa87"),
    ("mlkem1024", "falcon1024"),
    ("hqc256", "mldsa87"),
    ("hqc256", "falcon1024"),
    ("ffdhe4096", "mldsa87"),
    ("ffdhe4096", "falcon1024"),
    ("secp521r1", "mldsa87"),
    ("secp521r1", "falcon1024"),
    ("x448", "mldsa87"),
    ("x448", "falcon1024"),
    ("mlkem1024", "rsa4096"),
    ("mlkem1024", "ecdsa-p521"),
    ("mlkem1024", "ed448"),
    ("hqc256", "rsa4096"),
    ("hqc256", "ecdsa-p521"),
];

const DNSSEC_ONLY: &[&str] = &["rsa2048", "ecdsa-p256", "ed25519", "mldsa44", "falconpadded512", "sphincssha2128f"];

/// (dnssec, kem, ds)
const DNSSEC_SL1: &[(&str, &str, &str)] = &[
    ("rsa2048", "ffdhe2048", "rsa2048"),
    ("ecdsa-p256", "ffdhe2048", "ecdsa-p256"),
    ("ed25519", "ffdhe2048", "ed25519"),
    ("mldsa44", "mlkem512", "mldsa44"),
    ("falcon512", "mlkem512", "falcon512"),
    ("sphincssha2128f", "mlkem512", "sphincssha2128f"),
    ("rsa2048", "mlkem512", "mldsa44"),
    ("ecdsa-p256", "mlkem512", "falcon512"),
    ("ed25519", "mlkem512", "sphincssha2128f"),
    ("mldsa44", "ffdhe2048", "rsa2048"),
    ("falcon512", "ffdhe2048", "ecdsa-p256"),
    ("sphincssha2128f", "ffdhe2048", "ed25519"),
];

fn alg(name: &str) -> AlgorithmId {
    AlgorithmId::lookup(name).expect("table algorithms are registered")
}

fn pairs(list: &[(&str, &str)]) -> Vec<TableRow> {
    list.iter().map(|(k, s)| TableRow { kem: Some(alg(k)), ds: alg(s), dnssec_alg: None }).collect()
}

const NAMES: &[&str] = &[
    "sl1-dot",
    "sl1-doh",
    "sl3-dot",
    "sl3-doh",
    "sl5-dot",
    "sl5-doh",
    "dnssec",
    "sl1-dnssec-dot",
    "sl1-dnssec-doh",
    "sl1-dot-w100",
    "sl1-doh-w100",
    "sl1-dot-w1000",
    "sl1-dot-w10000",
];

pub fn table_names() -> &'static [&'static str] {
    NAMES
}

/// Configuration grid for a named results table.
pub fn table(name: &str) -> Option<TableSpec> {
    use TransportKind::{Doh, Dot, UdpPlain};
    let spec = |transport, workers, rows| TableSpec { name: NAMES.iter().find(|n| **n == name).copied().unwrap_or("custom"), transport, workers, rows };
    Some(match name {
        "sl1-dot" => spec(Dot, 1, pairs(SL1)),
        "sl1-doh" => spec(Doh, 1, pairs(SL1)),
        "sl3-dot" => spec(Dot, 1, pairs(SL3)),
        "sl3-doh" => spec(Doh, 1, pairs(SL3)),
        "sl5-dot" => spec(Dot, 1, pairs(SL5)),
        "sl5-doh" => spec(Doh, 1, pairs(SL5)),
        "dnssec" => spec(
            UdpPlain,
            1,
            DNSSEC_ONLY.iter().map(|a| TableRow { kem: None, ds: alg(a), dnssec_alg: Some(alg(a)) }).collect(),
        ),
        "sl1-dnssec-dot" | "sl1-dnssec-doh" => spec(
            if name.ends_with("doh") { Doh } else { Dot },
            1,
            DNSSEC_SL1
                .iter()
                .map(|(d, k, s)| TableRow { kem: Some(alg(k)), ds: alg(s), dnssec_alg: Some(alg(d)) })
                .collect(),
        ),
        "sl1-dot-w100" => spec(Dot, 100, pairs(SL1)),
        "sl1-doh-w100" => spec(Doh, 100, pairs(SL1)),
        "sl1-dot-w1000" => spec(Dot, 1000, pairs(SL1)),
        "sl1-dot-w10000" => spec(Dot, 10_000, pairs(SL1)),
        _ => return None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::{AlgorithmSuite, SecurityLevel};

    #[test]
    fn every_table_resolves() {
        for name in table_names() {
            let t = table(name).unwrap();
            assert_eq!(t.name, *name);
            assert!(!t.rows.is_empty());
            for r in &t.rows {
                if let Some(kem) = r.kem {
                    AlgorithmSuite::new(kem, r.ds).unwrap();
                }
            }
        }
        assert!(table("sl7-dot").is_none());
    }

    #[test]
    fn level_tables_stay_on_their_level() {
        for (name, level) in [("sl1-dot", SecurityLevel::L1), ("sl3-dot", SecurityLevel::L3), ("sl5-dot", SecurityLevel::L5)] {
            for r in table(name).unwrap().rows {
                assert_eq!(r.kem.unwrap().level(), level, "{name}");
                assert_eq!(r.ds.level(), level, "{name}");
            }
        }
    }
}
