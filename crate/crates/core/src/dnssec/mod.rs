//! Zone signing and chain-of-trust validation over any registered signature
//! algorithm.

mod hierarchy;
mod validate;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::crypto::{AlgorithmId, CryptoError, Kind, Provider};
use crate::dns::{rrsig_prefix, Name, RData, RecordType, ResourceRecord, WireError};

pub use hierarchy::{HierarchyConfig, SignedRrset, SignedZone, ZoneHierarchy};
pub use validate::{validate_chain, ChainValidator, HopResult, ValidationOutcome, ValidationReport};

pub const DNSKEY_FLAGS_SEP: u16 = 257;
pub const DNSKEY_PROTOCOL: u8 = 3;
pub const DIGEST_SHA256: u8 = 2;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DnssecError {
    #[error(transparent)]
    Crypto(#[from] CryptoError),
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error("rrset is empty")]
    EmptyRrset,
    #[error("rrset members differ in owner, type or class")]
    RrsetMismatch,
    #[error("signature validity window is empty ({inception} >= {expiration})")]
    InvalidValidity { inception: u32, expiration: u32 },
    #[error("response lacks DNSSEC records: {0}")]
    MissingRecords(String),
    #[error("no DNSSEC algorithm number for `{0}`")]
    UnsupportedAlgorithm(String),
    #[error("record `{0}` lies outside the zone")]
    OutOfZone(String),
    #[error("unsupported DS digest type {0}")]
    UnsupportedDigest(u8),
}

/// RRSIG validity window in seconds since the epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Validity {
    pub inception: u32,
    pub expiration: u32,
}

impl Validity {
    pub fn new(inception: u32, expiration: u32) -> Result<Self, DnssecError> {
        if inception >= expiration {
            return Err(DnssecError::InvalidValidity {
                inception,
                expiration,
            });
        }
        Ok(Self {
            inception,
            expiration,
        })
    }

    /// Window starting one hour ago and lasting thirty days.
    pub fn around_now() -> Self {
        let now = unix_now();
        Self {
            inception: now.saturating_sub(3600),
            expiration: now.saturating_add(30 * 86_400),
        }
    }

    pub fn contains(&self, t: u32) -> bool {
        self.inception <= t && t <= self.expiration
    }
}

pub fn unix_now() -> u32 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs() as u32)
        .unwrap_or(0)
}

#[derive(Debug, Clone)]
pub struct ZoneSigningKey {
    pub owner: Name,
    pub algorithm: AlgorithmId,
    pub public_key: Vec<u8>,
    pub secret_key: Vec<u8>,
    pub key_tag: u16,
}

impl ZoneSigningKey {
    pub fn dnssec_number(&self) -> u8 {
        self.algorithm
            .dnssec_number()
            .expect("zone keys are only built for numbered algorithms")
    }

    pub fn dnskey_rdata(&self) -> RData {
        RData::Dnskey {
            flags: DNSKEY_FLAGS_SEP,
            protocol: DNSKEY_PROTOCOL,
            algorithm: self.dnssec_number(),
            public_key: self.public_key.clone(),
        }
    }

    pub fn dnskey_record(&self, ttl: u32) -> ResourceRecord {
        ResourceRecord::new(self.owner.clone(), ttl, self.dnskey_rdata())
    }
}

/// Key tag per the RFC 4034 appendix B checksum over DNSKEY rdata.
pub fn key_tag(dnskey_rdata_wire: &[u8]) -> u16 {
    let mut acc: u32 = 0;
    for (i, b) in dnskey_rdata_wire.iter().enumerate() {
        acc += if i & 1 == 0 {
            u32::from(*b) << 8
        } else {
            u32::from(*b)
        };
    }
    acc += (acc >> 16) & 0xffff;
    (acc & 0xffff) as u16
}

pub fn generate_zone_keys(
    provider: &Provider,
    owner: &Name,
    alg: AlgorithmId,
) -> Result<ZoneSigningKey, DnssecError> {
    alg.expect_kind(Kind::Signature)?;
    if alg.dnssec_number().is_none() {
        return Err(DnssecError::UnsupportedAlgorithm(alg.name().to_string()));
    }
    let kp = provider.sig_keygen(alg)?;
    let mut key = ZoneSigningKey {
        owner: owner.clone(),
        algorithm: alg,
        public_key: kp.public,
        secret_key: kp.secret,
        key_tag: 0,
    };
    key.key_tag = key_tag(&key.dnskey_rdata().to_wire(true)?);
    Ok(key)
}

/// Checks that `rrset` is non-empty and homogeneous; returns it sorted into
/// canonical order with the canonical rdata of each member.
fn canonical_rrset(rrset: &[ResourceRecord]) -> Result<Vec<(Vec<u8>, &ResourceRecord)>, DnssecError> {
    let first = rrset.first().ok_or(DnssecError::EmptyRrset)?;
    let owner = first.name.to_lowercase();
    let mut out = Vec::with_capacity(rrset.len());
    for rr in rrset {
        if rr.rtype != first.rtype
            || rr.class != first.class
            || rr.rtype == RecordType::Rrsig
            || rr.name.to_lowercase() != owner
        {
            return Err(DnssecError::RrsetMismatch);
        }
        out.push((rr.rdata.to_wire(true)?, rr));
    }
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out.dedup_by(|a, b| a.0 == b.0);
    Ok(out)
}

/// Bytes covered by an RRSIG: the RRSIG rdata minus the signature, then each
/// record in canonical form and order with the original TTL.
#[allow(clippy::too_many_arguments)]
pub fn signing_input(
    rrset: &[ResourceRecord],
    algorithm: u8,
    original_ttl: u32,
    validity: Validity,
    key_tag: u16,
    signer: &Name,
) -> Result<Vec<u8>, DnssecError> {
    let sorted = canonical_rrset(rrset)?;
    let first = sorted[0].1;
    let mut out = Vec::new();
    out.extend_from_slice(&rrsig_prefix(
        first.rtype,
        algorithm,
        first.name.label_count() as u8,
        original_ttl,
        validity.expiration,
        validity.inception,
        key_tag,
    ));
    out.extend(signer.canonical_wire());
    let owner = first.name.canonical_wire();
    for (rdata, rr) in sorted {
        out.extend_from_slice(&owner);
        out.extend_from_slice(&rr.rtype.code().to_be_bytes());
        out.extend_from_slice(&rr.class.to_be_bytes());
        out.extend_from_slice(&original_ttl.to_be_bytes());
        out.extend_from_slice(&(rdata.len() as u16).to_be_bytes());
        out.extend_from_slice(&rdata);
    }
    Ok(out)
}

pub fn sign_rrset(
    provider: &Provider,
    rrset: &[ResourceRecord],
    key: &ZoneSigningKey,
    validity: Validity,
) -> Result<ResourceRecord, DnssecError> {
    let validity = Validity::new(validity.inception, validity.expiration)?;
    let first = rrset.first().ok_or(DnssecError::EmptyRrset)?;
    let ttl = first.ttl;
    let input = signing_input(
        rrset,
        key.dnssec_number(),
        ttl,
        validity,
        key.key_tag,
        &key.owner,
    )?;
    let signature = provider.sign(key.algorithm, &key.secret_key, &input)?;
    Ok(ResourceRecord::new(
        first.name.clone(),
        ttl,
        RData::Rrsig {
            type_covered: first.rtype,
            algorithm: key.dnssec_number(),
            labels: first.name.label_count() as u8,
            original_ttl: ttl,
            expiration: validity.expiration,
            inception: validity.inception,
            key_tag: key.key_tag,
            signer: key.owner.clone(),
            signature,
        },
    ))
}

/// Verifies `rrsig` over `rrset` with one DNSKEY. Returns false on any
/// mismatch, including an expired or not-yet-valid signature.
pub fn verify_rrsig(
    provider: &Provider,
    rrset: &[ResourceRecord],
    rrsig: &ResourceRecord,
    dnskey: &ResourceRecord,
    now: u32,
) -> Result<bool, DnssecError> {
    let RData::Rrsig {
        type_covered,
        algorithm,
        original_ttl,
        expiration,
        inception,
        key_tag: tag,
        signer,
        signature,
        ..
    } = &rrsig.rdata
    else {
        return Ok(false);
    };
    let RData::Dnskey {
        algorithm: key_alg,
        public_key,
        ..
    } = &dnskey.rdata
    else {
        return Ok(false);
    };
    let Some(first) = rrset.first() else {
        return Err(DnssecError::EmptyRrset);
    };
    if *type_covered != first.rtype
        || key_alg != algorithm
        || !dnskey.name.eq_ignore_case(signer)
        || !rrsig.name.eq_ignore_case(&first.name)
        || !first.name.is_subdomain_of(signer)
        || key_tag(&dnskey.rdata.to_wire(true)?) != *tag
        || inception >= expiration
        || !(*inception..=*expiration).contains(&now)
    {
        return Ok(false);
    }
    let Some(alg) = AlgorithmId::from_dnssec_number(*algorithm) else {
        return Ok(false);
    };
    let validity = Validity {
        inception: *inception,
        expiration: *expiration,
    };
    let input = match signing_input(rrset, *algorithm, *original_ttl, validity, *tag, signer) {
        Ok(input) => input,
        Err(DnssecError::RrsetMismatch) => return Ok(false),
        Err(e) => return Err(e),
    };
    Ok(provider.verify(alg, public_key, &input, signature)?)
}

pub fn ds_digest(owner: &Name, dnskey_rdata: &RData) -> Result<Vec<u8>, DnssecError> {
    let mut h = Sha256::new();
    h.update(owner.canonical_wire());
    h.update(dnskey_rdata.to_wire(true)?);
    Ok(h.finalize().to_vec())
}

pub fn build_ds(key: &ZoneSigningKey, digest_type: u8, ttl: u32) -> Result<ResourceRecord, DnssecError> {
    if digest_type != DIGEST_SHA256 {
        return Err(DnssecError::UnsupportedDigest(digest_type));
    }
    Ok(ResourceRecord::new(
        key.owner.clone(),
        ttl,
        RData::Ds {
            key_tag: key.key_tag,
            algorithm: key.dnssec_number(),
            digest_type,
            digest: ds_digest(&key.owner, &key.dnskey_rdata())?,
        },
    ))
}

/// True when `ds` commits to `dnskey`.
pub fn ds_matches(ds: &ResourceRecord, dnskey: &ResourceRecord) -> bool {
    let RData::Ds {
        key_tag: tag,
        algorithm,
        digest_type,
        digest,
    } = &ds.rdata
    else {
        return false;
    };
    let RData::Dnskey {
        algorithm: key_alg, ..
    } = &dnskey.rdata
    else {
        return false;
    };
    if *digest_type != DIGEST_SHA256 || key_alg != algorithm || !ds.name.eq_ignore_case(&dnskey.name) {
        return false;
    }
    let Ok(wire) = dnskey.rdata.to_wire(true) else {
        return false;
    };
    key_tag(&wire) == *tag
        && ds_digest(&dnskey.name, &dnskey.rdata).is_ok_and(|d| &d == digest)
}

/// Trusted starting point of a validation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TrustAnchor {
    Ds(ResourceRecord),
    Dnskey(ResourceRecord),
}

impl TrustAnchor {
    pub fn zone(&self) -> &Name {
        match self {
            TrustAnchor::Ds(rr) | TrustAnchor::Dnskey(rr) => &rr.name,
        }
    }

    pub fn trusts(&self, dnskey: &ResourceRecord) -> bool {
        match self {
            TrustAnchor::Ds(ds) => ds_matches(ds, dnskey),
            TrustAnchor::Dnskey(k) => {
                k.name.eq_ignore_case(&dnskey.name) && k.rdata == dnskey.rdata
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::ProviderMode;
    use std::net::Ipv4Addr;

    fn alg(n: &str) -> AlgorithmId {
        AlgorithmId::lookup(n).unwrap()
    }

    fn name(s: &str) -> Name {
        Name::parse(s).unwrap()
    }

    fn a_rrset() -> Vec<ResourceRecord> {
        vec![
            ResourceRecord::new(name("www.example.com"), 300, RData::A(Ipv4Addr::new(192, 0, 2, 2))),
            ResourceRecord::new(name("WWW.example.com"), 300, RData::A(Ipv4Addr::new(192, 0, 2, 1))),
        ]
    }

    const WINDOW: Validity = Validity {
        inception: 1_000,
        expiration: 2_000,
    };

    #[test]
    fn key_tag_matches_rfc_example() {
        // DNSKEY rdata from the RFC 4034 section 5.4 example (key tag 60485).
        use base64::Engine;
        let key = base64::engine::general_purpose::STANDARD
            .decode(concat!(
                "AQOeiiR0GOMYkDshWoSKz9XzfwJr1AYtsmx3TGkJaNXVbfi/",
                "2pHm822aJ5iI9BMzNXxeYCmZDRD99WYwYqUSdjMmmAphXdvx",
                "egXd/M5+X7OrzKBaMbCVdFLUUh6DhweJBjEVv5f2wwjM9Xzc",
                "nOf+EPbtG9DMBmADjFDc2w/rljwvFw=="
            ))
            .unwrap();
        let rdata = RData::Dnskey {
            flags: 256,
            protocol: 3,
            algorithm: 5,
            public_key: key,
        };
        assert_eq!(key_tag(&rdata.to_wire(true).unwrap()), 60485);
    }

    #[test]
    fn generated_key_sizes() {
        let p = Provider::new(ProviderMode::Real, None);
        let owner = name("example.com");
        let k = generate_zone_keys(&p, &owner, alg("ed25519")).unwrap();
        assert!(matches!(k.dnskey_rdata(), RData::Dnskey { public_key, .. } if public_key.len() == 32));
        let k = generate_zone_keys(&p, &owner, alg("mldsa44")).unwrap();
        assert!(k.dnskey_rdata().to_wire(false).unwrap().len() >= 1312);
        assert!(matches!(
            generate_zone_keys(&p, &owner, alg("mlkem512")),
            Err(DnssecError::Crypto(CryptoError::WrongKind { .. }))
        ));
    }

    #[test]
    fn signing_input_golden() {
        // Canonical form: lowercase owner, rdata sorted, original TTL.
        let sig_input = signing_input(&a_rrset(), 15, 300, WINDOW, 7, &name("Example.com")).unwrap();
        let mut expected = vec![0, 1, 15, 3, 0, 0, 1, 44, 0, 0, 7, 208, 0, 0, 3, 232, 0, 7];
        expected.extend_from_slice(b"\x07example\x03com\x00");
        for last in [1u8, 2] {
            expected.extend_from_slice(b"\x03www\x07example\x03com\x00");
            expected.extend_from_slice(&[0, 1, 0, 1, 0, 0, 1, 44, 0, 4, 192, 0, 2, last]);
        }
        assert_eq!(sig_input, expected);
    }

    #[test]
    fn sign_and_verify_round_trip() {
        let p = Provider::simulated();
        let key = generate_zone_keys(&p, &name("example.com"), alg("falconpadded512")).unwrap();
        let rrsig = sign_rrset(&p, &a_rrset(), &key, WINDOW).unwrap();
        let dnskey = key.dnskey_record(3600);
        assert!(verify_rrsig(&p, &a_rrset(), &rrsig, &dnskey, 1_500).unwrap());
        // Order of the rrset does not matter.
        let mut rev = a_rrset();
        rev.reverse();
        assert!(verify_rrsig(&p, &rev, &rrsig, &dnskey, 1_500).unwrap());
        // Outside the window.
        assert!(!verify_rrsig(&p, &a_rrset(), &rrsig, &dnskey, 2_500).unwrap());
    }

    #[test]
    fn rrsig_size_tracks_algorithm() {
        let p = Provider::simulated();
        let owner = name("example.com");
        let sized = |n: &str| {
            let key = generate_zone_keys(&p, &owner, alg(n)).unwrap();
            sign_rrset(&p, &a_rrset(), &key, WINDOW).unwrap().wire_len().unwrap()
        };
        assert_eq!(sized("mldsa44") - sized("falconpadded512"), 2420 - 666);
    }

    #[test]
    fn sign_rejects_bad_input() {
        let p = Provider::simulated();
        let key = generate_zone_keys(&p, &name("example.com"), alg("ed25519")).unwrap();
        assert_eq!(sign_rrset(&p, &[], &key, WINDOW), Err(DnssecError::EmptyRrset));
        let mut mixed = a_rrset();
        mixed.push(ResourceRecord::new(name("www.example.com"), 300, RData::Ns(name("ns.example.com"))));
        assert_eq!(sign_rrset(&p, &mixed, &key, WINDOW), Err(DnssecError::RrsetMismatch));
        let bad = Validity {
            inception: 5,
            expiration: 5,
        };
        assert!(matches!(
            sign_rrset(&p, &a_rrset(), &key, bad),
            Err(DnssecError::InvalidValidity { .. })
        ));
    }

    #[test]
    fn ds_binds_to_dnskey() {
        let p = Provider::simulated();
        let key = generate_zone_keys(&p, &name("com"), alg("ecdsa-p256")).unwrap();
        let ds = build_ds(&key, DIGEST_SHA256, 86400).unwrap();
        let dnskey = key.dnskey_record(3600);
        assert!(ds_matches(&ds, &dnskey));
        assert_eq!(ds, build_ds(&key, DIGEST_SHA256, 86400).unwrap());
        let mut flipped = dnskey.clone();
        if let RData::Dnskey { public_key, .. } = &mut flipped.rdata {
            public_key[0] ^= 1;
        }
        assert!(!ds_matches(&ds, &flipped));
        assert!(matches!(build_ds(&key, 1, 60), Err(DnssecError::UnsupportedDigest(1))));
    }
}
