use std::collections::BTreeMap;

use super::{
    build_ds, generate_zone_keys, sign_rrset, DnssecError, TrustAnchor, Validity, ZoneSigningKey,
    DIGEST_SHA256,
};
use crate::crypto::{AlgorithmId, Provider};
use crate::dns::{Name, RecordType, ResourceRecord};

#[derive(Debug, Clone)]
pub struct HierarchyConfig {
    /// Leaf zone apex. Every ancestor up to the root becomes a signed zone.
    pub apex: Name,
    pub algorithm: AlgorithmId,
    pub validity: Validity,
    pub dnskey_ttl: u32,
    pub ds_ttl: u32,
}

impl HierarchyConfig {
    pub fn new(apex: Name, algorithm: AlgorithmId) -> Self {
        Self {
            apex,
            algorithm,
            validity: Validity::around_now(),
            dnskey_ttl: 3600,
            ds_ttl: 86_400,
        }
    }

    /// Apex that yields a chain of `depth` zones: `example.com` for 3,
    /// `z3.example.com` for 4, and so on.
    pub fn apex_for_depth(depth: usize) -> Name {
        let mut labels: Vec<Vec<u8>> = vec![b"example".to_vec(), b"com".to_vec()];
        match depth {
            0 | 1 => labels.clear(),
            2 => {
                labels.remove(0);
            }
            _ => {
                for i in 3..depth {
                    labels.insert(0, format!("z{i}").into_bytes());
                }
            }
        }
        Name::from_labels(labels)
    }
}

/// An rrset and the signature covering it, if signed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignedRrset {
    pub records: Vec<ResourceRecord>,
    pub rrsig: Option<ResourceRecord>,
}

impl SignedRrset {
    pub fn append_to(&self, out: &mut Vec<ResourceRecord>, with_signature: bool) {
        out.extend(self.records.iter().cloned());
        if with_signature {
            out.extend(self.rrsig.iter().cloned());
        }
    }
}

#[derive(Debug, Clone)]
pub struct SignedZone {
    pub apex: Name,
    pub key: ZoneSigningKey,
    pub dnskey: SignedRrset,
    /// DS set for the child zone, held and signed here.
    pub delegation: Option<SignedRrset>,
    pub data: BTreeMap<(Name, RecordType), SignedRrset>,
}

/// A chain of signed zones from the root down to one leaf zone, each with a
/// single key, and the root trust anchor.
#[derive(Debug, Clone)]
pub struct ZoneHierarchy {
    zones: Vec<SignedZone>,
    anchor: TrustAnchor,
}

impl ZoneHierarchy {
    pub fn build(
        provider: &Provider,
        config: &HierarchyConfig,
        data: Vec<ResourceRecord>,
    ) -> Result<Self, DnssecError> {
        let mut path = vec![config.apex.clone()];
        while let Some(parent) = path.last().and_then(Name::parent) {
            path.push(parent);
        }
        path.reverse();

        let mut zones = Vec::with_capacity(path.len());
        for apex in path {
            let key = generate_zone_keys(provider, &apex, config.algorithm)?;
            let dnskey_rr = key.dnskey_record(config.dnskey_ttl);
            let rrsig = sign_rrset(provider, std::slice::from_ref(&dnskey_rr), &key, config.validity)?;
            zones.push(SignedZone {
                apex,
                key,
                dnskey: SignedRrset {
                    records: vec![dnskey_rr],
                    rrsig: Some(rrsig),
                },
                delegation: None,
                data: BTreeMap::new(),
            });
        }
        for i in 1..zones.len() {
            let ds = build_ds(&zones[i].key, DIGEST_SHA256, config.ds_ttl)?;
            let parent = &zones[i - 1];
            let rrsig = sign_rrset(provider, std::slice::from_ref(&ds), &parent.key, config.validity)?;
            zones[i - 1].delegation = Some(SignedRrset {
                records: vec![ds],
                rrsig: Some(rrsig),
            });
        }

        let leaf = zones.last_mut().expect("at least the root zone");
        let mut grouped: BTreeMap<(Name, RecordType), Vec<ResourceRecord>> = BTreeMap::new();
        for rr in data {
            if !rr.name.is_subdomain_of(&leaf.apex) {
                return Err(DnssecError::OutOfZone(rr.name.to_string()));
            }
            grouped
                .entry((rr.name.to_lowercase(), rr.rtype))
                .or_default()
                .push(rr);
        }
        for (k, records) in grouped {
            let rrsig = sign_rrset(provider, &records, &leaf.key, config.validity)?;
            leaf.data.insert(
                k,
                SignedRrset {
                    records,
                    rrsig: Some(rrsig),
                },
            );
        }

        let anchor = TrustAnchor::Ds(build_ds(&zones[0].key, DIGEST_SHA256, config.ds_ttl)?);
        Ok(Self { zones, anchor })
    }

    pub fn depth(&self) -> usize {
        self.zones.len()
    }

    pub fn zones(&self) -> &[SignedZone] {
        &self.zones
    }

    /// Mutable zones, for fault injection.
    pub fn zones_mut(&mut self) -> &mut [SignedZone] {
        &mut self.zones
    }

    pub fn leaf(&self) -> &SignedZone {
        self.zones.last().expect("non-empty")
    }

    pub fn anchor(&self) -> &TrustAnchor {
        &self.anchor
    }

    pub fn algorithm(&self) -> AlgorithmId {
        self.leaf().key.algorithm
    }

    pub fn lookup(&self, name: &Name, rtype: RecordType) -> Option<&SignedRrset> {
        self.leaf().data.get(&(name.to_lowercase(), rtype))
    }

    /// True when `name` falls inside the leaf zone.
    pub fn in_zone(&self, name: &Name) -> bool {
        name.is_subdomain_of(&self.leaf().apex)
    }

    /// DNSKEY and DS material for every zone, root first.
    pub fn chain_records(&self) -> Vec<ResourceRecord> {
        let mut out = Vec::new();
        for z in &self.zones {
            z.dnskey.append_to(&mut out, true);
            if let Some(d) = &z.delegation {
                d.append_to(&mut out, true);
            }
        }
        out
    }

    /// What server `i` (0 = root) contributes when resolving `name`: its
    /// DNSKEY set, then the referral DS set or, at the leaf, the answer.
    pub fn hop_records(&self, i: usize, name: &Name, rtype: RecordType, dnssec: bool) -> Vec<ResourceRecord> {
        let zone = &self.zones[i];
        let mut out = Vec::new();
        if dnssec {
            zone.dnskey.append_to(&mut out, true);
        }
        match &zone.delegation {
            Some(d) => d.append_to(&mut out, dnssec),
            None => {
                if let Some(set) = self.lookup(name, rtype) {
                    set.append_to(&mut out, dnssec);
                }
            }
        }
        out
    }
}
