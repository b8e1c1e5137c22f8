use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use super::ResolverError;
use crate::crypto::{AlgorithmId, Provider};
use crate::dns::{parse_zone, Name, RecordType, ResourceRecord};
use crate::dnssec::{HierarchyConfig, SignedRrset, ZoneHierarchy};

/// Result of a store lookup.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lookup<'a> {
    Found(&'a SignedRrset),
    /// The name exists with other types.
    NoData,
    NxDomain,
    OutOfZone,
}

/// Records of one zone indexed by (name, type), optionally signed along
/// with a chain of ancestor zones up to a root trust anchor.
#[derive(Debug, Clone)]
pub struct ZoneStore {
    apex: Name,
    rrsets: BTreeMap<(Name, RecordType), SignedRrset>,
    names: BTreeSet<Name>,
    hierarchy: Option<ZoneHierarchy>,
}

/// Longest common suffix of all owner names.
fn common_apex(records: &[ResourceRecord]) -> Option<Name> {
    let mut iter = records.iter().map(|r| r.name.to_lowercase());
    let first = iter.next()?;
    let mut labels: Vec<Vec<u8>> = first.labels().to_vec();
    for name in iter {
        let other = name.labels();
        let common = labels.iter().rev().zip(other.iter().rev()).take_while(|(a, b)| a == b).count();
        labels = labels[labels.len() - common..].to_vec();
    }
    Some(Name::from_labels(labels))
}

impl ZoneStore {
    pub fn from_records(
        records: Vec<ResourceRecord>,
        signer: Option<(&Provider, AlgorithmId)>,
    ) -> Result<Self, ResolverError> {
        let apex = common_apex(&records).ok_or(ResolverError::EmptyZone)?;
        let names = records.iter().map(|r| r.name.to_lowercase()).collect();
        let (rrsets, hierarchy) = match signer {
            Some((provider, alg)) => {
                let h = ZoneHierarchy::build(provider, &HierarchyConfig::new(apex.clone(), alg), records)?;
                (h.leaf().data.clone(), Some(h))
            }
            None => {
                let mut sets: BTreeMap<(Name, RecordType), SignedRrset> = BTreeMap::new();
                for rr in records {
                    sets.entry((rr.name.to_lowercase(), rr.rtype))
                        .or_insert_with(|| SignedRrset { records: Vec::new(), rrsig: None })
                        .records
                        .push(rr);
                }
                (sets, None)
            }
        };
        Ok(Self { apex, rrsets, names, hierarchy })
    }

    pub fn apex(&self) -> &Name {
        &self.apex
    }

    pub fn rrset_count(&self) -> usize {
        self.rrsets.len()
    }

    pub fn rrsets(&self) -> impl Iterator<Item = &SignedRrset> {
        self.rrsets.values()
    }

    pub fn is_signed(&self) -> bool {
        self.hierarchy.is_some()
    }

    pub fn hierarchy(&self) -> Option<&ZoneHierarchy> {
        self.hierarchy.as_ref()
    }

    /// Mutable chain, for fault injection in tests.
    pub fn hierarchy_mut(&mut self) -> Option<&mut ZoneHierarchy> {
        self.hierarchy.as_mut()
    }

    /// Zone apexes from the root down to this zone.
    pub fn zone_path(&self) -> Vec<Name> {
        let mut path = vec![self.apex.clone()];
        while let Some(p) = path.last().and_then(Name::parent) {
            path.push(p);
        }
        path.reverse();
        path
    }

    pub fn lookup(&self, name: &Name, rtype: RecordType) -> Lookup<'_> {
        if !name.is_subdomain_of(&self.apex) {
            return Lookup::OutOfZone;
        }
        let key = name.to_lowercase();
        let set = match &self.hierarchy {
            Some(h) => h.lookup(&key, rtype),
            None => self.rrsets.get(&(key.clone(), rtype)),
        };
        match set {
            Some(s) => Lookup::Found(s),
            None if self.names.contains(&key) => Lookup::NoData,
            None => Lookup::NxDomain,
        }
    }
}

pub fn load_zone_text(text: &str, signer: Option<(&Provider, AlgorithmId)>) -> Result<ZoneStore, ResolverError> {
    ZoneStore::from_records(parse_zone(text)?, signer)
}

pub fn load_zone(path: &Path, signer: Option<(&Provider, AlgorithmId)>) -> Result<ZoneStore, ResolverError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ResolverError::Io(format!("{}: {e}", path.display())))?;
    load_zone_text(&text, signer)
}

/// Zone used by benchmarks and tests when none is configured.
pub const DEFAULT_ZONE: &str = "\
example.com. 3600 A 93.184.216.34
example.com. 3600 AAAA 2606:2800:220:1:248:1893:25c8:1946
www.example.com. 3600 A 93.184.216.34
example.com. 3600 TXT \"v=spf1 -all\"
";

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dns::WireError;

    #[test]
    fn three_records_three_rrsets() {
        let z = load_zone_text(
            "a.example. 60 A 192.0.2.1\nb.example. 60 A 192.0.2.2\na.example. 60 TXT \"x\"\n",
            None,
        )
        .unwrap();
        assert_eq!(z.rrset_count(), 3);
        assert_eq!(z.apex().to_string(), "example.");
        let a = Name::parse("a.example").unwrap();
        assert!(matches!(z.lookup(&a, RecordType::A), Lookup::Found(_)));
        assert_eq!(z.lookup(&a, RecordType::Aaaa), Lookup::NoData);
        assert_eq!(z.lookup(&Name::parse("c.example").unwrap(), RecordType::A), Lookup::NxDomain);
        assert_eq!(z.lookup(&Name::parse("a.test").unwrap(), RecordType::A), Lookup::OutOfZone);
    }

    #[test]
    fn signing_attaches_rrsigs() {
        let p = Provider::simulated();
        let alg = AlgorithmId::lookup("mldsa44").unwrap();
        let z = load_zone_text(DEFAULT_ZONE, Some((&p, alg))).unwrap();
        assert_eq!(z.rrset_count(), 4);
        assert!(z.rrsets().all(|s| s.rrsig.is_some()));
        assert_eq!(z.zone_path().len(), 3);
        assert_eq!(z.hierarchy().unwrap().depth(), 3);
    }

    #[test]
    fn parse_error_carries_line() {
        let text = "a.example. 60 A 192.0.2.1\n".repeat(6) + "a.example. 60 A not-an-ip\n";
        match load_zone_text(&text, None) {
            Err(ResolverError::Zone(WireError::ParseError { line, .. })) => assert_eq!(line, 7),
            other => panic!("{other:?}"),
        }
        assert!(matches!(load_zone_text("; nothing\n", None), Err(ResolverError::EmptyZone)));
    }
}
