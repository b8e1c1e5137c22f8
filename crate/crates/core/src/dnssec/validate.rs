use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use super::{verify_rrsig, DnssecError, TrustAnchor};
use crate::crypto::Provider;
use crate::dns::{DnsMessage, Name, RData, Rcode, RecordType, ResourceRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValidationOutcome {
    Secure,
    Bogus,
    Insecure,
}

#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub outcome: ValidationOutcome,
    /// Wall time spent validating.
    pub elapsed: Duration,
    /// Per-zone validation time, root first.
    pub hops: Vec<Duration>,
    pub reason: Option<String>,
}

impl ValidationReport {
    fn insecure(started: Instant, reason: &str) -> Self {
        Self {
            outcome: ValidationOutcome::Insecure,
            elapsed: started.elapsed(),
            hops: Vec::new(),
            reason: Some(reason.to_string()),
        }
    }
}

/// Result of one hop.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HopResult {
    /// A signed DS set for the named child zone was accepted.
    Referral(Name),
    /// The final answer rrsets verified.
    Answer,
    Bogus(String),
}

fn covered_type(rrsig: &ResourceRecord) -> Option<RecordType> {
    match &rrsig.rdata {
        RData::Rrsig { type_covered, .. } => Some(*type_covered),
        _ => None,
    }
}

fn signer(rrsig: &ResourceRecord) -> Option<&Name> {
    match &rrsig.rdata {
        RData::Rrsig { signer, .. } => Some(signer),
        _ => None,
    }
}

type RrsetKey = (Name, RecordType);

/// Groups records into rrsets and their covering signatures.
fn group(records: &[&ResourceRecord]) -> (BTreeMap<RrsetKey, Vec<ResourceRecord>>, Vec<ResourceRecord>) {
    let mut sets: BTreeMap<RrsetKey, Vec<ResourceRecord>> = BTreeMap::new();
    let mut sigs = Vec::new();
    for rr in records {
        if rr.rtype == RecordType::Rrsig {
            sigs.push((*rr).clone());
        } else {
            sets.entry((rr.name.to_lowercase(), rr.rtype))
                .or_default()
                .push((*rr).clone());
        }
    }
    (sets, sigs)
}

/// Incremental chain-of-trust walker, one zone per call to [`hop`].
///
/// [`hop`]: ChainValidator::hop
pub struct ChainValidator<'a> {
    provider: &'a Provider,
    anchor: &'a TrustAnchor,
    now: u32,
    zone: Name,
    trusted_ds: Option<Vec<ResourceRecord>>,
    pub hop_times: Vec<Duration>,
}

impl<'a> ChainValidator<'a> {
    pub fn new(provider: &'a Provider, anchor: &'a TrustAnchor, now: u32) -> Self {
        Self {
            provider,
            anchor,
            now,
            zone: anchor.zone().clone(),
            trusted_ds: None,
            hop_times: Vec::new(),
        }
    }

    /// Zone whose DNSKEY set the next hop must present.
    pub fn zone(&self) -> &Name {
        &self.zone
    }

    /// Validates one zone's contribution: its DNSKEY set and signature, then
    /// every other rrset in `records`. A signed DS set moves the walk to the
    /// child zone.
    pub fn hop(&mut self, records: &[&ResourceRecord]) -> Result<HopResult, DnssecError> {
        let started = Instant::now();
        let result = self.hop_inner(records);
        self.hop_times.push(started.elapsed());
        result
    }

    fn find_sig<'s>(
        &self,
        sigs: &'s [ResourceRecord],
        owner: &Name,
        rtype: RecordType,
    ) -> Vec<&'s ResourceRecord> {
        sigs.iter()
            .filter(|s| {
                s.name.eq_ignore_case(owner)
                    && covered_type(s) == Some(rtype)
                    && signer(s).is_some_and(|n| n.eq_ignore_case(&self.zone))
            })
            .collect()
    }

    fn verified_by_any(
        &self,
        rrset: &[ResourceRecord],
        sigs: &[&ResourceRecord],
        keys: &[ResourceRecord],
    ) -> Result<bool, DnssecError> {
        for sig in sigs {
            for key in keys {
                if verify_rrsig(self.provider, rrset, sig, key, self.now)? {
                    return Ok(true);
                }
            }
        }
        Ok(false)
    }

    fn hop_inner(&mut self, records: &[&ResourceRecord]) -> Result<HopResult, DnssecError> {
        let (mut sets, sigs) = group(records);
        let zone = self.zone.to_lowercase();
        let Some(keys) = sets.remove(&(zone.clone(), RecordType::Dnskey)) else {
            return Ok(HopResult::Bogus(format!("no DNSKEY set for {zone}")));
        };
        let key_sigs = self.find_sig(&sigs, &zone, RecordType::Dnskey);
        if key_sigs.is_empty() {
            return Ok(HopResult::Bogus(format!("unsigned DNSKEY set for {zone}")));
        }
        // Keys vouched for by the parent (or the anchor) may sign the set.
        let entry_keys: Vec<ResourceRecord> = keys
            .iter()
            .filter(|k| match &self.trusted_ds {
                None => self.anchor.trusts(k),
                Some(ds) => ds.iter().any(|d| super::ds_matches(d, k)),
            })
            .cloned()
            .collect();
        if entry_keys.is_empty() {
            return Ok(HopResult::Bogus(format!("no DNSKEY of {zone} matches its DS")));
        }
        if !self.verified_by_any(&keys, &key_sigs, &entry_keys)? {
            return Ok(HopResult::Bogus(format!("DNSKEY signature for {zone} invalid")));
        }
        if sets.is_empty() {
            return Ok(HopResult::Bogus(format!("nothing signed by {zone}")));
        }
        let mut referral = None;
        for ((owner, rtype), rrset) in &sets {
            let rr_sigs = self.find_sig(&sigs, owner, *rtype);
            if rr_sigs.is_empty() {
                return Ok(HopResult::Bogus(format!("{owner} {rtype} is unsigned")));
            }
            if !owner.is_subdomain_of(&zone) {
                return Ok(HopResult::Bogus(format!("{owner} is outside {zone}")));
            }
            if !self.verified_by_any(rrset, &rr_sigs, &keys)? {
                return Ok(HopResult::Bogus(format!("{owner} {rtype} signature invalid")));
            }
            if *rtype == RecordType::Ds {
                if referral.is_some() || owner == &zone {
                    return Ok(HopResult::Bogus("ambiguous delegation".into()));
                }
                referral = Some((owner.clone(), rrset.clone()));
            }
        }
        Ok(match referral {
            Some((child, ds)) => {
                self.zone = child.clone();
                self.trusted_ds = Some(ds);
                HopResult::Referral(child)
            }
            None => HopResult::Answer,
        })
    }
}

/// Maximum zones walked before giving up.
const MAX_DEPTH: usize = 32;

/// Validates a response that carries its own chain: answer rrsets with
/// RRSIGs, plus DNSKEY and DS sets (with RRSIGs) for every zone from the
/// anchor down in the authority or additional section.
///
/// A response without the DO bit, or a negative answer, is `Insecure` and
/// triggers no signature verification.
pub fn validate_chain(
    provider: &Provider,
    response: &DnsMessage,
    anchor: &TrustAnchor,
    now: u32,
) -> Result<ValidationReport, DnssecError> {
    let started = Instant::now();
    if !response.dnssec_ok() {
        return Ok(ValidationReport::insecure(started, "DNSSEC not requested"));
    }
    if response.flags.rcode != Rcode::NoError || response.answers.is_empty() {
        return Ok(ValidationReport::insecure(started, "unsigned negative answer"));
    }
    if !response.answers.iter().any(|rr| rr.rtype == RecordType::Rrsig) {
        return Err(DnssecError::MissingRecords("answer carries no RRSIG".into()));
    }
    let chain: Vec<&ResourceRecord> = response
        .authority
        .iter()
        .chain(&response.additional)
        .collect();
    let mut validator = ChainValidator::new(provider, anchor, now);
    let bogus = |v: &ChainValidator, reason: String| ValidationReport {
        outcome: ValidationOutcome::Bogus,
        elapsed: started.elapsed(),
        hops: v.hop_times.clone(),
        reason: Some(reason),
    };
    for _ in 0..MAX_DEPTH {
        let zone = validator.zone().clone();
        // DNSKEY set of this zone and any DS set this zone signed.
        let delegated: Vec<Name> = chain
            .iter()
            .filter(|rr| {
                rr.rtype == RecordType::Rrsig
                    && covered_type(rr) == Some(RecordType::Ds)
                    && signer(rr).is_some_and(|s| s.eq_ignore_case(&zone))
            })
            .map(|rr| rr.name.to_lowercase())
            .collect();
        let mut hop: Vec<&ResourceRecord> = chain
            .iter()
            .copied()
            .filter(|rr| {
                let owner_is_zone = rr.name.eq_ignore_case(&zone);
                let in_delegation = delegated.iter().any(|d| rr.name.eq_ignore_case(d));
                match rr.rtype {
                    RecordType::Dnskey => owner_is_zone,
                    RecordType::Ds => in_delegation,
                    RecordType::Rrsig => match covered_type(rr) {
                        Some(RecordType::Dnskey) => owner_is_zone,
                        Some(RecordType::Ds) => {
                            in_delegation && signer(rr).is_some_and(|s| s.eq_ignore_case(&zone))
                        }
                        _ => false,
                    },
                    _ => false,
                }
            })
            .collect();
        if delegated.is_empty() {
            hop.extend(response.answers.iter());
        }
        match validator.hop(&hop)? {
            HopResult::Referral(_) => continue,
            HopResult::Answer => {
                return Ok(ValidationReport {
                    outcome: ValidationOutcome::Secure,
                    elapsed: started.elapsed(),
                    hops: validator.hop_times.clone(),
                    reason: None,
                })
            }
            HopResult::Bogus(reason) => return Ok(bogus(&validator, reason)),
        }
    }
    Ok(bogus(&validator, "chain too deep".into()))
}
