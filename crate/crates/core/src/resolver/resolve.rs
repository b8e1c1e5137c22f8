use std::fmt;
use std::sync::Arc;
use std::time::{Duration, Instant};

use super::cache::{Cache, CacheKey};
use super::zone::{Lookup, ZoneStore};
use crate::crypto::Provider;
use crate::dns::{decode_message, encode_message, DnsMessage, Edns, Flags, Name, Question, Rcode, RecordType, ResourceRecord, CLASS_IN};
use crate::dnssec::{unix_now, ChainValidator, HopResult, ValidationOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ResolveMode {
    /// Answer from the local store in one step.
    #[default]
    Stub,
    /// Walk root, TLD and authoritative zones in process.
    RecursiveSim,
}

impl std::str::FromStr for ResolveMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "stub" => Ok(Self::Stub),
            "recursive" | "recursive-sim" => Ok(Self::RecursiveSim),
            _ => Err(format!("unknown resolver mode `{s}` (stub|recursive-sim)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ServerRole {
    Cache,
    Root,
    Tld,
    Authoritative,
}

impl fmt::Display for ServerRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ServerRole::Cache => "cache",
            ServerRole::Root => "root",
            ServerRole::Tld => "tld",
            ServerRole::Authoritative => "authoritative",
        })
    }
}

#[derive(Debug, Clone)]
pub struct TraceStep {
    pub role: ServerRole,
    pub zone: String,
    pub t_query: Duration,
    pub t_response: Duration,
    pub t_dnssec: Duration,
}

/// Per-step resolution timing.
#[derive(Debug, Clone)]
pub struct ResolutionTrace {
    pub steps: Vec<TraceStep>,
    pub t_return: Duration,
    pub cache_hit: bool,
    pub outcome: Option<ValidationOutcome>,
    /// Wall clock for the whole resolution.
    pub wall: Duration,
}

impl ResolutionTrace {
    pub fn n(&self) -> usize {
        self.steps.len()
    }

    /// Sum of query/response times, plus validation times when `dnssec`,
    /// plus the return time.
    pub fn total(&self, dnssec: bool) -> Duration {
        let mut t = self.t_return;
        for s in &self.steps {
            t += s.t_query + s.t_response;
            if dnssec {
                t += s.t_dnssec;
            }
        }
        t
    }

    pub fn dnssec_time(&self) -> Duration {
        self.steps.iter().map(|s| s.t_dnssec).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResolverOptions {
    pub mode: ResolveMode,
    /// Validate signed answers (the DNSSEC toggle).
    pub validate: bool,
    pub cache: bool,
    pub cache_capacity: usize,
    /// Attach DNSKEY/DS material for every zone to DO responses.
    pub chain_in_response: bool,
}

impl Default for ResolverOptions {
    fn default() -> Self {
        Self {
            mode: ResolveMode::Stub,
            validate: false,
            cache: false,
            cache_capacity: 4096,
            chain_in_response: false,
        }
    }
}

struct Laps {
    last: Instant,
}

impl Laps {
    fn lap(&mut self) -> Duration {
        let now = Instant::now();
        let d = now - self.last;
        self.last = now;
        d
    }
}

enum Answer {
    Records(Vec<ResourceRecord>),
    NoData,
    NxDomain,
    Refused,
}

pub struct Resolver {
    store: ZoneStore,
    provider: Arc<Provider>,
    options: ResolverOptions,
    cache: Option<Cache>,
}

impl Resolver {
    pub fn new(store: ZoneStore, provider: Arc<Provider>, options: ResolverOptions) -> Self {
        let cache = options.cache.then(|| Cache::new(options.cache_capacity));
        Self { store, provider, options, cache }
    }

    pub fn store(&self) -> &ZoneStore {
        &self.store
    }

    pub fn options(&self) -> ResolverOptions {
        self.options
    }

    fn validating(&self) -> bool {
        self.options.validate && self.store.is_signed()
    }

    fn role(i: usize, n: usize) -> ServerRole {
        match i {
            0 => ServerRole::Root,
            _ if i + 1 == n => ServerRole::Authoritative,
            _ => ServerRole::Tld,
        }
    }

    fn lookup_records(&self, name: &Name, rtype: RecordType, with_sigs: bool) -> Answer {
        match self.store.lookup(name, rtype) {
            Lookup::Found(set) => {
                let mut out = Vec::new();
                set.append_to(&mut out, with_sigs);
                Answer::Records(out)
            }
            Lookup::NoData => Answer::NoData,
            Lookup::NxDomain => Answer::NxDomain,
            Lookup::OutOfZone => Answer::Refused,
        }
    }

    /// Answers `query` from the store, walking the zone chain in
    /// recursive-sim mode. Bogus validation yields SERVFAIL.
    pub fn resolve(&self, query: &DnsMessage) -> (DnsMessage, ResolutionTrace) {
        let started = Instant::now();
        let mut laps = Laps { last: started };
        let mut response = DnsMessage::response_to(query);
        let Some(q) = query.question().cloned() else {
            response.flags.rcode = Rcode::FormErr;
            let t_return = laps.lap();
            return (response, ResolutionTrace { steps: Vec::new(), t_return, cache_hit: false, outcome: None, wall: started.elapsed() });
        };
        let do_bit = query.dnssec_ok();
        let key = CacheKey::new(&q.name, q.qtype, do_bit);
        if let Some(cache) = &self.cache {
            if let Some(hit) = cache.get(&key, started) {
                let t_query = laps.lap();
                let mut msg = hit.message;
                msg.id = query.id;
                msg.flags.recursion_desired = query.flags.recursion_desired;
                let t_return = laps.lap();
                let step = TraceStep { role: ServerRole::Cache, zone: q.name.to_string(), t_query, t_response: Duration::ZERO, t_dnssec: Duration::ZERO };
                return (msg, ResolutionTrace { steps: vec![step], t_return, cache_hit: true, outcome: hit.outcome, wall: started.elapsed() });
            }
        }

        let signed = self.store.is_signed();
        let with_sigs = signed && do_bit;
        let validate = self.validating();
        let (answer, steps, outcome) = match self.options.mode {
            ResolveMode::Stub => self.resolve_stub(&q, with_sigs, validate, &mut laps),
            ResolveMode::RecursiveSim => self.resolve_recursive(&q, with_sigs, validate, &mut laps),
        };

        match (outcome, answer) {
            (Some(ValidationOutcome::Bogus), _) => response.flags.rcode = Rcode::ServFail,
            (_, Answer::Records(records)) => {
                response.answers = records;
                response.flags.authoritative = self.options.mode == ResolveMode::Stub;
                if outcome == Some(ValidationOutcome::Secure) && (do_bit || query.flags.authenticated_data) {
                    response.flags.authenticated_data = true;
                }
                if with_sigs && self.options.chain_in_response {
                    if let Some(h) = self.store.hierarchy() {
                        response.authority = h.chain_records();
                    }
                }
            }
            (_, Answer::NoData) => {}
            (_, Answer::NxDomain) => response.flags.rcode = Rcode::NxDomain,
            (_, Answer::Refused) => response.flags.rcode = Rcode::Refused,
        }
        if let Some(cache) = &self.cache {
            cache.put(key, &response, outcome, started);
        }
        let t_return = laps.lap();
        let trace = ResolutionTrace { steps, t_return, cache_hit: false, outcome, wall: started.elapsed() };
        (response, trace)
    }

    fn resolve_stub(
        &self,
        q: &Question,
        with_sigs: bool,
        validate: bool,
        laps: &mut Laps,
    ) -> (Answer, Vec<TraceStep>, Option<ValidationOutcome>) {
        let name = q.name.to_lowercase();
        let t_query = laps.lap();
        let answer = self.lookup_records(&name, q.qtype, with_sigs);
        let t_response = laps.lap();
        let outcome = match (&answer, self.store.hierarchy()) {
            (Answer::Records(_), Some(h)) if validate => {
                let mut v = ChainValidator::new(&self.provider, h.anchor(), unix_now());
                let mut outcome = ValidationOutcome::Bogus;
                for i in 0..h.depth() {
                    let records = h.hop_records(i, &name, q.qtype, true);
                    let refs: Vec<&ResourceRecord> = records.iter().collect();
                    match v.hop(&refs) {
                        Ok(HopResult::Referral(_)) => continue,
                        Ok(HopResult::Answer) => outcome = ValidationOutcome::Secure,
                        _ => {}
                    }
                    break;
                }
                Some(outcome)
            }
            (_, Some(_)) if validate => Some(ValidationOutcome::Insecure),
            _ => None,
        };
        let t_dnssec = if validate { laps.lap() } else { Duration::ZERO };
        let step = TraceStep { role: ServerRole::Authoritative, zone: self.store.apex().to_string(), t_query, t_response, t_dnssec };
        (answer, vec![step], outcome)
    }

    fn resolve_recursive(
        &self,
        q: &Question,
        with_sigs: bool,
        validate: bool,
        laps: &mut Laps,
    ) -> (Answer, Vec<TraceStep>, Option<ValidationOutcome>) {
        let name = q.name.to_lowercase();
        let path = self.store.zone_path();
        let n = path.len();
        let hierarchy = self.store.hierarchy();
        let anchor_now = unix_now();
        let mut validator = match hierarchy {
            Some(h) if validate => Some(ChainValidator::new(&self.provider, h.anchor(), anchor_now)),
            _ => None,
        };
        let mut steps = Vec::with_capacity(n);
        let mut outcome = validator.as_ref().map(|_| ValidationOutcome::Secure);
        let mut answer = Answer::Refused;
        laps.lap();
        for (i, zone) in path.iter().enumerate() {
            // Upstream query, as sent and as received by zone i's server.
            let upstream = DnsMessage {
                id: rand::random(),
                flags: Flags::default(),
                questions: vec![Question { name: name.clone(), qtype: q.qtype, qclass: CLASS_IN }],
                edns: (with_sigs || validate).then(|| Edns { dnssec_ok: true, ..Edns::default() }),
                ..DnsMessage::default()
            };
            let received = encode_message(&upstream).ok().and_then(|b| decode_message(&b).ok());
            let t_query = laps.lap();

            let leaf = i + 1 == n;
            let records = match hierarchy {
                Some(h) => h.hop_records(i, &name, q.qtype, with_sigs || validate),
                None if leaf => match self.lookup_records(&name, q.qtype, false) {
                    Answer::Records(r) => r,
                    _ => Vec::new(),
                },
                None => Vec::new(),
            };
            let mut reply = received.map(|r| DnsMessage::response_to(&r)).unwrap_or_default();
            if leaf {
                reply.answers = records;
            } else {
                reply.authority = records;
            }
            let reply = encode_message(&reply).ok().and_then(|b| decode_message(&b).ok()).unwrap_or_default();
            let t_response = laps.lap();

            if leaf {
                answer = self.lookup_records(&name, q.qtype, with_sigs);
            }
            if let Some(v) = validator.as_mut() {
                let positive = matches!(answer, Answer::Records(_));
                if !leaf || positive {
                    let refs: Vec<&ResourceRecord> = reply.all_records().collect();
                    match v.hop(&refs) {
                        Ok(HopResult::Referral(_)) if !leaf => {}
                        Ok(HopResult::Answer) if leaf => {}
                        _ => outcome = Some(ValidationOutcome::Bogus),
                    }
                } else {
                    // No NSEC support: negative answers are unprovable.
                    outcome = Some(ValidationOutcome::Insecure);
                }
            }
            let t_dnssec = if validator.is_some() { laps.lap() } else { Duration::ZERO };
            steps.push(TraceStep { role: Self::role(i, n), zone: zone.to_string(), t_query, t_response, t_dnssec });
            if outcome == Some(ValidationOutcome::Bogus) {
                break;
            }
        }
        (answer, steps, outcome)
    }
}
