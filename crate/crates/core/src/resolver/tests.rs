use std::net::TcpListener;
use std::sync::Arc;
use std::time::Duration;

use super::*;
use crate::channel::{ClientConfig, ServerIdentity, TrustStore};
use crate::crypto::{AlgorithmId, Kind, Provider};
use crate::dns::{build_query, build_query_with, Name, RData, Rcode, RecordType};
use crate::dnssec::ValidationOutcome;
use crate::policy::PolicyMode;
use crate::transport::{DohFraming, TransportKind};

const TIMEOUT: Duration = Duration::from_secs(20);

fn id(n: &str) -> AlgorithmId {
    AlgorithmId::lookup(n).unwrap()
}

fn signed_store(p: &Provider) -> ZoneStore {
    load_zone_text(DEFAULT_ZONE, Some((p, id("mldsa44")))).unwrap()
}

fn resolver(p: &Arc<Provider>, signed: bool, opts: ResolverOptions) -> Resolver {
    let store = if signed { signed_store(p) } else { load_zone_text(DEFAULT_ZONE, None).unwrap() };
    Resolver::new(store, Arc::clone(p), opts)
}

fn recursive(validate: bool) -> ResolverOptions {
    ResolverOptions { mode: ResolveMode::RecursiveSim, validate, ..ResolverOptions::default() }
}

#[test]
fn stub_answers_in_one_step() {
    let p = Arc::new(Provider::simulated());
    let r = resolver(&p, false, ResolverOptions::default());
    let (resp, trace) = r.resolve(&build_query("www.example.com", RecordType::A, false).unwrap());
    assert_eq!(resp.flags.rcode, Rcode::NoError);
    assert_eq!(resp.answers.len(), 1);
    assert_eq!(trace.n(), 1);
    assert!(trace.outcome.is_none());
    let (resp, _) = r.resolve(&build_query("nope.example.com", RecordType::A, false).unwrap());
    assert_eq!(resp.flags.rcode, Rcode::NxDomain);
    let (resp, _) = r.resolve(&build_query("www.example.com", RecordType::Txt, false).unwrap());
    assert_eq!((resp.flags.rcode, resp.answers.len()), (Rcode::NoError, 0));
    let (resp, _) = r.resolve(&build_query("example.org", RecordType::A, false).unwrap());
    assert_eq!(resp.flags.rcode, Rcode::Refused);
}

#[test]
fn recursive_validation_times_every_hop() {
    let p = Arc::new(Provider::simulated());
    let r = resolver(&p, true, recursive(true));
    let (resp, trace) = r.resolve(&build_query("example.com", RecordType::A, true).unwrap());
    assert_eq!(resp.flags.rcode, Rcode::NoError);
    assert!(resp.flags.authenticated_data);
    assert!(resp.answers.iter().any(|rr| rr.rtype == RecordType::Rrsig));
    assert_eq!(trace.outcome, Some(ValidationOutcome::Secure));
    assert_eq!(trace.n(), 3);
    let roles: Vec<_> = trace.steps.iter().map(|s| s.role).collect();
    assert_eq!(roles, [ServerRole::Root, ServerRole::Tld, ServerRole::Authoritative]);
    assert!(trace.steps.iter().all(|s| s.t_dnssec > Duration::ZERO));
}

#[test]
fn recursive_steps_tile_wall_clock() {
    let p = Arc::new(Provider::simulated());
    let r = resolver(&p, true, recursive(true));
    for _ in 0..20 {
        let (_, trace) = r.resolve(&build_query("www.example.com", RecordType::A, true).unwrap());
        let total = trace.total(true);
        let diff = trace.wall.abs_diff(total);
        assert!(
            diff <= Duration::from_micros(200) || diff.as_secs_f64() <= 0.05 * trace.wall.as_secs_f64(),
            "steps {total:?} vs wall {:?}",
            trace.wall
        );
    }
}

#[test]
fn no_validation_means_no_verify_calls() {
    let p = Arc::new(Provider::simulated());
    let r = resolver(&p, true, recursive(false));
    let before = p.stats().verify;
    let (resp, trace) = r.resolve(&build_query("example.com", RecordType::A, true).unwrap());
    assert_eq!(p.stats().verify, before);
    assert!(!resp.flags.authenticated_data);
    assert!(trace.steps.iter().all(|s| s.t_dnssec == Duration::ZERO));
    assert_eq!(trace.n(), 3);
}

#[test]
fn tampered_tld_signature_is_servfail() {
    let p = Arc::new(Provider::simulated());
    let mut store = signed_store(&p);
    let tld = &mut store.hierarchy_mut().unwrap().zones_mut()[1];
    let sig = tld.delegation.as_mut().unwrap().rrsig.as_mut().unwrap();
    if let RData::Rrsig { signature, .. } = &mut sig.rdata {
        signature[0] ^= 0xff;
    }
    for mode in [ResolveMode::Stub, ResolveMode::RecursiveSim] {
        let r = Resolver::new(store.clone(), Arc::clone(&p), ResolverOptions { mode, validate: true, ..Default::default() });
        let (resp, trace) = r.resolve(&build_query("example.com", RecordType::A, true).unwrap());
        assert_eq!(resp.flags.rcode, Rcode::ServFail, "{mode:?}");
        assert_eq!(trace.outcome, Some(ValidationOutcome::Bogus));
        assert!(resp.answers.is_empty());
    }
}

#[test]
fn negative_answers_are_insecure() {
    let p = Arc::new(Provider::simulated());
    let r = resolver(&p, true, recursive(true));
    let (resp, trace) = r.resolve(&build_query("missing.example.com", RecordType::A, true).unwrap());
    assert_eq!(resp.flags.rcode, Rcode::NxDomain);
    assert_eq!(trace.outcome, Some(ValidationOutcome::Insecure));
}

#[test]
fn cache_hit_is_one_step_and_faster() {
    let p = Arc::new(Provider::simulated());
    let opts = ResolverOptions { cache: true, ..recursive(true) };
    let r = resolver(&p, true, opts);
    let q = build_query("example.com", RecordType::A, true).unwrap();
    let (first, t1) = r.resolve(&q);
    let (second, t2) = r.resolve(&q);
    assert!(!t1.cache_hit && t2.cache_hit);
    assert_eq!(t2.n(), 1);
    assert_eq!(t2.steps[0].role, ServerRole::Cache);
    assert!(t2.wall < t1.wall);
    assert_eq!(first.answers, second.answers);
    assert_eq!(second.id, q.id);
}

#[test]
fn chain_in_response_validates_offline() {
    let p = Arc::new(Provider::simulated());
    let opts = ResolverOptions { chain_in_response: true, ..ResolverOptions::default() };
    let r = resolver(&p, true, opts);
    let (resp, _) = r.resolve(&build_query("example.com", RecordType::A, true).unwrap());
    let anchor = r.store().hierarchy().unwrap().anchor();
    let report = crate::dnssec::validate_chain(&p, &resp, anchor, crate::dnssec::unix_now()).unwrap();
    assert_eq!(report.outcome, ValidationOutcome::Secure);
}

struct Fixture {
    server: RunningServer,
    provider: Arc<Provider>,
    trust: TrustStore,
}

fn start(policy: PolicyMode, udp: bool) -> Fixture {
    let provider = Arc::new(Provider::simulated());
    let (identity, trust) = ServerIdentity::self_issued(&provider, "dns.example", id("mldsa44")).unwrap();
    let mut cfg = ServeConfig::loopback(AlgorithmId::all_of(Kind::Kem).collect(), identity);
    cfg.policy = policy;
    cfg.stats_port = Some(0);
    if udp {
        cfg.udp_port = Some(0);
    }
    let r = Arc::new(resolver(&provider, true, ResolverOptions::default()));
    let server = serve(r, Arc::clone(&provider), cfg).unwrap();
    Fixture { server, provider, trust }
}

fn client(f: &Fixture, kem: &str) -> ClientConfig {
    ClientConfig {
        kems: vec![id(kem)],
        sigs: vec![id("mldsa44")],
        policy: PolicyMode::AllowLegacy,
        server_name: "dns.example".into(),
        trust: f.trust.clone(),
        now: None,
    }
}

#[test]
fn one_query_per_transport_updates_counters() {
    let f = start(PolicyMode::AllowLegacy, false);
    let doh = DohFraming::default();
    for (i, kind) in [TransportKind::Dot, TransportKind::Doh].into_iter().enumerate() {
        let q = build_query("www.example.com", RecordType::A, false).unwrap();
        let out = query_once(f.server.addr(kind).unwrap(), kind, &f.provider, client(&f, "mlkem512"), &doh, &q, TIMEOUT)
            .unwrap();
        assert_eq!(out.response().answers.len(), 1);
        assert!(!out.reset);
        let snap = f.server.snapshot();
        assert_eq!(snap.sessions, i as u64 + 1);
        assert!(snap.dns_messages >= 2 * (i as u64 + 1));
    }
    let remote = StatsSnapshot::fetch(f.server.stats_addr.unwrap(), TIMEOUT).unwrap();
    let fin = f.server.shutdown();
    assert_eq!(remote.sessions, 2);
    assert_eq!(fin.handshake_failures, 0);
}

#[test]
fn server_and_client_byte_counts_agree() {
    let f = start(PolicyMode::AllowLegacy, false);
    let q = build_query("example.com", RecordType::A, true).unwrap();
    let out = query_once(f.server.dot.unwrap(), TransportKind::Dot, &f.provider, client(&f, "mlkem768"), &DohFraming::default(), &q, TIMEOUT)
        .unwrap();
    let snap = f.server.shutdown();
    assert_eq!(snap.bytes_in, out.bytes_sent);
    assert_eq!(snap.bytes_out, out.bytes_received);
}

#[test]
fn legacy_client_rejected_by_pqc_only_server() {
    let f = start(PolicyMode::PqcOnly, false);
    let q = build_query("example.com", RecordType::A, false).unwrap();
    let err = query_once(f.server.dot.unwrap(), TransportKind::Dot, &f.provider, client(&f, "x25519"), &DohFraming::default(), &q, TIMEOUT)
        .unwrap_err();
    assert!(matches!(err, ResolverError::Channel(crate::channel::ChannelError::DowngradeRejected(_))), "{err}");
    let snap = f.server.shutdown();
    assert_eq!((snap.sessions, snap.downgrade_rejections), (0, 1));
}

#[test]
fn port_in_use_is_bind_failure() {
    let taken = TcpListener::bind("127.0.0.1:0").unwrap();
    let provider = Arc::new(Provider::simulated());
    let (identity, _) = ServerIdentity::self_issued(&provider, "dns.example", id("ed25519")).unwrap();
    let mut cfg = ServeConfig::loopback(vec![id("x25519")], identity);
    cfg.dot_port = Some(taken.local_addr().unwrap().port());
    let r = Arc::new(resolver(&provider, false, ResolverOptions::default()));
    assert!(matches!(serve(r, provider, cfg), Err(ResolverError::BindFailure { .. })));
}

#[test]
fn udp_truncates_to_advertised_payload() {
    let f = start(PolicyMode::AllowLegacy, true);
    let addr = f.server.udp.unwrap();
    // A signed answer with an ML-DSA-44 RRSIG is well over 512 bytes.
    let q = build_query_with("example.com", RecordType::A, true, 512).unwrap();
    let (resp, n) = query_udp(addr, &q, TIMEOUT).unwrap();
    assert!(resp.flags.truncated);
    assert!(n <= 512);
    let q = build_query_with("example.com", RecordType::A, true, 4096).unwrap();
    let (resp, n) = query_udp(addr, &q, TIMEOUT).unwrap();
    assert!(!resp.flags.truncated && n > 512);
    let q = build_query("www.example.com", RecordType::A, false).unwrap();
    let (resp, _) = query_udp(addr, &q, TIMEOUT).unwrap();
    assert_eq!(resp.answers.len(), 1);
    assert_eq!(f.server.shutdown().udp_truncated, 1);
}

#[test]
fn throttled_clients_get_an_alert() {
    let provider = Arc::new(Provider::simulated());
    let (identity, trust) = ServerIdentity::self_issued(&provider, "dns.example", id("ed25519")).unwrap();
    let mut cfg = ServeConfig::loopback(vec![id("x25519")], identity);
    cfg.rate_limit = Some(crate::policy::RateLimitConfig { capacity: 2.0, refill_rate: 0.001, per_tuple: false });
    let r = Arc::new(resolver(&provider, false, ResolverOptions::default()));
    let server = serve(r, Arc::clone(&provider), cfg).unwrap();
    let ccfg = ClientConfig {
        kems: vec![id("x25519")],
        sigs: vec![id("ed25519")],
        policy: PolicyMode::AllowLegacy,
        server_name: "dns.example".into(),
        trust,
        now: None,
    };
    let q = build_query("example.com", RecordType::A, false).unwrap();
    let mut throttled = 0;
    for _ in 0..4 {
        match query_once(server.dot.unwrap(), TransportKind::Dot, &provider, ccfg.clone(), &DohFraming::default(), &q, TIMEOUT) {
            Ok(_) => {}
            Err(ResolverError::Channel(crate::channel::ChannelError::Throttled)) => throttled += 1,
            Err(e) => panic!("{e}"),
        }
    }
    assert!(throttled >= 2);
    assert!(server.shutdown().rate_limited >= 2);
}

#[test]
fn zone_path_is_root_first() {
    let p = Provider::simulated();
    let store = signed_store(&p);
    let path: Vec<String> = store.zone_path().iter().map(Name::to_string).collect();
    assert_eq!(path, [".", "com.", "example.com."]);
}
