use std::net::{IpAddr, Ipv4Addr};
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use super::{
    kb, memory_percent, normalize_cpu_client, normalize_cpu_server, process_usage, BenchError, BenchPlan, PerfSample,
    SessionResult, StatsSource, Target,
};
use crate::channel::{ClientConfig, ServerIdentity};
use crate::crypto::{AlgorithmId, Kind, Provider};
use crate::dns::{build_query, build_query_with, DnsMessage};
use crate::policy::{PolicyMode, RateLimitConfig};
use crate::resolver::{
    load_zone_text, query_once, query_udp, serve, QueryOutcome, ResolveMode, Resolver, ResolverError,
    ResolverOptions, RunningServer, ServeConfig, StatsSnapshot, DEFAULT_ZONE,
};
use crate::transport::{DohFraming, TransportKind};

/// Everything needed to stand up a resolver for a benchmark.
#[derive(Debug, Clone)]
pub struct ServerSpec {
    pub kems: Vec<AlgorithmId>,
    pub sig: AlgorithmId,
    /// Signs the zone (and its ancestors) when set.
    pub dnssec_alg: Option<AlgorithmId>,
    pub validate: bool,
    pub mode: ResolveMode,
    pub cache: bool,
    pub zone_text: String,
    pub policy: PolicyMode,
    pub workers: usize,
    pub rate_limit: Option<RateLimitConfig>,
    pub bind: IpAddr,
    pub dot_port: Option<u16>,
    pub doh_port: Option<u16>,
    pub udp_port: Option<u16>,
    pub stats_port: Option<u16>,
    pub server_name: String,
    pub doh: DohFraming,
}

impl ServerSpec {
    /// Loopback server on ephemeral ports supporting every KEM.
    pub fn new(sig: AlgorithmId) -> Self {
        Self {
            kems: AlgorithmId::all_of(Kind::Kem).collect(),
            sig,
            dnssec_alg: None,
            validate: false,
            mode: ResolveMode::Stub,
            cache: false,
            zone_text: DEFAULT_ZONE.to_string(),
            policy: PolicyMode::AllowLegacy,
            workers: 4,
            rate_limit: None,
            bind: IpAddr::V4(Ipv4Addr::LOCALHOST),
            dot_port: Some(0),
            doh_port: Some(0),
            udp_port: Some(0),
            stats_port: None,
            server_name: "dns.example".into(),
            doh: DohFraming::default(),
        }
    }

    /// Builds the resolver, identity and listener config without binding.
    pub fn build(&self, provider: &Arc<Provider>) -> Result<(Resolver, ServeConfig, crate::channel::TrustStore), BenchError> {
        let store = load_zone_text(&self.zone_text, self.dnssec_alg.map(|a| (provider.as_ref(), a)))?;
        let options = ResolverOptions { mode: self.mode, validate: self.validate, cache: self.cache, ..Default::default() };
        let resolver = Resolver::new(store, Arc::clone(provider), options);
        let (identity, trust) = ServerIdentity::self_issued(provider, &self.server_name, self.sig)
            .map_err(ResolverError::from)?;
        let cfg = ServeConfig {
            bind: self.bind,
            dot_port: self.dot_port,
            doh_port: self.doh_port,
            udp_port: self.udp_port,
            stats_port: self.stats_port,
            kems: self.kems.clone(),
            identity,
            policy: self.policy,
            workers: self.workers,
            rate_limit: self.rate_limit,
            doh: self.doh.clone(),
            io_timeout: Duration::from_secs(60),
        };
        Ok((resolver, cfg, trust))
    }
}

/// Starts an in-process server and describes it as a [`Target`].
pub fn start_server(provider: Arc<Provider>, spec: &ServerSpec) -> Result<(RunningServer, Target), BenchError> {
    let (resolver, cfg, trust) = spec.build(&provider)?;
    let server = serve(Arc::new(resolver), provider, cfg)?;
    let target = Target {
        dot: server.dot,
        doh: server.doh,
        udp: server.udp,
        trust,
        server_name: spec.server_name.clone(),
        doh_framing: spec.doh.clone(),
        stats: StatsSource::Local(server.stats()),
    };
    Ok((server, target))
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub samples: Vec<PerfSample>,
    pub failures: usize,
    pub first_error: Option<String>,
    /// Handshake bytes per successful query.
    pub handshake_bytes: Vec<usize>,
}

impl BenchReport {
    /// Column means; all zero when there are no samples.
    pub fn mean(&self) -> PerfSample {
        mean_of(&self.samples)
    }
}

pub(crate) fn mean_of(samples: &[PerfSample]) -> PerfSample {
    if samples.is_empty() {
        return PerfSample::ZERO;
    }
    let n = samples.len() as f64;
    let sum = |f: fn(&PerfSample) -> f64| samples.iter().map(f).sum::<f64>() / n;
    PerfSample {
        t: sum(|s| s.t),
        latency_ms: sum(|s| s.latency_ms),
        bandwidth_kb: sum(|s| s.bandwidth_kb),
        cpu_client: sum(|s| s.cpu_client),
        cpu_server: sum(|s| s.cpu_server),
        mem: sum(|s| s.mem),
    }
}

fn unix_seconds() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

fn client_config(plan: &BenchPlan, target: &Target) -> ClientConfig {
    ClientConfig {
        kems: vec![plan.suite.kem],
        sigs: vec![plan.suite.sig],
        policy: plan.policy,
        server_name: target.server_name.clone(),
        trust: target.trust.clone(),
        now: None,
    }
}

fn plan_query(plan: &BenchPlan) -> Result<DnsMessage, BenchError> {
    let q = if plan.transport == TransportKind::UdpPlain {
        build_query_with(&plan.domain, plan.qtype, plan.dnssec, plan.udp_payload)
    } else {
        build_query(&plan.domain, plan.qtype, plan.dnssec)
    };
    q.map_err(|e| BenchError::InvalidPlan(e.to_string()))
}

enum Exchange {
    Secure(Box<QueryOutcome>),
    Udp { bytes: u64 },
}

fn exchange(plan: &BenchPlan, target: &Target, provider: &Provider) -> Result<Exchange, BenchError> {
    let addr = target
        .addr(plan.transport)
        .ok_or_else(|| BenchError::ResolverUnreachable(format!("no {} listener", plan.transport)))?;
    let query = plan_query(plan)?;
    if plan.transport == TransportKind::UdpPlain {
        let (resp, n) = query_udp(addr, &query, plan.timeout).map_err(|e| BenchError::ResolverUnreachable(e.to_string()))?;
        if resp.flags.truncated {
            return Err(ResolverError::BadResponse("truncated UDP response".into()).into());
        }
        let sent = crate::dns::encode_message(&query).map(|b| b.len()).unwrap_or(0);
        return Ok(Exchange::Udp { bytes: (sent + n) as u64 });
    }
    let out = query_once(addr, plan.transport, provider, client_config(plan, target), &target.doh_framing, &query, plan.timeout)
        .map_err(|e| match e {
            ResolverError::Io(m) if m.starts_with("connect") => BenchError::ResolverUnreachable(m),
            other => BenchError::Resolver(other),
        })?;
    out.transcript.validate().map_err(ResolverError::from)?;
    Ok(Exchange::Secure(Box::new(out)))
}

/// The server accounts a connection's CPU time after the client has seen
/// the close, so wait briefly for the counters to catch up.
fn settled_snapshot(target: &Target, before: Option<&StatsSnapshot>) -> Option<StatsSnapshot> {
    let before = before?;
    let deadline = Instant::now() + Duration::from_millis(200);
    loop {
        let now = target.stats.snapshot()?;
        if now.completed > before.completed || Instant::now() >= deadline {
            return Some(now);
        }
        std::thread::sleep(Duration::from_micros(200));
    }
}

/// Runs `plan.queries` sequential transactions, each over a fresh
/// connection and handshake. Failed handshakes are counted and produce no
/// row; an unreachable resolver aborts the run.
pub fn run_benchmark(plan: &BenchPlan, target: &Target, provider: &Provider) -> Result<BenchReport, BenchError> {
    plan.validate()?;
    let mut report = BenchReport { samples: Vec::with_capacity(plan.queries), failures: 0, first_error: None, handshake_bytes: Vec::new() };
    for _ in 0..plan.queries {
        let server_before = target.stats.snapshot();
        let (u0, s0, _) = process_usage();
        let t_start = Instant::now();
        let result = exchange(plan, target, provider);
        let elapsed = t_start.elapsed();
        let (u1, s1, rss) = process_usage();
        let server_after = settled_snapshot(target, server_before.as_ref());
        let bytes = match result {
            Ok(Exchange::Secure(out)) => {
                report.handshake_bytes.push(out.transcript.bytes_on_wire.total());
                out.bytes()
            }
            Ok(Exchange::Udp { bytes }) => bytes,
            Err(e @ BenchError::ResolverUnreachable(_)) => return Err(e),
            Err(e) => {
                report.failures += 1;
                report.first_error.get_or_insert_with(|| e.to_string());
                continue;
            }
        };
        let cpu_server = match (server_before, server_after) {
            (Some(a), Some(b)) => normalize_cpu_server(
                Duration::from_nanos(b.server_cpu_ns.saturating_sub(a.server_cpu_ns)),
                elapsed * plan.vcpus,
                plan.vcpus,
            )?,
            _ => 0.0,
        };
        report.samples.push(PerfSample {
            t: unix_seconds(),
            latency_ms: elapsed.as_secs_f64() * 1000.0,
            bandwidth_kb: kb(bytes),
            cpu_client: normalize_cpu_client(u1.saturating_sub(u0), s1.saturating_sub(s0), elapsed, plan.vcpus)?,
            cpu_server,
            mem: memory_percent(rss, plan.total_memory_mib),
        });
    }
    Ok(report)
}

/// Runs one multi-client session: `plan.workers` concurrent single-query
/// workers. Bandwidth is the sum of every worker's bytes.
pub fn run_session(session_id: usize, plan: &BenchPlan, target: &Target, provider: &Provider) -> Result<SessionResult, BenchError> {
    plan.validate()?;
    let bytes = AtomicU64::new(0);
    let failures = AtomicUsize::new(0);
    let first_error: Mutex<Option<String>> = Mutex::new(None);
    let server_before = target.stats.snapshot();
    let (u0, s0, _) = process_usage();
    let start = Instant::now();
    std::thread::scope(|scope| {
        for _ in 0..plan.workers {
            scope.spawn(|| match exchange(plan, target, provider) {
                Ok(Exchange::Secure(out)) => {
                    bytes.fetch_add(out.bytes(), Ordering::Relaxed);
                }
                Ok(Exchange::Udp { bytes: b }) => {
                    bytes.fetch_add(b, Ordering::Relaxed);
                }
                Err(e) => {
                    failures.fetch_add(1, Ordering::Relaxed);
                    first_error.lock().unwrap_or_else(|p| p.into_inner()).get_or_insert(e.to_string());
                }
            });
        }
    });
    let elapsed = start.elapsed();
    let (u1, s1, rss) = process_usage();
    let server_after = target.stats.snapshot();
    let cpu_server = match (server_before, server_after) {
        (Some(a), Some(b)) if !elapsed.is_zero() => normalize_cpu_server(
            Duration::from_nanos(b.server_cpu_ns.saturating_sub(a.server_cpu_ns)),
            elapsed * plan.vcpus,
            plan.vcpus,
        )?,
        _ => 0.0,
    };
    let result = SessionResult {
        session_id,
        latency_ms: elapsed.as_secs_f64() * 1000.0,
        bandwidth_kb: kb(bytes.into_inner()),
        cpu_client: normalize_cpu_client(u1.saturating_sub(u0), s1.saturating_sub(s0), elapsed, plan.vcpus)?,
        cpu_server,
        mem: memory_percent(rss, plan.total_memory_mib),
        failures: failures.load(Ordering::Relaxed),
        workers: plan.workers,
    };
    if result.failures > 0 {
        return Err(BenchError::PartialFailure {
            session_id,
            failed: result.failures,
            total: plan.workers,
            result: Box::new(result),
        });
    }
    Ok(result)
}
