//! Single-client (fresh handshake per query) and multi-client session
//! benchmarks, metric normalization and CSV output.

mod csv_out;
mod run;
mod tables;

use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::TrustStore;
use crate::crypto::{AlgorithmSuite, CryptoError};
use crate::dns::{RecordType, DEFAULT_EDNS_PAYLOAD};
use crate::policy::PolicyMode;
use crate::resolver::{ResolverError, ServerStats, StatsSnapshot};
use crate::transport::{DohFraming, TransportKind};

pub use csv_out::{
    read_comparison, read_samples, summarize, write_comparison, write_samples, write_sessions, ComparisonRow, CsvMeta, Summary,
};
pub use run::{run_benchmark, run_session, start_server, BenchReport, ServerSpec};
pub use tables::{table, table_names, TableRow, TableSpec};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("elapsed time is zero")]
    ZeroElapsed,
    #[error("system CPU delta is zero")]
    ZeroSystemDelta,
    #[error("results file has no data rows")]
    EmptyCsv,
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error("resolver unreachable: {0}")]
    ResolverUnreachable(String),
    #[error("{failed} of {total} handshakes failed; first error: {first}")]
    HandshakeFailure { failed: usize, total: usize, first: String },
    #[error("{failed} of {total} workers failed in session {session_id}")]
    PartialFailure { session_id: usize, failed: usize, total: usize, result: Box<SessionResult> },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Resolver(#[from] ResolverError),
    #[error(transparent)]
    Crypto(#[from] CryptoError),
}

/// ((user + system) / elapsed · 100) / vcpus.
pub fn normalize_cpu_client(user: Duration, system: Duration, elapsed: Duration, vcpus: u32) -> Result<f64, BenchError> {
    if elapsed.is_zero() {
        return Err(BenchError::ZeroElapsed);
    }
    let busy = (user + system).as_secs_f64();
    Ok(busy / elapsed.as_secs_f64() * 100.0 / f64::from(vcpus.max(1)))
}

/// container / system · vcpus · 100, divided again by vcpus.
pub fn normalize_cpu_server(container_delta: Duration, system_delta: Duration, vcpus: u32) -> Result<f64, BenchError> {
    if system_delta.is_zero() {
        return Err(BenchError::ZeroSystemDelta);
    }
    let v = f64::from(vcpus.max(1));
    Ok(container_delta.as_secs_f64() / system_delta.as_secs_f64() * v * 100.0 / v)
}

/// (peak_rss_kb / 1024) / total_memory_mib · 100.
pub fn memory_percent(peak_rss_kb: u64, total_memory_mib: f64) -> f64 {
    if total_memory_mib <= 0.0 {
        return 0.0;
    }
    (peak_rss_kb as f64 / 1024.0) / total_memory_mib * 100.0
}

/// Bytes to the kB unit used in every CSV (1 kB = 1024 bytes).
pub fn kb(bytes: u64) -> f64 {
    bytes as f64 / 1024.0
}

/// User and system CPU time plus peak RSS (kB) of this process.
pub fn process_usage() -> (Duration, Duration, u64) {
    // SAFETY: getrusage only writes into the zeroed struct we pass.
    let mut ru: libc::rusage = unsafe { std::mem::zeroed() };
    if unsafe { libc::getrusage(libc::RUSAGE_SELF, &mut ru) } != 0 {
        return (Duration::ZERO, Duration::ZERO, 0);
    }
    let tv = |t: libc::timeval| Duration::new(t.tv_sec as u64, t.tv_usec as u32 * 1000);
    (tv(ru.ru_utime), tv(ru.ru_stime), ru.ru_maxrss.max(0) as u64)
}

pub fn available_vcpus() -> u32 {
    std::thread::available_parallelism().map(|n| n.get() as u32).unwrap_or(1)
}

/// MemTotal from /proc/meminfo in MiB; 1024 when unavailable.
pub fn total_memory_mib() -> f64 {
    std::fs::read_to_string("/proc/meminfo")
        .ok()
        .and_then(|s| {
            s.lines()
                .find_map(|l| l.strip_prefix("MemTotal:"))
                .and_then(|v| v.trim().trim_end_matches("kB").trim().parse::<f64>().ok())
        })
        .map(|kb| kb / 1024.0)
        .unwrap_or(1024.0)
}

#[derive(Debug, Clone)]
pub struct BenchPlan {
    pub suite: AlgorithmSuite,
    pub transport: TransportKind,
    pub dnssec: bool,
    pub domain: String,
    pub qtype: RecordType,
    pub queries: usize,
    pub workers: usize,
    pub sessions: usize,
    pub vcpus: u32,
    pub total_memory_mib: f64,
    /// Policy the client declares in its hello.
    pub policy: PolicyMode,
    /// EDNS payload advertised on UdpPlain queries.
    pub udp_payload: u16,
    pub timeout: Duration,
}

impl BenchPlan {
    pub fn new(suite: AlgorithmSuite, transport: TransportKind) -> Self {
        Self {
            suite,
            transport,
            dnssec: false,
            domain: "example.com".into(),
            qtype: RecordType::A,
            queries: 100,
            workers: 1,
            sessions: 1,
            vcpus: available_vcpus(),
            total_memory_mib: total_memory_mib(),
            policy: PolicyMode::AllowLegacy,
            udp_payload: DEFAULT_EDNS_PAYLOAD,
            timeout: Duration::from_secs(60),
        }
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: &str| Err(BenchError::InvalidPlan(m.into()));
        if self.queries == 0 {
            return bad("query count must be at least 1");
        }
        if self.workers == 0 {
            return bad("workers must be at least 1");
        }
        if self.vcpus == 0 {
            return bad("vcpus must be at least 1");
        }
        if self.total_memory_mib <= 0.0 {
            return bad("total memory must be positive");
        }
        Ok(())
    }
}

/// One per-query row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerfSample {
    #[serde(rename = "timestamp")]
    pub t: f64,
    #[serde(rename = "latency_ms")]
    pub latency_ms: f64,
    #[serde(rename = "bandwidth_kb")]
    pub bandwidth_kb: f64,
    #[serde(rename = "cpu_client_pct")]
    pub cpu_client: f64,
    #[serde(rename = "cpu_server_pct")]
    pub cpu_server: f64,
    #[serde(rename = "mem_pct")]
    pub mem: f64,
}

impl PerfSample {
    pub const ZERO: PerfSample = PerfSample { t: 0.0, latency_ms: 0.0, bandwidth_kb: 0.0, cpu_client: 0.0, cpu_server: 0.0, mem: 0.0 };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionResult {
    pub session_id: usize,
    pub latency_ms: f64,
    pub bandwidth_kb: f64,
    #[serde(skip)]
    pub cpu_client: f64,
    #[serde(skip)]
    pub cpu_server: f64,
    #[serde(skip)]
    pub mem: f64,
    #[serde(skip)]
    pub failures: usize,
    #[serde(skip)]
    pub workers: usize,
}

/// Where server CPU counters come from.
#[derive(Debug, Clone)]
pub enum StatsSource {
    Local(Arc<ServerStats>),
    Remote(SocketAddr),
    None,
}

impl StatsSource {
    pub fn snapshot(&self) -> Option<StatsSnapshot> {
        match self {
            StatsSource::Local(s) => Some(s.snapshot()),
            StatsSource::Remote(a) => StatsSnapshot::fetch(*a, Duration::from_secs(5)).ok(),
            StatsSource::None => None,
        }
    }
}

/// A running resolver as seen by the harness.
#[derive(Debug, Clone)]
pub struct Target {
    pub dot: Option<SocketAddr>,
    pub doh: Option<SocketAddr>,
    pub udp: Option<SocketAddr>,
    pub trust: TrustStore,
    pub server_name: String,
    pub doh_framing: DohFraming,
    pub stats: StatsSource,
}

impl Target {
    pub fn addr(&self, kind: TransportKind) -> Option<SocketAddr> {
        match kind {
            TransportKind::Dot => self.dot,
            TransportKind::Doh => self.doh,
            TransportKind::UdpPlain => self.udp,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn client_cpu_formula() {
        let e = Duration::from_millis(1000);
        assert!((normalize_cpu_client(e.mul_f64(0.8), Duration::ZERO, e, 16).unwrap() - 5.0).abs() < 1e-9);
        assert_eq!(normalize_cpu_client(Duration::ZERO, Duration::ZERO, e, 4).unwrap(), 0.0);
        assert!(matches!(normalize_cpu_client(e, e, Duration::ZERO, 4), Err(BenchError::ZeroElapsed)));
    }

    #[test]
    fn server_cpu_formula() {
        let sys = Duration::from_secs(16);
        assert!((normalize_cpu_server(Duration::from_secs(1), sys, 16).unwrap() - 6.25).abs() < 1e-9);
        assert_eq!(normalize_cpu_server(Duration::ZERO, sys, 16).unwrap(), 0.0);
        assert!(matches!(normalize_cpu_server(sys, Duration::ZERO, 16), Err(BenchError::ZeroSystemDelta)));
    }

    #[test]
    fn memory_formula() {
        let m = memory_percent(11_264, 7810.3);
        assert!((0.140..=0.142).contains(&m), "{m}");
        assert_eq!(memory_percent(0, 7810.3), 0.0);
        assert!((memory_percent(1024, 1.0) - 100.0).abs() < 1e-12);
    }

    #[test]
    fn plan_validation() {
        let suite = AlgorithmSuite::from_names("mlkem512", "mldsa44").unwrap();
        let mut p = BenchPlan::new(suite, TransportKind::Dot);
        p.validate().unwrap();
        p.queries = 0;
        assert!(matches!(p.validate(), Err(BenchError::InvalidPlan(_))));
    }

    #[test]
    fn host_probes_are_sane() {
        assert!(available_vcpus() >= 1);
        assert!(total_memory_mib() > 0.0);
        let (u, s, rss) = process_usage();
        assert!(u + s > Duration::ZERO || rss > 0);
    }
}
