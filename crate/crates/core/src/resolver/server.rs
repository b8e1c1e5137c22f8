use std::fmt;
use std::io::{Read, Write};
use std::net::{IpAddr, Ipv4Addr, SocketAddr, TcpListener, TcpStream, UdpSocket};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::Duration;

use crossbeam_channel::{unbounded, Receiver};

use super::{Resolver, ResolverError};
use crate::channel::{accept, alert, Alert, ByteCounters, ChannelError, CountingStream, ServerConfig, ServerIdentity};
use crate::crypto::{AlgorithmId, Provider};
use crate::dns::{decode_message, encode_message, DnsMessage, Rcode};
use crate::policy::{
    fragmentation_guard, truncated_response, GuardDecision, PolicyMode, RateLimitConfig, RateLimiter,
    HANDSHAKE_COST, QUERY_COST,
};
use crate::transport::{decapsulate, encapsulate, Direction, DohFraming, TransportKind};

/// UDP payload assumed for queries without EDNS.
const CLASSIC_UDP_PAYLOAD: u16 = 512;

#[derive(Debug, Clone)]
pub struct ServeConfig {
    pub bind: IpAddr,
    /// `Some(0)` picks an ephemeral port; `None` disables the listener.
    pub dot_port: Option<u16>,
    pub doh_port: Option<u16>,
    pub udp_port: Option<u16>,
    /// Plain-text counter dump, one `key value` line per counter.
    pub stats_port: Option<u16>,
    pub kems: Vec<AlgorithmId>,
    pub identity: ServerIdentity,
    pub policy: PolicyMode,
    pub workers: usize,
    pub rate_limit: Option<RateLimitConfig>,
    pub doh: DohFraming,
    pub io_timeout: Duration,
}

impl ServeConfig {
    /// Loopback DoT and DoH on ephemeral ports.
    pub fn loopback(kems: Vec<AlgorithmId>, identity: ServerIdentity) -> Self {
        Self {
            bind: IpAddr::V4(Ipv4Addr::LOCALHOST),
            dot_port: Some(0),
            doh_port: Some(0),
            udp_port: None,
            stats_port: None,
            kems,
            identity,
            policy: PolicyMode::AllowLegacy,
            workers: 4,
            rate_limit: None,
            doh: DohFraming::default(),
            io_timeout: Duration::from_secs(30),
        }
    }
}

/// Live counters, updated by the workers.
#[derive(Debug, Default)]
pub struct ServerStats {
    pub sessions: AtomicU64,
    pub handshake_failures: AtomicU64,
    pub downgrade_rejections: AtomicU64,
    pub no_common_suite: AtomicU64,
    pub rate_limited: AtomicU64,
    /// DNS messages seen, queries and responses both.
    pub dns_messages: AtomicU64,
    pub bytes_in: AtomicU64,
    pub bytes_out: AtomicU64,
    pub udp_truncated: AtomicU64,
    /// CPU time consumed by worker threads.
    pub server_cpu_ns: AtomicU64,
    /// Connections and datagrams fully handled, CPU time included.
    pub completed: AtomicU64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StatsSnapshot {
    pub sessions: u64,
    pub handshake_failures: u64,
    pub downgrade_rejections: u64,
    pub no_common_suite: u64,
    pub rate_limited: u64,
    pub dns_messages: u64,
    pub bytes_in: u64,
    pub bytes_out: u64,
    pub udp_truncated: u64,
    pub server_cpu_ns: u64,
    pub completed: u64,
}

impl ServerStats {
    pub fn snapshot(&self) -> StatsSnapshot {
        let l = |a: &AtomicU64| a.load(Ordering::Relaxed);
        StatsSnapshot {
            sessions: l(&self.sessions),
            handshake_failures: l(&self.handshake_failures),
            downgrade_rejections: l(&self.downgrade_rejections),
            no_common_suite: l(&self.no_common_suite),
            rate_limited: l(&self.rate_limited),
            dns_messages: l(&self.dns_messages),
            bytes_in: l(&self.bytes_in),
            bytes_out: l(&self.bytes_out),
            udp_truncated: l(&self.udp_truncated),
            server_cpu_ns: l(&self.server_cpu_ns),
            completed: l(&self.completed),
        }
    }

    fn bump(counter: &AtomicU64, n: u64) {
        counter.fetch_add(n, Ordering::Relaxed);
    }
}

impl StatsSnapshot {
    fn fields(&self) -> [(&'static str, u64); 11] {
        [
            ("sessions", self.sessions),
            ("handshake_failures", self.handshake_failures),
            ("downgrade_rejections", self.downgrade_rejections),
            ("no_common_suite", self.no_common_suite),
            ("rate_limited", self.rate_limited),
            ("dns_messages", self.dns_messages),
            ("bytes_in", self.bytes_in),
            ("bytes_out", self.bytes_out),
            ("udp_truncated", self.udp_truncated),
            ("server_cpu_ns", self.server_cpu_ns),
            ("completed", self.completed),
        ]
    }

    /// Parses the text form written by the stats endpoint. Unknown keys are
    /// ignored.
    pub fn parse(text: &str) -> Result<Self, ResolverError> {
        let mut s = Self::default();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let (k, v) = line
                .split_once(' ')
                .ok_or_else(|| ResolverError::BadResponse(format!("stats line `{line}`")))?;
            let v: u64 = v.trim().parse().map_err(|_| ResolverError::BadResponse(format!("stats value `{v}`")))?;
            let slot = match k {
                "sessions" => &mut s.sessions,
                "handshake_failures" => &mut s.handshake_failures,
                "downgrade_rejections" => &mut s.downgrade_rejections,
                "no_common_suite" => &mut s.no_common_suite,
                "rate_limited" => &mut s.rate_limited,
                "dns_messages" => &mut s.dns_messages,
                "bytes_in" => &mut s.bytes_in,
                "bytes_out" => &mut s.bytes_out,
                "udp_truncated" => &mut s.udp_truncated,
                "server_cpu_ns" => &mut s.server_cpu_ns,
                "completed" => &mut s.completed,
                _ => continue,
            };
            *slot = v;
        }
        Ok(s)
    }

    /// Reads a snapshot from a stats endpoint.
    pub fn fetch(addr: SocketAddr, timeout: Duration) -> Result<Self, ResolverError> {
        let io = |e: std::io::Error| ResolverError::Io(format!("stats {addr}: {e}"));
        let mut s = TcpStream::connect_timeout(&addr, timeout).map_err(io)?;
        s.set_read_timeout(Some(timeout)).map_err(io)?;
        let mut text = String::new();
        s.read_to_string(&mut text).map_err(io)?;
        Self::parse(&text)
    }
}

impl fmt::Display for StatsSnapshot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in self.fields() {
            writeln!(f, "{k} {v}")?;
        }
        Ok(())
    }
}

/// CPU time of the calling thread.
pub(crate) fn thread_cpu_time() -> Duration {
    // SAFETY: getrusage only writes into the zeroed struct we pass.
    let mut ru: libc::rusage = unsafe { std::mem::zeroed() };
    let rc = unsafe { libc::getrusage(libc::RUSAGE_THREAD, &mut ru) };
    if rc != 0 {
        return Duration::ZERO;
    }
    let tv = |t: libc::timeval| Duration::new(t.tv_sec as u64, t.tv_usec as u32 * 1000);
    tv(ru.ru_utime) + tv(ru.ru_stime)
}

struct Job {
    stream: TcpStream,
    peer: SocketAddr,
    kind: TransportKind,
}

struct Shared {
    resolver: Arc<Resolver>,
    provider: Arc<Provider>,
    config: ServeConfig,
    stats: Arc<ServerStats>,
    limiter: Option<RateLimiter>,
    shutdown: AtomicBool,
}

/// A server started by [`serve`]. Dropping it without calling
/// [`RunningServer::shutdown`] leaves the threads running.
pub struct RunningServer {
    pub dot: Option<SocketAddr>,
    pub doh: Option<SocketAddr>,
    pub udp: Option<SocketAddr>,
    pub stats_addr: Option<SocketAddr>,
    shared: Arc<Shared>,
    threads: Vec<JoinHandle<()>>,
}

impl RunningServer {
    pub fn stats(&self) -> Arc<ServerStats> {
        Arc::clone(&self.shared.stats)
    }

    pub fn snapshot(&self) -> StatsSnapshot {
        self.shared.stats.snapshot()
    }

    pub fn addr(&self, kind: TransportKind) -> Option<SocketAddr> {
        match kind {
            TransportKind::Dot => self.dot,
            TransportKind::Doh => self.doh,
            TransportKind::UdpPlain => self.udp,
        }
    }

    /// Stops accepting, finishes queued sessions and joins every thread.
    pub fn shutdown(self) -> StatsSnapshot {
        self.shared.shutdown.store(true, Ordering::SeqCst);
        for addr in [self.dot, self.doh, self.stats_addr].into_iter().flatten() {
            // Wake the blocking accept().
            let _ = TcpStream::connect_timeout(&addr, Duration::from_secs(1));
        }
        for t in self.threads {
            let _ = t.join();
        }
        self.shared.stats.snapshot()
    }
}

fn bind_tcp(ip: IpAddr, port: u16) -> Result<TcpListener, ResolverError> {
    let addr = SocketAddr::new(ip, port);
    TcpListener::bind(addr).map_err(|e| ResolverError::BindFailure { addr, reason: e.to_string() })
}

/// Starts listeners and the worker pool.
pub fn serve(resolver: Arc<Resolver>, provider: Arc<Provider>, config: ServeConfig) -> Result<RunningServer, ResolverError> {
    let dot = config.dot_port.map(|p| bind_tcp(config.bind, p)).transpose()?;
    let doh = config.doh_port.map(|p| bind_tcp(config.bind, p)).transpose()?;
    let stats_listener = config.stats_port.map(|p| bind_tcp(config.bind, p)).transpose()?;
    let udp = match config.udp_port {
        Some(p) => {
            let addr = SocketAddr::new(config.bind, p);
            let s = UdpSocket::bind(addr).map_err(|e| ResolverError::BindFailure { addr, reason: e.to_string() })?;
            s.set_read_timeout(Some(Duration::from_millis(100)))
                .map_err(|e| ResolverError::Io(e.to_string()))?;
            Some(s)
        }
        None => None,
    };
    let local = |l: &Option<TcpListener>| l.as_ref().and_then(|l| l.local_addr().ok());
    let (dot_addr, doh_addr, stats_addr) = (local(&dot), local(&doh), local(&stats_listener));
    let udp_addr = udp.as_ref().and_then(|s| s.local_addr().ok());

    let workers = config.workers.max(1);
    let shared = Arc::new(Shared {
        resolver,
        provider,
        limiter: config.rate_limit.map(RateLimiter::new),
        config,
        stats: Arc::new(ServerStats::default()),
        shutdown: AtomicBool::new(false),
    });
    let (tx, rx) = unbounded::<Job>();
    let mut threads = Vec::new();
    for (listener, kind) in [(dot, TransportKind::Dot), (doh, TransportKind::Doh)] {
        let Some(listener) = listener else { continue };
        let tx = tx.clone();
        let shared = Arc::clone(&shared);
        threads.push(thread::spawn(move || {
            for conn in listener.incoming() {
                if shared.shutdown.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(stream) = conn else { continue };
                let Ok(peer) = stream.peer_addr() else { continue };
                if tx.send(Job { stream, peer, kind }).is_err() {
                    break;
                }
            }
        }));
    }
    drop(tx);
    for _ in 0..workers {
        let rx: Receiver<Job> = rx.clone();
        let shared = Arc::clone(&shared);
        threads.push(thread::spawn(move || {
            for job in rx.iter() {
                let before = thread_cpu_time();
                handle_session(&shared, job);
                let spent = thread_cpu_time().saturating_sub(before);
                ServerStats::bump(&shared.stats.server_cpu_ns, spent.as_nanos() as u64);
                ServerStats::bump(&shared.stats.completed, 1);
            }
        }));
    }
    if let Some(socket) = udp {
        let shared = Arc::clone(&shared);
        threads.push(thread::spawn(move || udp_loop(&shared, &socket)));
    }
    if let Some(listener) = stats_listener {
        let shared = Arc::clone(&shared);
        threads.push(thread::spawn(move || {
            for conn in listener.incoming() {
                if shared.shutdown.load(Ordering::SeqCst) {
                    break;
                }
                if let Ok(mut s) = conn {
                    let _ = s.write_all(shared.stats.snapshot().to_string().as_bytes());
                }
            }
        }));
    }
    Ok(RunningServer { dot: dot_addr, doh: doh_addr, udp: udp_addr, stats_addr, shared, threads })
}

fn servfail(query: &DnsMessage) -> DnsMessage {
    let mut r = DnsMessage::response_to(query);
    r.flags.rcode = Rcode::ServFail;
    r
}

/// Resolves one wire-format query. `None` when the bytes are not a DNS
/// message at all.
fn answer(shared: &Shared, query_bytes: &[u8]) -> Option<(DnsMessage, Vec<u8>)> {
    let query = decode_message(query_bytes).ok()?;
    let (response, _) = shared.resolver.resolve(&query);
    match encode_message(&response) {
        Ok(bytes) => Some((response, bytes)),
        Err(_) => {
            let r = servfail(&query);
            let bytes = encode_message(&r).ok()?;
            Some((r, bytes))
        }
    }
}

fn handle_session(shared: &Shared, job: Job) {
    let stats = &shared.stats;
    let Job { stream, peer, kind } = job;
    let _ = stream.set_read_timeout(Some(shared.config.io_timeout));
    let _ = stream.set_write_timeout(Some(shared.config.io_timeout));
    let _ = stream.set_nodelay(true);
    let counters = Arc::new(ByteCounters::default());
    let mut io = CountingStream::new(stream, Arc::clone(&counters));
    let account = |c: &ByteCounters| {
        ServerStats::bump(&stats.bytes_in, c.received.load(Ordering::Relaxed));
        ServerStats::bump(&stats.bytes_out, c.sent.load(Ordering::Relaxed));
    };
    if let Some(limiter) = &shared.limiter {
        if !limiter.check(peer, HANDSHAKE_COST).is_allowed() {
            ServerStats::bump(&stats.rate_limited, 1);
            let _ = io.write_all(&Alert::fatal(alert::TOO_MANY_REQUESTS).record());
            account(&counters);
            return;
        }
    }
    let cfg = ServerConfig {
        kems: shared.config.kems.clone(),
        identity: shared.config.identity.clone(),
        policy: shared.config.policy,
    };
    let mut secure = match accept(io, &shared.provider, cfg) {
        Ok((s, _)) => s,
        Err(e) => {
            ServerStats::bump(&stats.handshake_failures, 1);
            match e {
                ChannelError::DowngradeRejected(_) => ServerStats::bump(&stats.downgrade_rejections, 1),
                ChannelError::NoCommonSuite => ServerStats::bump(&stats.no_common_suite, 1),
                _ => {}
            }
            log::debug!("handshake with {peer} failed: {e}");
            account(&counters);
            return;
        }
    };
    ServerStats::bump(&stats.sessions, 1);
    while let Ok(Some(framed)) = secure.recv() {
        if let Some(limiter) = &shared.limiter {
            if !limiter.check(peer, QUERY_COST).is_allowed() {
                ServerStats::bump(&stats.rate_limited, 1);
                break;
            }
        }
        let Ok(query_bytes) = decapsulate(kind, &framed) else { break };
        ServerStats::bump(&stats.dns_messages, 1);
        let Some((response, mut bytes)) = answer(shared, &query_bytes) else { break };
        match fragmentation_guard(bytes.len(), kind, u16::MAX) {
            GuardDecision::Pass => {}
            GuardDecision::TruncateAndFlag => match truncated_response(&response, u16::MAX) {
                Ok(b) => bytes = b,
                Err(_) => break,
            },
            GuardDecision::Reject => match encode_message(&servfail(&response)) {
                Ok(b) => bytes = b,
                Err(_) => break,
            },
        }
        let Ok(out) = encapsulate(kind, &shared.config.doh, &bytes, Direction::Response) else { break };
        if secure.send(&out).is_err() {
            break;
        }
        ServerStats::bump(&stats.dns_messages, 1);
    }
    secure.close();
    account(&counters);
}

fn udp_loop(shared: &Shared, socket: &UdpSocket) {
    let stats = &shared.stats;
    let mut buf = vec![0u8; 65535];
    while !shared.shutdown.load(Ordering::SeqCst) {
        let (n, peer) = match socket.recv_from(&mut buf) {
            Ok(r) => r,
            Err(_) => continue,
        };
        let before = thread_cpu_time();
        ServerStats::bump(&stats.bytes_in, n as u64);
        if let Some(limiter) = &shared.limiter {
            if !limiter.check(peer, QUERY_COST).is_allowed() {
                ServerStats::bump(&stats.rate_limited, 1);
                continue;
            }
        }
        let Some((response, mut bytes)) = answer(shared, &buf[..n]) else { continue };
        ServerStats::bump(&stats.dns_messages, 1);
        let advertised = decode_message(&buf[..n])
            .ok()
            .and_then(|q| q.edns.map(|e| e.udp_payload.max(CLASSIC_UDP_PAYLOAD)))
            .unwrap_or(CLASSIC_UDP_PAYLOAD);
        match fragmentation_guard(bytes.len(), TransportKind::UdpPlain, advertised) {
            GuardDecision::Pass => {}
            GuardDecision::TruncateAndFlag => match truncated_response(&response, advertised) {
                Ok(b) => {
                    bytes = b;
                    ServerStats::bump(&stats.udp_truncated, 1);
                }
                Err(_) => continue,
            },
            GuardDecision::Reject => continue,
        }
        if socket.send_to(&bytes, peer).is_ok() {
            ServerStats::bump(&stats.dns_messages, 1);
            ServerStats::bump(&stats.bytes_out, bytes.len() as u64);
        }
        let spent = thread_cpu_time().saturating_sub(before);
        ServerStats::bump(&stats.server_cpu_ns, spent.as_nanos() as u64);
        ServerStats::bump(&stats.completed, 1);
    }
}
