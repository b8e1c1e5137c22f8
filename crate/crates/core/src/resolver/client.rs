use std::net::{SocketAddr, TcpStream, UdpSocket};
use std::sync::Arc;
use std::time::{Duration, Instant};

use super::ResolverError;
use crate::channel::{connect, ByteCounters, ClientConfig, CountingStream, HandshakeTranscript, PhaseTimings};
use crate::crypto::{AlgorithmSuite, Provider};
use crate::dns::{decode_message, encode_message, DnsMessage};
use crate::transport::{decapsulate, encapsulate, Direction, DohFraming, TransportKind};

/// One secure session: handshake, queries, close.
#[derive(Debug, Clone)]
pub struct QueryOutcome {
    pub responses: Vec<DnsMessage>,
    pub suite: AlgorithmSuite,
    /// Client-side phases including `t_term`.
    pub timings: PhaseTimings,
    pub bytes_sent: u64,
    pub bytes_received: u64,
    /// Connect through close.
    pub latency: Duration,
    pub transcript: HandshakeTranscript,
    /// The server vanished instead of answering close_notify.
    pub reset: bool,
}

impl QueryOutcome {
    pub fn bytes(&self) -> u64 {
        self.bytes_sent + self.bytes_received
    }

    pub fn response(&self) -> &DnsMessage {
        &self.responses[0]
    }
}

/// Opens a fresh connection, runs the handshake, sends each query in turn
/// and closes the session.
pub fn query_session(
    addr: SocketAddr,
    kind: TransportKind,
    provider: &Provider,
    config: ClientConfig,
    doh: &DohFraming,
    queries: &[DnsMessage],
    timeout: Duration,
) -> Result<QueryOutcome, ResolverError> {
    if !kind.is_secure() {
        return Err(ResolverError::BadResponse(format!("{kind} has no secure session")));
    }
    let started = Instant::now();
    let stream = TcpStream::connect_timeout(&addr, timeout)
        .map_err(|e| ResolverError::Io(format!("connect {addr}: {e}")))?;
    stream.set_read_timeout(Some(timeout)).map_err(|e| ResolverError::Io(e.to_string()))?;
    stream.set_write_timeout(Some(timeout)).map_err(|e| ResolverError::Io(e.to_string()))?;
    let _ = stream.set_nodelay(true);
    let counters = Arc::new(ByteCounters::default());
    let io = CountingStream::new(stream, Arc::clone(&counters));
    let (mut secure, est, mut timings) = connect(io, provider, config)?;
    let mut responses = Vec::with_capacity(queries.len());
    for q in queries {
        let wire = encode_message(q)?;
        secure.send(&encapsulate(kind, doh, &wire, Direction::Request)?)?;
        let framed = secure
            .recv()?
            .ok_or_else(|| ResolverError::BadResponse("session closed before the response".into()))?;
        let body = decapsulate(kind, &framed)?;
        let response = decode_message(&body)?;
        if response.id != q.id {
            return Err(ResolverError::BadResponse(format!("id {} for query {}", response.id, q.id)));
        }
        responses.push(response);
    }
    let reset = secure.close_into(&mut timings).reset;
    let latency = started.elapsed();
    let c = secure.get_ref().counters();
    Ok(QueryOutcome {
        responses,
        suite: est.suite,
        timings,
        bytes_sent: c.sent.load(std::sync::atomic::Ordering::Relaxed),
        bytes_received: c.received.load(std::sync::atomic::Ordering::Relaxed),
        latency,
        transcript: est.transcript,
        reset,
    })
}

/// One query over a fresh session.
pub fn query_once(
    addr: SocketAddr,
    kind: TransportKind,
    provider: &Provider,
    config: ClientConfig,
    doh: &DohFraming,
    query: &DnsMessage,
    timeout: Duration,
) -> Result<QueryOutcome, ResolverError> {
    query_session(addr, kind, provider, config, doh, std::slice::from_ref(query), timeout)
}

/// Plain UDP exchange. Returns the response and its size on the wire.
pub fn query_udp(addr: SocketAddr, query: &DnsMessage, timeout: Duration) -> Result<(DnsMessage, usize), ResolverError> {
    let io = |e: std::io::Error| ResolverError::Io(format!("udp {addr}: {e}"));
    let bind: SocketAddr = if addr.is_ipv4() { "0.0.0.0:0" } else { "[::]:0" }.parse().expect("literal");
    let socket = UdpSocket::bind(bind).map_err(io)?;
    socket.set_read_timeout(Some(timeout)).map_err(io)?;
    socket.send_to(&encode_message(query)?, addr).map_err(io)?;
    let mut buf = vec![0u8; 65535];
    loop {
        let (n, from) = socket.recv_from(&mut buf).map_err(io)?;
        if from != addr {
            continue;
        }
        let r = decode_message(&buf[..n])?;
        if r.id == query.id {
            return Ok((r, n));
        }
    }
}
