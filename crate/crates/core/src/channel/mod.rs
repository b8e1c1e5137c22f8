//! TLS-1.3-shaped secure channel: one round trip, server authentication
//! only, parameterised by a KEM and a signature algorithm.

mod cert;
mod codec;
mod handshake;
mod keyschedule;
mod messages;
mod record;
mod session;

use std::fmt;
use std::io;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use thiserror::Error;

use crate::crypto::{AlgorithmSuite, CryptoError, Provider};

pub use cert::{Certificate, CertificateAuthority, ServerIdentity, TrustStore, TrustedIssuer, DEFAULT_CA_NAME};
pub use handshake::{select_parameters, ClientConfig, ClientHandshake, Established, ServerConfig, ServerHandshake};
pub use keyschedule::{SessionKeys, TrafficKeys};
pub use messages::{ClientHello, HandshakeMessage, HandshakeType, KeyShare, ServerHello, PROTOCOL_VERSION};
pub use record::{
    read_record, ContentType, RecordOpener, RecordProtector, AEAD_NAME, PROTECTED_OVERHEAD, RECORD_HEADER,
};
pub use session::{accept, connect, ByteCounters, CloseReport, CountingStream, Incoming, Role, SecureSession, SecureStream};

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("empty algorithm offer")]
    EmptyOffer,
    #[error("downgrade rejected: {0}")]
    DowngradeRejected(String),
    #[error("no common suite")]
    NoCommonSuite,
    #[error("signature invalid: {0}")]
    SignatureInvalid(String),
    #[error("key encapsulation failed: {0}")]
    KemFailure(String),
    #[error("timed out")]
    Timeout,
    #[error("record authentication failed")]
    AuthFailure,
    #[error("replayed record")]
    ReplayDetected,
    #[error("Finished verification failed")]
    FinishedMismatch,
    #[error("unexpected message: {0}")]
    UnexpectedMessage(String),
    #[error("decode error: {0}")]
    Decode(String),
    #[error("record payload of {0} bytes is too large")]
    RecordOverflow(usize),
    #[error("peer sent alert {0}")]
    PeerAlert(u8),
    #[error("rate limited by server")]
    Throttled,
    #[error("session closed")]
    Closed,
    #[error(transparent)]
    Crypto(#[from] CryptoError),
    #[error("i/o error: {0}")]
    Io(io::Error),
}

impl From<io::Error> for ChannelError {
    fn from(e: io::Error) -> Self {
        match e.kind() {
            io::ErrorKind::TimedOut | io::ErrorKind::WouldBlock => ChannelError::Timeout,
            _ => ChannelError::Io(e),
        }
    }
}

/// Alert descriptions used on the wire.
pub mod alert {
    pub const CLOSE_NOTIFY: u8 = 0;
    pub const UNEXPECTED_MESSAGE: u8 = 10;
    pub const BAD_RECORD_MAC: u8 = 20;
    pub const HANDSHAKE_FAILURE: u8 = 40;
    pub const BAD_CERTIFICATE: u8 = 42;
    pub const DECODE_ERROR: u8 = 50;
    pub const DECRYPT_ERROR: u8 = 51;
    pub const INSUFFICIENT_SECURITY: u8 = 71;
    pub const INTERNAL_ERROR: u8 = 80;
    pub const TOO_MANY_REQUESTS: u8 = 120;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Alert {
    pub fatal: bool,
    pub description: u8,
}

impl Alert {
    pub fn fatal(description: u8) -> Self {
        Self { fatal: true, description }
    }

    pub fn encode(self) -> [u8; 2] {
        [if self.fatal { 2 } else { 1 }, self.description]
    }

    pub fn decode(b: &[u8]) -> Result<Self, ChannelError> {
        match b {
            [level @ (1 | 2), d] => Ok(Self { fatal: *level == 2, description: *d }),
            _ => Err(ChannelError::Decode("malformed alert".into())),
        }
    }

    /// Plaintext alert record.
    pub fn record(self) -> Vec<u8> {
        record::encode_plain(ContentType::Alert, &self.encode()).expect("two bytes")
    }

    pub fn for_error(e: &ChannelError) -> Option<Self> {
        use alert::*;
        let d = match e {
            ChannelError::DowngradeRejected(_) => INSUFFICIENT_SECURITY,
            ChannelError::NoCommonSuite | ChannelError::EmptyOffer => HANDSHAKE_FAILURE,
            ChannelError::SignatureInvalid(_) => BAD_CERTIFICATE,
            ChannelError::Decode(_) => DECODE_ERROR,
            ChannelError::AuthFailure | ChannelError::FinishedMismatch => DECRYPT_ERROR,
            ChannelError::ReplayDetected => BAD_RECORD_MAC,
            ChannelError::UnexpectedMessage(_) => UNEXPECTED_MESSAGE,
            ChannelError::Throttled => TOO_MANY_REQUESTS,
            // The peer already knows, or the transport is gone.
            ChannelError::PeerAlert(_) | ChannelError::Io(_) | ChannelError::Timeout | ChannelError::Closed => {
                return None
            }
            _ => INTERNAL_ERROR,
        };
        Some(Self::fatal(d))
    }

    pub fn into_error(self) -> ChannelError {
        use alert::*;
        match self.description {
            INSUFFICIENT_SECURITY => ChannelError::DowngradeRejected("peer requires stronger algorithms".into()),
            HANDSHAKE_FAILURE => ChannelError::NoCommonSuite,
            TOO_MANY_REQUESTS => ChannelError::Throttled,
            CLOSE_NOTIFY => ChannelError::Closed,
            d => ChannelError::PeerAlert(d),
        }
    }
}

pub fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Ch,
    Sh,
    Kem,
    Sig,
    Kdf,
    Fin,
    Term,
}

/// Per-phase handshake durations.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct PhaseTimings {
    pub t_ch: Duration,
    pub t_sh: Duration,
    pub t_kem: Duration,
    pub t_sig: Duration,
    pub t_kdf: Duration,
    pub t_fin: Duration,
    pub t_term: Duration,
}

impl PhaseTimings {
    pub fn total(&self) -> Duration {
        self.t_ch + self.t_sh + self.t_kem + self.t_sig + self.t_kdf + self.t_fin + self.t_term
    }

    /// Total without session termination.
    pub fn establishment(&self) -> Duration {
        self.total() - self.t_term
    }

    pub fn get(&self, phase: Phase) -> Duration {
        match phase {
            Phase::Ch => self.t_ch,
            Phase::Sh => self.t_sh,
            Phase::Kem => self.t_kem,
            Phase::Sig => self.t_sig,
            Phase::Kdf => self.t_kdf,
            Phase::Fin => self.t_fin,
            Phase::Term => self.t_term,
        }
    }

    fn slot(&mut self, phase: Phase) -> &mut Duration {
        match phase {
            Phase::Ch => &mut self.t_ch,
            Phase::Sh => &mut self.t_sh,
            Phase::Kem => &mut self.t_kem,
            Phase::Sig => &mut self.t_sig,
            Phase::Kdf => &mut self.t_kdf,
            Phase::Fin => &mut self.t_fin,
            Phase::Term => &mut self.t_term,
        }
    }

    pub fn add(&mut self, phase: Phase, d: Duration) {
        *self.slot(phase) += d;
    }
}

/// Contiguous lap timer: each lap charges the time since the previous stamp
/// to one phase, so the phases always sum to the elapsed time.
#[derive(Debug, Clone)]
pub struct PhaseTimer {
    started: Instant,
    last: Instant,
    timings: PhaseTimings,
}

impl Default for PhaseTimer {
    fn default() -> Self {
        Self::new()
    }
}

impl PhaseTimer {
    pub fn new() -> Self {
        let now = Instant::now();
        Self { started: now, last: now, timings: PhaseTimings::default() }
    }

    pub fn lap(&mut self, phase: Phase) {
        let now = Instant::now();
        self.timings.add(phase, now - self.last);
        self.last = now;
    }

    pub fn started(&self) -> Instant {
        self.started
    }

    pub fn timings(&self) -> PhaseTimings {
        self.timings
    }
}

/// On-wire record bytes per handshake message.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct WireBytes {
    /// Both hellos when a retry happened.
    pub client_hello: usize,
    pub hello_retry: usize,
    pub server_hello: usize,
    pub certificate: usize,
    pub certificate_verify: usize,
    pub server_finished: usize,
    pub client_finished: usize,
}

impl WireBytes {
    pub fn total(&self) -> usize {
        self.client_hello
            + self.hello_retry
            + self.server_hello
            + self.certificate
            + self.certificate_verify
            + self.server_finished
            + self.client_finished
    }
}

/// Handshake messages as exchanged, headers included.
#[derive(Debug, Clone, Default)]
pub struct HandshakeTranscript {
    pub client_hello: Vec<u8>,
    pub hello_retry: Option<Vec<u8>>,
    pub server_hello: Vec<u8>,
    pub certificate: Vec<u8>,
    pub certificate_verify: Vec<u8>,
    pub server_finished: Vec<u8>,
    pub client_finished: Vec<u8>,
    pub negotiated: Option<AlgorithmSuite>,
    pub bytes_on_wire: WireBytes,
}

impl HandshakeTranscript {
    /// Structural checks: every message decodes to its expected type and
    /// agrees with the negotiated suite.
    pub fn validate(&self) -> Result<(), ChannelError> {
        let suite = self.negotiated.ok_or_else(|| ChannelError::Decode("no negotiated suite".into()))?;
        let bad = |what: &str| ChannelError::Decode(format!("transcript: {what}"));
        match HandshakeMessage::decode(&self.client_hello)? {
            HandshakeMessage::ClientHello(ch) if ch.key_share.kem == suite.kem => {}
            _ => return Err(bad("client hello")),
        }
        match HandshakeMessage::decode(&self.server_hello)? {
            HandshakeMessage::ServerHello(sh)
                if sh.kem == suite.kem
                    && sh.sig == suite.sig
                    && sh.class == suite.deployment_class
                    && sh.ciphertext.len() == suite.kem.params().ciphertext_or_signature_bytes => {}
            _ => return Err(bad("server hello")),
        }
        match HandshakeMessage::decode(&self.certificate)? {
            HandshakeMessage::Certificate(c) if c.key_alg == suite.sig => {}
            _ => return Err(bad("certificate")),
        }
        match HandshakeMessage::decode(&self.certificate_verify)? {
            HandshakeMessage::CertificateVerify(cv)
                if cv.alg == suite.sig && cv.signature.len() <= suite.sig.params().ciphertext_or_signature_bytes => {}
            _ => return Err(bad("certificate verify")),
        }
        for fin in [&self.server_finished, &self.client_finished] {
            if !matches!(HandshakeMessage::decode(fin)?, HandshakeMessage::Finished(_)) {
                return Err(bad("finished"));
            }
        }
        let w = &self.bytes_on_wire;
        let pairs = [
            (w.server_hello, self.server_hello.len() + RECORD_HEADER),
            (w.certificate, self.certificate.len() + PROTECTED_OVERHEAD),
            (w.certificate_verify, self.certificate_verify.len() + PROTECTED_OVERHEAD),
            (w.server_finished, self.server_finished.len() + PROTECTED_OVERHEAD),
            (w.client_finished, self.client_finished.len() + PROTECTED_OVERHEAD),
        ];
        if pairs.iter().any(|(a, b)| a != b) {
            return Err(bad("byte counts disagree with messages"));
        }
        Ok(())
    }

    /// Hex dump with lengths, one message per line.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let mut line = |name: &str, b: &[u8]| {
            out.push_str(&format!("{name} ({} bytes): {}\n", b.len(), hex::encode(b)));
        };
        line("client_hello", &self.client_hello);
        if let Some(h) = &self.hello_retry {
            line("hello_retry_request", h);
        }
        line("server_hello", &self.server_hello);
        line("certificate", &self.certificate);
        line("certificate_verify", &self.certificate_verify);
        line("server_finished", &self.server_finished);
        line("client_finished", &self.client_finished);
        out.push_str(&format!("bytes_on_wire: {}\n", self.bytes_on_wire.total()));
        out
    }
}

/// Names and offer counts that fix the size of handshake framing.
#[derive(Debug, Clone, Copy)]
pub struct FramingShape<'a> {
    pub server_name: &'a str,
    pub subject: &'a str,
    pub issuer: &'a str,
    pub kem_offers: usize,
    pub sig_offers: usize,
}

impl FramingShape<'_> {
    /// Handshake bytes that do not depend on the algorithms (no retry).
    pub fn overhead(&self) -> usize {
        use messages::{FINISHED_LEN, HANDSHAKE_HEADER as H, RANDOM_LEN};
        let hs_plain = RECORD_HEADER + H;
        let hs_protected = PROTECTED_OVERHEAD + H;
        let client_hello = hs_plain + 2 + RANDOM_LEN + 1 + (1 + self.server_name.len())
            + (1 + 2 * self.kem_offers)
            + (1 + 2 * self.sig_offers)
            + 2
            + 3;
        let server_hello = hs_plain + 2 + RANDOM_LEN + 2 + 2 + 1 + 3;
        let certificate = hs_protected + (1 + self.subject.len()) + (1 + self.issuer.len()) + 8 * 3 + 2 + 3 + 2 + 3;
        let certificate_verify = hs_protected + 2 + 3;
        let finished = hs_protected + FINISHED_LEN;
        client_hello + server_hello + certificate + certificate_verify + 2 * finished
    }

    /// Expected handshake bytes for `suite`: framing, KEM public key and
    /// ciphertext, certificate key, and two signatures (issuer and
    /// CertificateVerify). Variable-length signatures count at their bound.
    pub fn expected_bytes(&self, suite: &AlgorithmSuite) -> usize {
        let k = suite.kem.params();
        let s = suite.sig.params();
        self.overhead()
            + k.public_key_bytes
            + k.ciphertext_or_signature_bytes
            + s.public_key_bytes
            + 2 * s.ciphertext_or_signature_bytes
    }
}

/// Outcome of an in-process handshake.
#[derive(Debug, Clone)]
pub struct HandshakeOutcome {
    pub client: Established,
    pub server: Established,
    pub timings: PhaseTimings,
    /// Wall clock from the first ClientHello stamp to the last lap.
    pub wall: Duration,
}

/// Runs both sides in process with one shared phase timer.
pub fn run_handshake(
    provider: &Provider,
    client_cfg: ClientConfig,
    server_cfg: ServerConfig,
) -> Result<HandshakeOutcome, ChannelError> {
    let mut timer = PhaseTimer::new();
    let (mut client, first) = ClientHandshake::start(provider, client_cfg, &mut timer)?;
    let mut server = ServerHandshake::new(provider, server_cfg);
    let mut to_server = vec![first];
    // Hello, possible retry, then Finished.
    for _ in 0..4 {
        let mut to_client = Vec::new();
        for rec in to_server.drain(..) {
            match server.handle_record(&rec, &mut timer) {
                Ok(out) => to_client.extend(out),
                Err(e) => {
                    if let Some(alert) = server.take_alert() {
                        // Surface the error as the client would see it.
                        let client_err = client.handle_record(&alert, &mut timer).err();
                        return Err(client_err.unwrap_or(e));
                    }
                    return Err(e);
                }
            }
        }
        if client.is_connected() && server.is_connected() {
            let wall = timer.started().elapsed();
            return Ok(HandshakeOutcome {
                client: client.finish()?,
                server: server.finish()?,
                timings: timer.timings(),
                wall,
            });
        }
        for rec in to_client {
            to_server.extend(client.handle_record(&rec, &mut timer)?);
        }
    }
    Err(ChannelError::UnexpectedMessage("handshake did not converge".into()))
}

impl fmt::Display for PhaseTimings {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ms = |d: Duration| d.as_secs_f64() * 1e3;
        write!(
            f,
            "ch={:.3} sh={:.3} kem={:.3} sig={:.3} kdf={:.3} fin={:.3} term={:.3} total={:.3} ms",
            ms(self.t_ch),
            ms(self.t_sh),
            ms(self.t_kem),
            ms(self.t_sig),
            ms(self.t_kdf),
            ms(self.t_fin),
            ms(self.t_term),
            ms(self.total())
        )
    }
}
