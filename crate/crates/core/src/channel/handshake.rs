//! Sans-IO client and server handshake state machines.
//!
//! Each side consumes whole records and returns the records to send. The
//! caller owns the [`PhaseTimer`]; in-process runs share one timer between
//! both sides so the phases tile the wall clock.

use rand::RngCore;
use sha2::{Digest, Sha256};

use super::cert::{Certificate, ServerIdentity, TrustStore};
use super::keyschedule::{verify_finished, KeySchedule, SessionKeys};
use super::messages::{
    CertificateVerify, ClientHello, HandshakeMessage, HelloRetryRequest, KeyShare, ServerHello,
};
use super::record::{encode_plain, split_record, ContentType, RecordOpener, RecordProtector};
use super::{Alert, ChannelError, HandshakeTranscript, Phase, PhaseTimer};
use crate::crypto::{classify_profile, AlgorithmId, AlgorithmSuite, Provider};
use crate::policy::{negotiate, Decision, Offer, PolicyMode, RejectReason};

const CV_CONTEXT: &[u8] = b"qsdns server CertificateVerify\0";

fn cv_input(hash: &[u8]) -> Vec<u8> {
    [CV_CONTEXT, hash].concat()
}

#[derive(Debug, Clone)]
pub struct ClientConfig {
    /// KEMs in preference order; the first gets a key share.
    pub kems: Vec<AlgorithmId>,
    pub sigs: Vec<AlgorithmId>,
    pub policy: PolicyMode,
    pub server_name: String,
    pub trust: TrustStore,
    /// Unix time for certificate checks; the system clock when `None`.
    pub now: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub kems: Vec<AlgorithmId>,
    pub identity: ServerIdentity,
    pub policy: PolicyMode,
}

/// Result of a completed handshake on one side.
#[derive(Debug, Clone)]
pub struct Established {
    pub keys: SessionKeys,
    pub suite: AlgorithmSuite,
    pub transcript: HandshakeTranscript,
}

/// Decides the suite for a decoded hello. The stricter of the server's and
/// the client's declared policy applies.
pub fn select_parameters(hello: &ClientHello, server: &ServerConfig) -> Result<AlgorithmSuite, ChannelError> {
    let mode = server.policy.max(hello.policy);
    let offer = Offer { kems: hello.kems.clone(), sigs: hello.sigs.clone() };
    match negotiate(&offer, mode, &server.kems, &[server.identity.alg()]) {
        Decision::Accept(suite) => Ok(suite),
        Decision::Reject(RejectReason::ClassicalOnlyOffer) => Err(ChannelError::DowngradeRejected(format!(
            "offer has no algorithm acceptable under {mode}"
        ))),
        Decision::Reject(RejectReason::NoCommonSuite) => Err(ChannelError::NoCommonSuite),
    }
}

#[derive(Default)]
struct Transcript {
    hash: Sha256,
    record: HandshakeTranscript,
}

impl Transcript {
    fn add(&mut self, msg: &[u8]) {
        self.hash.update(msg);
    }

    fn current(&self) -> Vec<u8> {
        self.hash.clone().finalize().to_vec()
    }
}

fn handshake_record(msg: &HandshakeMessage) -> Result<(Vec<u8>, Vec<u8>), ChannelError> {
    let bytes = msg.encode()?;
    let rec = encode_plain(ContentType::Handshake, &bytes)?;
    Ok((bytes, rec))
}

fn protected_handshake(
    tx: &mut RecordProtector,
    msg: &HandshakeMessage,
) -> Result<(Vec<u8>, Vec<u8>), ChannelError> {
    let bytes = msg.encode()?;
    let rec = tx.protect(ContentType::Handshake, &bytes)?;
    Ok((bytes, rec))
}

/// Decodes a plaintext handshake record; alerts become errors.
fn plain_message(record: &[u8]) -> Result<(HandshakeMessage, Vec<u8>), ChannelError> {
    let (ct, body, rest) = split_record(record)?;
    if !rest.is_empty() {
        return Err(ChannelError::Decode("trailing bytes after record".into()));
    }
    match ct {
        ContentType::Alert => Err(Alert::decode(body)?.into_error()),
        ContentType::Handshake => Ok((HandshakeMessage::decode(body)?, body.to_vec())),
        ContentType::ApplicationData => Err(ChannelError::UnexpectedMessage("protected record before keys".into())),
    }
}

fn protected_message(
    rx: &mut RecordOpener,
    record: &[u8],
) -> Result<(HandshakeMessage, Vec<u8>), ChannelError> {
    if record.first() == Some(&(ContentType::Alert as u8)) {
        return plain_message(record);
    }
    let (ct, body) = rx.unprotect(record)?;
    match ct {
        ContentType::Handshake => Ok((HandshakeMessage::decode(&body)?, body)),
        ContentType::Alert => Err(Alert::decode(&body)?.into_error()),
        ContentType::ApplicationData => Err(ChannelError::UnexpectedMessage("data during handshake".into())),
    }
}

fn unexpected(expected: &str, got: &HandshakeMessage) -> ChannelError {
    ChannelError::UnexpectedMessage(format!("expected {expected}, got {:?}", got.kind()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ClientState {
    WaitServerHello,
    WaitCertificate,
    WaitCertificateVerify,
    WaitFinished,
    Connected,
    Failed,
}

pub struct ClientHandshake<'p> {
    provider: &'p Provider,
    config: ClientConfig,
    state: ClientState,
    transcript: Transcript,
    share: AlgorithmId,
    kem_secret: Vec<u8>,
    retried: bool,
    suite: Option<AlgorithmSuite>,
    schedule: Option<KeySchedule>,
    opener: Option<RecordOpener>,
    certificate: Option<Certificate>,
    keys: Option<SessionKeys>,
    pending_alert: Option<Vec<u8>>,
}

impl<'p> ClientHandshake<'p> {
    /// Builds the ClientHello record. Key generation counts toward `t_ch`.
    pub fn start(
        provider: &'p Provider,
        config: ClientConfig,
        timer: &mut PhaseTimer,
    ) -> Result<(Self, Vec<u8>), ChannelError> {
        let share = *config.kems.first().ok_or(ChannelError::EmptyOffer)?;
        if config.sigs.is_empty() {
            return Err(ChannelError::EmptyOffer);
        }
        let mut client = Self {
            provider,
            config,
            state: ClientState::WaitServerHello,
            transcript: Transcript::default(),
            share,
            kem_secret: Vec::new(),
            retried: false,
            suite: None,
            schedule: None,
            opener: None,
            certificate: None,
            keys: None,
            pending_alert: None,
        };
        let rec = client.hello(share)?;
        timer.lap(Phase::Ch);
        Ok((client, rec))
    }

    fn hello(&mut self, kem: AlgorithmId) -> Result<Vec<u8>, ChannelError> {
        let kp = self.provider.kem_keygen(kem)?;
        let mut random = [0u8; 32];
        rand::thread_rng().fill_bytes(&mut random);
        let ch = ClientHello {
            random,
            policy: self.config.policy,
            server_name: self.config.server_name.clone(),
            kems: self.config.kems.clone(),
            sigs: self.config.sigs.clone(),
            key_share: KeyShare { kem, public: kp.public },
        };
        self.share = kem;
        self.kem_secret = kp.secret;
        let (bytes, rec) = handshake_record(&HandshakeMessage::ClientHello(ch))?;
        self.transcript.add(&bytes);
        self.transcript.record.client_hello = bytes;
        self.transcript.record.bytes_on_wire.client_hello += rec.len();
        Ok(rec)
    }

    pub fn is_connected(&self) -> bool {
        self.state == ClientState::Connected
    }

    /// Alert to send after a failed `handle_record`, once.
    pub fn take_alert(&mut self) -> Option<Vec<u8>> {
        self.pending_alert.take()
    }

    pub fn handle_record(&mut self, record: &[u8], timer: &mut PhaseTimer) -> Result<Vec<Vec<u8>>, ChannelError> {
        let result = self.step(record, timer);
        if let Err(e) = &result {
            self.state = ClientState::Failed;
            self.pending_alert = Alert::for_error(e).map(|a| a.record());
        }
        result
    }

    fn check_policy(&self, kem: AlgorithmId, sig: AlgorithmId) -> Result<(), ChannelError> {
        if !self.config.kems.contains(&kem) || !self.config.sigs.contains(&sig) {
            return Err(ChannelError::UnexpectedMessage(format!("server chose unoffered {kem}+{sig}")));
        }
        if !self.config.policy.permits(kem, sig) {
            return Err(ChannelError::DowngradeRejected(format!(
                "{kem}+{sig} violates {}",
                self.config.policy
            )));
        }
        Ok(())
    }

    fn step(&mut self, record: &[u8], timer: &mut PhaseTimer) -> Result<Vec<Vec<u8>>, ChannelError> {
        match self.state {
            ClientState::WaitServerHello => {
                let (msg, bytes) = plain_message(record)?;
                match msg {
                    HandshakeMessage::HelloRetryRequest(hrr) if !self.retried => {
                        self.check_policy(hrr.kem, hrr.sig)?;
                        self.retried = true;
                        self.transcript.add(&bytes);
                        self.transcript.record.hello_retry = Some(bytes);
                        self.transcript.record.bytes_on_wire.hello_retry = record.len();
                        timer.lap(Phase::Sh);
                        let rec = self.hello(hrr.kem)?;
                        timer.lap(Phase::Ch);
                        Ok(vec![rec])
                    }
                    HandshakeMessage::ServerHello(sh) => {
                        self.check_policy(sh.kem, sh.sig)?;
                        if sh.kem != self.share {
                            return Err(ChannelError::UnexpectedMessage("ServerHello KEM differs from key share".into()));
                        }
                        if sh.class != classify_profile(sh.kem, sh.sig) {
                            return Err(ChannelError::DowngradeRejected("deployment class binding mismatch".into()));
                        }
                        self.transcript.add(&bytes);
                        self.transcript.record.server_hello = bytes;
                        self.transcript.record.bytes_on_wire.server_hello = record.len();
                        let suite = AlgorithmSuite::new(sh.kem, sh.sig)?;
                        self.suite = Some(suite);
                        timer.lap(Phase::Sh);
                        let ss = self
                            .provider
                            .kem_decapsulate(sh.kem, &self.kem_secret, &sh.ciphertext)
                            .map_err(|e| ChannelError::KemFailure(e.to_string()))?;
                        timer.lap(Phase::Kem);
                        let ks = KeySchedule::new(&ss, &self.transcript.current());
                        self.opener = Some(RecordOpener::new(&ks.server_handshake_keys()));
                        self.schedule = Some(ks);
                        timer.lap(Phase::Kdf);
                        self.state = ClientState::WaitCertificate;
                        Ok(Vec::new())
                    }
                    other => Err(unexpected("ServerHello", &other)),
                }
            }
            ClientState::WaitCertificate => {
                let opener = self.opener.as_mut().expect("keys after ServerHello");
                let (msg, bytes) = protected_message(opener, record)?;
                let HandshakeMessage::Certificate(cert) = msg else {
                    return Err(unexpected("Certificate", &msg));
                };
                let suite = self.suite.expect("suite after ServerHello");
                if cert.key_alg != suite.sig {
                    return Err(ChannelError::SignatureInvalid(format!(
                        "certificate key is {}, negotiated {}",
                        cert.key_alg, suite.sig
                    )));
                }
                let now = self.config.now.unwrap_or_else(super::unix_now);
                self.config.trust.verify(self.provider, &cert, &self.config.server_name, now)?;
                self.transcript.add(&bytes);
                self.transcript.record.certificate = bytes;
                self.transcript.record.bytes_on_wire.certificate = record.len();
                self.certificate = Some(cert);
                timer.lap(Phase::Sig);
                self.state = ClientState::WaitCertificateVerify;
                Ok(Vec::new())
            }
            ClientState::WaitCertificateVerify => {
                let opener = self.opener.as_mut().expect("keys after ServerHello");
                let (msg, bytes) = protected_message(opener, record)?;
                let HandshakeMessage::CertificateVerify(cv) = msg else {
                    return Err(unexpected("CertificateVerify", &msg));
                };
                let cert = self.certificate.as_ref().expect("certificate before verify");
                if cv.alg != cert.key_alg {
                    return Err(ChannelError::SignatureInvalid("CertificateVerify algorithm mismatch".into()));
                }
                let input = cv_input(&self.transcript.current());
                if !self.provider.verify(cv.alg, &cert.public_key, &input, &cv.signature)? {
                    return Err(ChannelError::SignatureInvalid("CertificateVerify".into()));
                }
                self.transcript.add(&bytes);
                self.transcript.record.certificate_verify = bytes;
                self.transcript.record.bytes_on_wire.certificate_verify = record.len();
                timer.lap(Phase::Sig);
                self.state = ClientState::WaitFinished;
                Ok(Vec::new())
            }
            ClientState::WaitFinished => {
                let opener = self.opener.as_mut().expect("keys after ServerHello");
                let (msg, bytes) = protected_message(opener, record)?;
                let HandshakeMessage::Finished(got) = msg else {
                    return Err(unexpected("Finished", &msg));
                };
                let ks = self.schedule.as_ref().expect("schedule after ServerHello");
                if !verify_finished(&ks.server_finished(&self.transcript.current()), &got) {
                    return Err(ChannelError::FinishedMismatch);
                }
                self.transcript.add(&bytes);
                self.transcript.record.server_finished = bytes;
                self.transcript.record.bytes_on_wire.server_finished = record.len();
                let hash = self.transcript.current();
                timer.lap(Phase::Fin);
                self.keys = Some(ks.application(&hash));
                timer.lap(Phase::Kdf);
                let mut tx = RecordProtector::new(&ks.client_handshake_keys());
                let (bytes, rec) = protected_handshake(&mut tx, &HandshakeMessage::Finished(ks.client_finished(&hash)))?;
                self.transcript.record.client_finished = bytes;
                self.transcript.record.bytes_on_wire.client_finished = rec.len();
                timer.lap(Phase::Fin);
                self.state = ClientState::Connected;
                Ok(vec![rec])
            }
            ClientState::Connected | ClientState::Failed => {
                Err(ChannelError::UnexpectedMessage("handshake already finished".into()))
            }
        }
    }

    pub fn finish(self) -> Result<Established, ChannelError> {
        match (self.state, self.keys, self.suite) {
            (ClientState::Connected, Some(keys), Some(suite)) => {
                let mut transcript = self.transcript.record;
                transcript.negotiated = Some(suite);
                Ok(Established { keys, suite, transcript })
            }
            _ => Err(ChannelError::UnexpectedMessage("handshake incomplete".into())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ServerState {
    WaitClientHello,
    WaitFinished,
    Connected,
    Failed,
}

pub struct ServerHandshake<'p> {
    provider: &'p Provider,
    config: ServerConfig,
    state: ServerState,
    transcript: Transcript,
    retried: bool,
    suite: Option<AlgorithmSuite>,
    schedule: Option<KeySchedule>,
    opener: Option<RecordOpener>,
    expected_finished: Option<[u8; 32]>,
    keys: Option<SessionKeys>,
    pending_alert: Option<Vec<u8>>,
}

impl<'p> ServerHandshake<'p> {
    pub fn new(provider: &'p Provider, config: ServerConfig) -> Self {
        Self {
            provider,
            config,
            state: ServerState::WaitClientHello,
            transcript: Transcript::default(),
            retried: false,
            suite: None,
            schedule: None,
            opener: None,
            expected_finished: None,
            keys: None,
            pending_alert: None,
        }
    }

    pub fn is_connected(&self) -> bool {
        self.state == ServerState::Connected
    }

    pub fn take_alert(&mut self) -> Option<Vec<u8>> {
        self.pending_alert.take()
    }

    /// Suite chosen so far, available once a hello has been accepted.
    pub fn suite(&self) -> Option<AlgorithmSuite> {
        self.suite
    }

    pub fn handle_record(&mut self, record: &[u8], timer: &mut PhaseTimer) -> Result<Vec<Vec<u8>>, ChannelError> {
        let result = self.step(record, timer);
        if let Err(e) = &result {
            self.state = ServerState::Failed;
            self.pending_alert = Alert::for_error(e).map(|a| a.record());
        }
        result
    }

    fn step(&mut self, record: &[u8], timer: &mut PhaseTimer) -> Result<Vec<Vec<u8>>, ChannelError> {
        match self.state {
            ServerState::WaitClientHello => {
                let (msg, bytes) = plain_message(record)?;
                let HandshakeMessage::ClientHello(ch) = msg else {
                    return Err(unexpected("ClientHello", &msg));
                };
                self.transcript.record.bytes_on_wire.client_hello += record.len();
                let suite = select_parameters(&ch, &self.config)?;
                if self.retried && Some(suite) != self.suite {
                    return Err(ChannelError::UnexpectedMessage("second hello changed the offer".into()));
                }
                self.suite = Some(suite);
                self.transcript.add(&bytes);
                self.transcript.record.client_hello = bytes;
                if ch.key_share.kem != suite.kem {
                    if self.retried {
                        return Err(ChannelError::UnexpectedMessage("key share still mismatched after retry".into()));
                    }
                    self.retried = true;
                    let hrr = HandshakeMessage::HelloRetryRequest(HelloRetryRequest { kem: suite.kem, sig: suite.sig });
                    let (bytes, rec) = handshake_record(&hrr)?;
                    self.transcript.add(&bytes);
                    self.transcript.record.hello_retry = Some(bytes);
                    self.transcript.record.bytes_on_wire.hello_retry = rec.len();
                    timer.lap(Phase::Sh);
                    return Ok(vec![rec]);
                }
                timer.lap(Phase::Sh);
                let (ciphertext, ss) = self
                    .provider
                    .kem_encapsulate(suite.kem, &ch.key_share.public)
                    .map_err(|e| ChannelError::KemFailure(e.to_string()))?;
                timer.lap(Phase::Kem);
                let mut random = [0u8; 32];
                rand::thread_rng().fill_bytes(&mut random);
                let sh = HandshakeMessage::ServerHello(ServerHello {
                    random,
                    kem: suite.kem,
                    sig: suite.sig,
                    class: suite.deployment_class,
                    ciphertext,
                });
                let (sh_bytes, sh_rec) = handshake_record(&sh)?;
                self.transcript.add(&sh_bytes);
                self.transcript.record.server_hello = sh_bytes;
                self.transcript.record.bytes_on_wire.server_hello = sh_rec.len();
                timer.lap(Phase::Sh);
                let ks = KeySchedule::new(&ss, &self.transcript.current());
                let mut tx = RecordProtector::new(&ks.server_handshake_keys());
                self.opener = Some(RecordOpener::new(&ks.client_handshake_keys()));
                timer.lap(Phase::Kdf);

                let identity = &self.config.identity;
                let cert = HandshakeMessage::Certificate(identity.certificate.clone());
                let (cert_bytes, cert_rec) = protected_handshake(&mut tx, &cert)?;
                self.transcript.add(&cert_bytes);
                self.transcript.record.certificate = cert_bytes;
                self.transcript.record.bytes_on_wire.certificate = cert_rec.len();
                let signature = self.provider.sign(
                    identity.alg(),
                    identity.secret_key(),
                    &cv_input(&self.transcript.current()),
                )?;
                let cv = HandshakeMessage::CertificateVerify(CertificateVerify { alg: identity.alg(), signature });
                let (cv_bytes, cv_rec) = protected_handshake(&mut tx, &cv)?;
                self.transcript.add(&cv_bytes);
                self.transcript.record.certificate_verify = cv_bytes;
                self.transcript.record.bytes_on_wire.certificate_verify = cv_rec.len();
                timer.lap(Phase::Sh);

                let fin = HandshakeMessage::Finished(ks.server_finished(&self.transcript.current()));
                let (fin_bytes, fin_rec) = protected_handshake(&mut tx, &fin)?;
                self.transcript.add(&fin_bytes);
                self.transcript.record.server_finished = fin_bytes;
                self.transcript.record.bytes_on_wire.server_finished = fin_rec.len();
                let hash = self.transcript.current();
                self.expected_finished = Some(ks.client_finished(&hash));
                self.keys = Some(ks.application(&hash));
                self.schedule = Some(ks);
                timer.lap(Phase::Fin);
                self.state = ServerState::WaitFinished;
                Ok(vec![sh_rec, cert_rec, cv_rec, fin_rec])
            }
            ServerState::WaitFinished => {
                let opener = self.opener.as_mut().expect("keys after ServerHello");
                let (msg, bytes) = protected_message(opener, record)?;
                let HandshakeMessage::Finished(got) = msg else {
                    return Err(unexpected("Finished", &msg));
                };
                let expected = self.expected_finished.expect("set with ServerHello");
                if !verify_finished(&expected, &got) {
                    return Err(ChannelError::FinishedMismatch);
                }
                self.transcript.record.client_finished = bytes;
                self.transcript.record.bytes_on_wire.client_finished = record.len();
                timer.lap(Phase::Fin);
                self.state = ServerState::Connected;
                Ok(Vec::new())
            }
            ServerState::Connected | ServerState::Failed => {
                Err(ChannelError::UnexpectedMessage("handshake already finished".into()))
            }
        }
    }

    pub fn finish(self) -> Result<Established, ChannelError> {
        match (self.state, self.keys, self.suite) {
            (ServerState::Connected, Some(keys), Some(suite)) => {
                let mut transcript = self.transcript.record;
                transcript.negotiated = Some(suite);
                Ok(Established { keys, suite, transcript })
            }
            _ => Err(ChannelError::UnexpectedMessage("handshake incomplete".into())),
        }
    }
}
