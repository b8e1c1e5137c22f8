//! Established sessions: record protection over keys, and a blocking
//! driver for any `Read + Write` stream.

use std::io::{self, Read, Write};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use super::handshake::{ClientConfig, ClientHandshake, Established, ServerConfig, ServerHandshake};
use super::keyschedule::SessionKeys;
use super::record::{read_record, ContentType, RecordOpener, RecordProtector};
use super::{alert, Alert, ChannelError, Phase, PhaseTimer, PhaseTimings};
use crate::crypto::Provider;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Client,
    Server,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Incoming {
    Data(Vec<u8>),
    CloseNotify,
}

/// Application-data protection for one side of a session.
pub struct SecureSession {
    tx: RecordProtector,
    rx: RecordOpener,
    sent_close: bool,
}

impl SecureSession {
    pub fn new(keys: &SessionKeys, role: Role) -> Self {
        let (tx, rx) = match role {
            Role::Client => (&keys.client_write, &keys.server_write),
            Role::Server => (&keys.server_write, &keys.client_write),
        };
        Self {
            tx: RecordProtector::new(tx),
            rx: RecordOpener::new(rx),
            sent_close: false,
        }
    }

    pub fn seal(&mut self, data: &[u8]) -> Result<Vec<u8>, ChannelError> {
        if self.sent_close {
            return Err(ChannelError::Closed);
        }
        self.tx.protect(ContentType::ApplicationData, data)
    }

    pub fn open(&mut self, record: &[u8]) -> Result<Incoming, ChannelError> {
        if record.first() == Some(&(ContentType::Alert as u8)) {
            let (_, body, _) = super::record::split_record(record)?;
            return Err(Alert::decode(body)?.into_error());
        }
        let (ct, body) = self.rx.unprotect(record)?;
        match ct {
            ContentType::ApplicationData => Ok(Incoming::Data(body)),
            ContentType::Alert => match Alert::decode(&body)? {
                a if a.description == alert::CLOSE_NOTIFY => Ok(Incoming::CloseNotify),
                a => Err(a.into_error()),
            },
            ContentType::Handshake => Err(ChannelError::UnexpectedMessage("handshake after finish".into())),
        }
    }

    /// Protected close_notify record; `None` once already sent.
    pub fn close_notify(&mut self) -> Result<Option<Vec<u8>>, ChannelError> {
        if self.sent_close {
            return Ok(None);
        }
        let rec = self
            .tx
            .protect(ContentType::Alert, &Alert { fatal: false, description: alert::CLOSE_NOTIFY }.encode())?;
        self.sent_close = true;
        Ok(Some(rec))
    }
}

/// Bytes moved through a [`CountingStream`].
#[derive(Debug, Default)]
pub struct ByteCounters {
    pub sent: AtomicU64,
    pub received: AtomicU64,
}

impl ByteCounters {
    pub fn total(&self) -> u64 {
        self.sent.load(Ordering::Relaxed) + self.received.load(Ordering::Relaxed)
    }
}

/// Stream wrapper that adds every byte read or written to shared counters.
pub struct CountingStream<S> {
    inner: S,
    counters: Arc<ByteCounters>,
}

impl<S> CountingStream<S> {
    pub fn new(inner: S, counters: Arc<ByteCounters>) -> Self {
        Self { inner, counters }
    }

    pub fn get_ref(&self) -> &S {
        &self.inner
    }

    pub fn counters(&self) -> &Arc<ByteCounters> {
        &self.counters
    }
}

impl<S: Read> Read for CountingStream<S> {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        let n = self.inner.read(buf)?;
        self.counters.received.fetch_add(n as u64, Ordering::Relaxed);
        Ok(n)
    }
}

impl<S: Write> Write for CountingStream<S> {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.counters.sent.fetch_add(n as u64, Ordering::Relaxed);
        Ok(n)
    }

    fn flush(&mut self) -> io::Result<()> {
        self.inner.flush()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CloseReport {
    pub t_term: Duration,
    /// The peer vanished instead of answering close_notify.
    pub reset: bool,
}

/// A secure session over a blocking stream.
pub struct SecureStream<S> {
    io: S,
    session: SecureSession,
    role: Role,
    closed: Option<CloseReport>,
    peer_closed: bool,
}

fn send_all<S: Write>(io: &mut S, records: &[Vec<u8>]) -> Result<(), ChannelError> {
    // One write per flight keeps small records in one segment.
    let flight: Vec<u8> = records.concat();
    io.write_all(&flight)?;
    io.flush()?;
    Ok(())
}

fn next_record<S: Read>(io: &mut S) -> Result<Vec<u8>, ChannelError> {
    read_record(io)?.ok_or_else(|| {
        ChannelError::Io(io::Error::new(io::ErrorKind::UnexpectedEof, "peer closed during handshake"))
    })
}

/// Client side of the handshake. Returns the established session and the
/// client's phase timings (without `t_term`).
pub fn connect<S: Read + Write>(
    mut io: S,
    provider: &Provider,
    config: ClientConfig,
) -> Result<(SecureStream<S>, Established, PhaseTimings), ChannelError> {
    let mut timer = PhaseTimer::new();
    let (mut hs, hello) = ClientHandshake::start(provider, config, &mut timer)?;
    send_all(&mut io, &[hello])?;
    while !hs.is_connected() {
        let rec = next_record(&mut io)?;
        match hs.handle_record(&rec, &mut timer) {
            Ok(out) if !out.is_empty() => send_all(&mut io, &out)?,
            Ok(_) => {}
            Err(e) => {
                if let Some(a) = hs.take_alert() {
                    let _ = send_all(&mut io, &[a]);
                }
                return Err(e);
            }
        }
    }
    let est = hs.finish()?;
    let session = SecureSession::new(&est.keys, Role::Client);
    // Sending our Finished and installing the keys belong to t_fin.
    timer.lap(Phase::Fin);
    Ok((
        SecureStream { io, session, role: Role::Client, closed: None, peer_closed: false },
        est,
        timer.timings(),
    ))
}

/// Server side of the handshake.
pub fn accept<S: Read + Write>(
    mut io: S,
    provider: &Provider,
    config: ServerConfig,
) -> Result<(SecureStream<S>, Established), ChannelError> {
    let mut timer = PhaseTimer::new();
    let mut hs = ServerHandshake::new(provider, config);
    while !hs.is_connected() {
        let rec = next_record(&mut io)?;
        match hs.handle_record(&rec, &mut timer) {
            Ok(out) if !out.is_empty() => send_all(&mut io, &out)?,
            Ok(_) => {}
            Err(e) => {
                if let Some(a) = hs.take_alert() {
                    let _ = send_all(&mut io, &[a]);
                }
                return Err(e);
            }
        }
    }
    let est = hs.finish()?;
    let session = SecureSession::new(&est.keys, Role::Server);
    Ok((
        SecureStream { io, session, role: Role::Server, closed: None, peer_closed: false },
        est,
    ))
}

impl<S: Read + Write> SecureStream<S> {
    pub fn role(&self) -> Role {
        self.role
    }

    pub fn get_ref(&self) -> &S {
        &self.io
    }

    pub fn send(&mut self, data: &[u8]) -> Result<(), ChannelError> {
        let rec = self.session.seal(data)?;
        send_all(&mut self.io, &[rec])
    }

    /// Next application message; `None` after the peer's close_notify, which
    /// is answered immediately.
    pub fn recv(&mut self) -> Result<Option<Vec<u8>>, ChannelError> {
        if self.peer_closed {
            return Ok(None);
        }
        let Some(rec) = read_record(&mut self.io)? else {
            self.peer_closed = true;
            return Ok(None);
        };
        match self.session.open(&rec)? {
            Incoming::Data(d) => Ok(Some(d)),
            Incoming::CloseNotify => {
                self.peer_closed = true;
                let started = Instant::now();
                let reset = match self.session.close_notify()? {
                    Some(r) => send_all(&mut self.io, &[r]).is_err(),
                    None => false,
                };
                self.closed.get_or_insert(CloseReport { t_term: started.elapsed(), reset });
                Ok(None)
            }
        }
    }

    /// Sends close_notify and waits for the peer's. A second call returns
    /// the first report without touching the stream.
    pub fn close(&mut self) -> CloseReport {
        if let Some(r) = self.closed {
            return r;
        }
        let started = Instant::now();
        let mut reset = match self.session.close_notify() {
            Ok(Some(rec)) => send_all(&mut self.io, &[rec]).is_err(),
            _ => false,
        };
        if !reset && !self.peer_closed {
            reset = loop {
                match read_record(&mut self.io) {
                    Ok(Some(rec)) => match self.session.open(&rec) {
                        Ok(Incoming::CloseNotify) => break false,
                        Ok(Incoming::Data(_)) => continue,
                        Err(_) => break true,
                    },
                    Ok(None) | Err(_) => break true,
                }
            };
            self.peer_closed = true;
        }
        let report = CloseReport { t_term: started.elapsed(), reset };
        self.closed = Some(report);
        report
    }

    /// Closes and charges `t_term` to `timings`.
    pub fn close_into(&mut self, timings: &mut PhaseTimings) -> CloseReport {
        let already = self.closed.is_some();
        let r = self.close();
        if !already {
            timings.add(Phase::Term, r.t_term);
        }
        r
    }

    pub fn into_inner(self) -> S {
        self.io
    }
}
