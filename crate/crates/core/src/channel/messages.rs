use super::cert::Certificate;
use super::codec::{Reader, Writer};
use super::ChannelError;
use crate::crypto::{AlgorithmId, DeploymentClass, Kind};
use crate::policy::PolicyMode;

pub const PROTOCOL_VERSION: u16 = 0x7f01;
pub const RANDOM_LEN: usize = 32;
pub const FINISHED_LEN: usize = 32;
/// Handshake message header: type plus 24-bit length.
pub const HANDSHAKE_HEADER: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HandshakeType {
    ClientHello = 1,
    ServerHello = 2,
    HelloRetryRequest = 6,
    Certificate = 11,
    CertificateVerify = 15,
    Finished = 20,
}

impl HandshakeType {
    fn from_u8(v: u8) -> Option<Self> {
        Some(match v {
            1 => Self::ClientHello,
            2 => Self::ServerHello,
            6 => Self::HelloRetryRequest,
            11 => Self::Certificate,
            15 => Self::CertificateVerify,
            20 => Self::Finished,
            _ => return None,
        })
    }
}

pub(crate) fn class_code(c: DeploymentClass) -> u8 {
    match c {
        DeploymentClass::LegacyOnly => 0,
        DeploymentClass::PqcOnly => 1,
        DeploymentClass::HybridKemLegacySig => 2,
        DeploymentClass::HybridLegacyKemPqcSig => 3,
        DeploymentClass::HybridDual => 4,
    }
}

fn class_from_code(v: u8) -> Result<DeploymentClass, ChannelError> {
    Ok(match v {
        0 => DeploymentClass::LegacyOnly,
        1 => DeploymentClass::PqcOnly,
        2 => DeploymentClass::HybridKemLegacySig,
        3 => DeploymentClass::HybridLegacyKemPqcSig,
        4 => DeploymentClass::HybridDual,
        _ => return Err(ChannelError::Decode(format!("unknown deployment class {v}"))),
    })
}

pub(crate) fn write_alg(w: &mut Writer, alg: AlgorithmId) {
    w.u16(alg.codepoint());
}

pub(crate) fn read_alg(r: &mut Reader, kind: Kind) -> Result<AlgorithmId, ChannelError> {
    let cp = r.u16()?;
    AlgorithmId::from_codepoint(cp)
        .filter(|a| a.kind() == kind)
        .ok_or_else(|| ChannelError::Decode(format!("unknown {kind:?} codepoint {cp:#06x}")))
}

/// Offer lists skip codepoints this build does not know.
fn read_offers(r: &mut Reader, kind: Kind) -> Result<Vec<AlgorithmId>, ChannelError> {
    let n = r.u8()?;
    let mut out = Vec::with_capacity(n as usize);
    for _ in 0..n {
        let cp = r.u16()?;
        if let Some(a) = AlgorithmId::from_codepoint(cp).filter(|a| a.kind() == kind) {
            out.push(a);
        }
    }
    Ok(out)
}

fn write_offers(w: &mut Writer, algs: &[AlgorithmId]) -> Result<(), ChannelError> {
    let n = u8::try_from(algs.len()).map_err(|_| ChannelError::Decode("too many offers".into()))?;
    w.u8(n);
    for a in algs {
        write_alg(w, *a);
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyShare {
    pub kem: AlgorithmId,
    pub public: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClientHello {
    pub random: [u8; RANDOM_LEN],
    pub policy: PolicyMode,
    pub server_name: String,
    pub kems: Vec<AlgorithmId>,
    pub sigs: Vec<AlgorithmId>,
    pub key_share: KeyShare,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServerHello {
    pub random: [u8; RANDOM_LEN],
    pub kem: AlgorithmId,
    pub sig: AlgorithmId,
    /// Negotiated deployment class, bound into the transcript.
    pub class: DeploymentClass,
    pub ciphertext: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HelloRetryRequest {
    pub kem: AlgorithmId,
    pub sig: AlgorithmId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CertificateVerify {
    pub alg: AlgorithmId,
    pub signature: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HandshakeMessage {
    ClientHello(ClientHello),
    ServerHello(ServerHello),
    HelloRetryRequest(HelloRetryRequest),
    Certificate(Certificate),
    CertificateVerify(CertificateVerify),
    Finished([u8; FINISHED_LEN]),
}

impl HandshakeMessage {
    pub fn kind(&self) -> HandshakeType {
        match self {
            Self::ClientHello(_) => HandshakeType::ClientHello,
            Self::ServerHello(_) => HandshakeType::ServerHello,
            Self::HelloRetryRequest(_) => HandshakeType::HelloRetryRequest,
            Self::Certificate(_) => HandshakeType::Certificate,
            Self::CertificateVerify(_) => HandshakeType::CertificateVerify,
            Self::Finished(_) => HandshakeType::Finished,
        }
    }

    /// Encoding including the 4-byte handshake header.
    pub fn encode(&self) -> Result<Vec<u8>, ChannelError> {
        let mut w = Writer::new();
        match self {
            Self::ClientHello(ch) => {
                w.u16(PROTOCOL_VERSION);
                w.bytes(&ch.random);
                w.u8(ch.policy.to_u8());
                w.short(ch.server_name.as_bytes())?;
                write_offers(&mut w, &ch.kems)?;
                write_offers(&mut w, &ch.sigs)?;
                write_alg(&mut w, ch.key_share.kem);
                w.long(&ch.key_share.public)?;
            }
            Self::ServerHello(sh) => {
                w.u16(PROTOCOL_VERSION);
                w.bytes(&sh.random);
                write_alg(&mut w, sh.kem);
                write_alg(&mut w, sh.sig);
                w.u8(class_code(sh.class));
                w.long(&sh.ciphertext)?;
            }
            Self::HelloRetryRequest(hrr) => {
                write_alg(&mut w, hrr.kem);
                write_alg(&mut w, hrr.sig);
            }
            Self::Certificate(cert) => cert.encode_into(&mut w)?,
            Self::CertificateVerify(cv) => {
                write_alg(&mut w, cv.alg);
                w.long(&cv.signature)?;
            }
            Self::Finished(data) => w.bytes(data),
        }
        let mut out = Vec::with_capacity(HANDSHAKE_HEADER + w.buf.len());
        out.push(self.kind() as u8);
        out.extend_from_slice(&(w.buf.len() as u32).to_be_bytes()[1..]);
        out.extend_from_slice(&w.buf);
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, ChannelError> {
        let mut r = Reader::new(bytes);
        let ty = r.u8()?;
        let ty = HandshakeType::from_u8(ty)
            .ok_or_else(|| ChannelError::Decode(format!("unknown handshake type {ty}")))?;
        let body = r.long()?;
        r.finish()?;
        let mut r = Reader::new(body);
        let version = |r: &mut Reader| -> Result<(), ChannelError> {
            let v = r.u16()?;
            if v != PROTOCOL_VERSION {
                return Err(ChannelError::Decode(format!("unsupported version {v:#06x}")));
            }
            Ok(())
        };
        let msg = match ty {
            HandshakeType::ClientHello => {
                version(&mut r)?;
                let random = r.take(RANDOM_LEN)?.try_into().expect("32 bytes");
                let p = r.u8()?;
                let policy = PolicyMode::from_u8(p)
                    .ok_or_else(|| ChannelError::Decode(format!("unknown policy {p}")))?;
                let server_name = String::from_utf8(r.short()?.to_vec())
                    .map_err(|_| ChannelError::Decode("server name not UTF-8".into()))?;
                let kems = read_offers(&mut r, Kind::Kem)?;
                let sigs = read_offers(&mut r, Kind::Signature)?;
                let kem = read_alg(&mut r, Kind::Kem)?;
                let public = r.long()?.to_vec();
                Self::ClientHello(ClientHello {
                    random,
                    policy,
                    server_name,
                    kems,
                    sigs,
                    key_share: KeyShare { kem, public },
                })
            }
            HandshakeType::ServerHello => {
                version(&mut r)?;
                Self::ServerHello(ServerHello {
                    random: r.take(RANDOM_LEN)?.try_into().expect("32 bytes"),
                    kem: read_alg(&mut r, Kind::Kem)?,
                    sig: read_alg(&mut r, Kind::Signature)?,
                    class: class_from_code(r.u8()?)?,
                    ciphertext: r.long()?.to_vec(),
                })
            }
            HandshakeType::HelloRetryRequest => Self::HelloRetryRequest(HelloRetryRequest {
                kem: read_alg(&mut r, Kind::Kem)?,
                sig: read_alg(&mut r, Kind::Signature)?,
            }),
            HandshakeType::Certificate => Self::Certificate(Certificate::decode_from(&mut r)?),
            HandshakeType::CertificateVerify => Self::CertificateVerify(CertificateVerify {
                alg: read_alg(&mut r, Kind::Signature)?,
                signature: r.long()?.to_vec(),
            }),
            HandshakeType::Finished => {
                Self::Finished(r.take(FINISHED_LEN)?.try_into().expect("32 bytes"))
            }
        };
        r.finish()?;
        Ok(msg)
    }
}
