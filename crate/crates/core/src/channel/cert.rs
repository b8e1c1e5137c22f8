//! Minimal certificates with a single-level issuer.

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;

use super::codec::{Reader, Writer};
use super::messages::{read_alg, write_alg};
use super::ChannelError;
use crate::crypto::{AlgorithmId, Kind, Provider};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Certificate {
    pub subject: String,
    pub issuer: String,
    pub serial: u64,
    /// Unix seconds.
    pub not_before: u64,
    pub not_after: u64,
    pub key_alg: AlgorithmId,
    pub public_key: Vec<u8>,
    pub issuer_alg: AlgorithmId,
    pub signature: Vec<u8>,
}

impl Certificate {
    fn encode_tbs(&self, w: &mut Writer) -> Result<(), ChannelError> {
        w.short(self.subject.as_bytes())?;
        w.short(self.issuer.as_bytes())?;
        w.u64(self.serial);
        w.u64(self.not_before);
        w.u64(self.not_after);
        write_alg(w, self.key_alg);
        w.long(&self.public_key)?;
        write_alg(w, self.issuer_alg);
        Ok(())
    }

    /// The bytes the issuer signs.
    pub fn tbs(&self) -> Result<Vec<u8>, ChannelError> {
        let mut w = Writer::new();
        self.encode_tbs(&mut w)?;
        Ok(w.buf)
    }

    pub(crate) fn encode_into(&self, w: &mut Writer) -> Result<(), ChannelError> {
        self.encode_tbs(w)?;
        w.long(&self.signature)
    }

    pub(crate) fn decode_from(r: &mut Reader) -> Result<Self, ChannelError> {
        let text = |b: &[u8]| {
            String::from_utf8(b.to_vec()).map_err(|_| ChannelError::Decode("name not UTF-8".into()))
        };
        Ok(Self {
            subject: text(r.short()?)?,
            issuer: text(r.short()?)?,
            serial: r.u64()?,
            not_before: r.u64()?,
            not_after: r.u64()?,
            key_alg: read_alg(r, Kind::Signature)?,
            public_key: r.long()?.to_vec(),
            issuer_alg: read_alg(r, Kind::Signature)?,
            signature: r.long()?.to_vec(),
        })
    }
}

/// Issuer of server certificates.
#[derive(Debug, Clone)]
pub struct CertificateAuthority {
    pub name: String,
    pub alg: AlgorithmId,
    pub public_key: Vec<u8>,
    secret_key: Vec<u8>,
    next_serial: u64,
}

impl CertificateAuthority {
    pub fn generate(provider: &Provider, name: &str, alg: AlgorithmId) -> Result<Self, ChannelError> {
        let kp = provider.sig_keygen(alg)?;
        Ok(Self {
            name: name.to_string(),
            alg,
            public_key: kp.public,
            secret_key: kp.secret,
            next_serial: 1,
        })
    }

    pub fn issue(
        &mut self,
        provider: &Provider,
        subject: &str,
        key_alg: AlgorithmId,
        public_key: Vec<u8>,
        not_before: u64,
        not_after: u64,
    ) -> Result<Certificate, ChannelError> {
        let mut cert = Certificate {
            subject: subject.to_string(),
            issuer: self.name.clone(),
            serial: self.next_serial,
            not_before,
            not_after,
            key_alg,
            public_key,
            issuer_alg: self.alg,
            signature: Vec::new(),
        };
        self.next_serial += 1;
        cert.signature = provider.sign(self.alg, &self.secret_key, &cert.tbs()?)?;
        Ok(cert)
    }

    pub fn trust_anchor(&self) -> TrustedIssuer {
        TrustedIssuer {
            name: self.name.clone(),
            alg: self.alg,
            public_key: self.public_key.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrustedIssuer {
    pub name: String,
    pub alg: AlgorithmId,
    pub public_key: Vec<u8>,
}

#[derive(Debug, Clone, Default)]
pub struct TrustStore {
    issuers: Vec<TrustedIssuer>,
}

impl TrustStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, issuer: TrustedIssuer) {
        self.issuers.push(issuer);
    }

    pub fn issuers(&self) -> &[TrustedIssuer] {
        &self.issuers
    }

    /// One `alg base64-key name` line per issuer.
    pub fn to_text(&self) -> String {
        self.issuers
            .iter()
            .map(|i| format!("{} {} {}\n", i.alg.name(), BASE64.encode(&i.public_key), i.name))
            .collect()
    }

    pub fn from_text(text: &str) -> Result<Self, ChannelError> {
        let bad = |line: &str| ChannelError::Decode(format!("trust line `{line}`"));
        let mut store = Self::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let mut parts = line.splitn(3, ' ');
            let (Some(alg), Some(key), Some(name)) = (parts.next(), parts.next(), parts.next()) else {
                return Err(bad(line));
            };
            store.add(TrustedIssuer {
                name: name.to_string(),
                alg: AlgorithmId::lookup_kind(alg, Kind::Signature)?,
                public_key: BASE64.decode(key).map_err(|_| bad(line))?,
            });
        }
        Ok(store)
    }

    /// Checks the issuer signature, validity window and subject.
    pub fn verify(
        &self,
        provider: &Provider,
        cert: &Certificate,
        server_name: &str,
        now: u64,
    ) -> Result<(), ChannelError> {
        let issuer = self
            .issuers
            .iter()
            .find(|i| i.name == cert.issuer && i.alg == cert.issuer_alg)
            .ok_or_else(|| ChannelError::SignatureInvalid(format!("unknown issuer `{}`", cert.issuer)))?;
        if !provider.verify(issuer.alg, &issuer.public_key, &cert.tbs()?, &cert.signature)? {
            return Err(ChannelError::SignatureInvalid("certificate signature".into()));
        }
        if now < cert.not_before || now > cert.not_after {
            return Err(ChannelError::SignatureInvalid("certificate expired or not yet valid".into()));
        }
        if !cert.subject.eq_ignore_ascii_case(server_name) {
            return Err(ChannelError::SignatureInvalid(format!(
                "certificate for `{}` presented for `{server_name}`",
                cert.subject
            )));
        }
        Ok(())
    }
}

/// A server's certificate and signing key.
#[derive(Debug, Clone)]
pub struct ServerIdentity {
    pub certificate: Certificate,
    secret_key: Vec<u8>,
}

pub const DEFAULT_CA_NAME: &str = "qsdns test ca";
const ONE_YEAR: u64 = 365 * 24 * 3600;

impl ServerIdentity {
    pub fn new(certificate: Certificate, secret_key: Vec<u8>) -> Self {
        Self { certificate, secret_key }
    }

    pub fn alg(&self) -> AlgorithmId {
        self.certificate.key_alg
    }

    pub(crate) fn secret_key(&self) -> &[u8] {
        &self.secret_key
    }

    pub fn generate(
        provider: &Provider,
        ca: &mut CertificateAuthority,
        subject: &str,
        alg: AlgorithmId,
    ) -> Result<Self, ChannelError> {
        let kp = provider.sig_keygen(alg)?;
        let now = super::unix_now();
        let cert = ca.issue(provider, subject, alg, kp.public, now.saturating_sub(3600), now + ONE_YEAR)?;
        Ok(Self::new(cert, kp.secret))
    }

    /// Identity issued by a fresh CA using the same algorithm, plus a trust
    /// store holding that CA.
    pub fn self_issued(
        provider: &Provider,
        subject: &str,
        alg: AlgorithmId,
    ) -> Result<(Self, TrustStore), ChannelError> {
        let mut ca = CertificateAuthority::generate(provider, DEFAULT_CA_NAME, alg)?;
        let id = Self::generate(provider, &mut ca, subject, alg)?;
        let mut trust = TrustStore::new();
        trust.add(ca.trust_anchor());
        Ok((id, trust))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn issue_and_verify() {
        let p = Provider::simulated();
        let alg = AlgorithmId::lookup("mldsa44").unwrap();
        let (id, trust) = ServerIdentity::self_issued(&p, "dns.example", alg).unwrap();
        let now = super::super::unix_now();
        trust.verify(&p, &id.certificate, "dns.example", now).unwrap();
        assert!(trust.verify(&p, &id.certificate, "other.example", now).is_err());
        assert!(trust.verify(&p, &id.certificate, "dns.example", now + 2 * ONE_YEAR).is_err());
        let mut forged = id.certificate.clone();
        forged.public_key[0] ^= 1;
        assert!(matches!(
            trust.verify(&p, &forged, "dns.example", now),
            Err(ChannelError::SignatureInvalid(_))
        ));
        let reloaded = TrustStore::from_text(&trust.to_text()).unwrap();
        assert_eq!(reloaded.issuers(), trust.issuers());
        let (_, other_trust) = ServerIdentity::self_issued(&p, "dns.example", alg).unwrap();
        assert!(other_trust.verify(&p, &id.certificate, "dns.example", now).is_err());
    }
}
