//! DNS messages on the wire and a small textual zone format.
//!
//! The encoder never compresses names so message sizes are a pure function of
//! content; the decoder accepts compression pointers.

mod message;
mod name;
mod zonefile;

use thiserror::Error;

pub use message::{
    build_query, build_query_with, decode_message, encode_message, DnsMessage, Edns, Flags,
    Question, RData, Rcode, RecordType, ResourceRecord, CLASS_IN, DEFAULT_EDNS_PAYLOAD, HEADER_LEN,
};
pub(crate) use message::rrsig_prefix;
pub use name::{Name, MAX_LABEL, MAX_NAME};
pub use zonefile::{format_record, format_zone, parse_zone};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WireError {
    #[error("invalid domain name `{0}`")]
    InvalidName(String),
    #[error("malformed message at offset {offset}: {reason}")]
    Malformed { offset: usize, reason: &'static str },
    #[error("compression pointer loop at offset {offset}")]
    CompressionLoop { offset: usize },
    #[error("record cannot be encoded: {0}")]
    OversizeRecord(String),
    #[error("zone line {line}: {message}")]
    ParseError { line: usize, message: String },
}

#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;
    use std::net::{Ipv4Addr, Ipv6Addr};

    fn label() -> impl Strategy<Value = Vec<u8>> {
        proptest::collection::vec(
            prop_oneof![b'a'..=b'z', b'A'..=b'Z', b'0'..=b'9', Just(b'-')],
            1..=20,
        )
    }

    pub(crate) fn name() -> impl Strategy<Value = Name> {
        proptest::collection::vec(label(), 0..5).prop_map(Name::from_labels)
    }

    fn rdata() -> impl Strategy<Value = (RecordType, RData)> {
        let bytes = |max| proptest::collection::vec(any::<u8>(), 0..max);
        prop_oneof![
            any::<[u8; 4]>().prop_map(|b| (RecordType::A, RData::A(Ipv4Addr::from(b)))),
            any::<[u8; 16]>().prop_map(|b| (RecordType::Aaaa, RData::Aaaa(Ipv6Addr::from(b)))),
            name().prop_map(|n| (RecordType::Ns, RData::Ns(n))),
            proptest::collection::vec(bytes(40), 0..3).prop_map(|t| (RecordType::Txt, RData::Txt(t))),
            (any::<u16>(), any::<u8>(), bytes(300)).prop_map(|(f, a, k)| (
                RecordType::Dnskey,
                RData::Dnskey { flags: f, protocol: 3, algorithm: a, public_key: k }
            )),
            (any::<u16>(), any::<u8>(), bytes(48)).prop_map(|(t, a, d)| (
                RecordType::Ds,
                RData::Ds { key_tag: t, algorithm: a, digest_type: 2, digest: d }
            )),
            (any::<u16>(), any::<u32>(), name(), bytes(200)).prop_map(|(tag, ttl, signer, sig)| (
                RecordType::Rrsig,
                RData::Rrsig {
                    type_covered: RecordType::A,
                    algorithm: 15,
                    labels: 2,
                    original_ttl: ttl,
                    expiration: 20,
                    inception: 10,
                    key_tag: tag,
                    signer,
                    signature: sig,
                }
            )),
            (1000u16..2000, bytes(50)).prop_map(|(c, b)| (RecordType::Other(c), RData::Unknown(b))),
        ]
    }

    fn record() -> impl Strategy<Value = ResourceRecord> {
        (name(), any::<u32>(), rdata()).prop_map(|(name, ttl, (rtype, rdata))| ResourceRecord {
            name,
            rtype,
            class: CLASS_IN,
            ttl,
            rdata,
        })
    }

    fn message() -> impl Strategy<Value = DnsMessage> {
        let flags = (any::<u16>()).prop_map(|bits| Flags {
            response: bits & 1 != 0,
            opcode: ((bits >> 1) & 0x0f) as u8,
            authoritative: bits & 0x20 != 0,
            truncated: bits & 0x40 != 0,
            recursion_desired: bits & 0x80 != 0,
            recursion_available: bits & 0x100 != 0,
            authenticated_data: bits & 0x200 != 0,
            checking_disabled: bits & 0x400 != 0,
            rcode: Rcode::from_code((bits >> 11) as u8),
        });
        let question = (name(), rdata()).prop_map(|(name, (qtype, _))| Question {
            name,
            qtype,
            qclass: CLASS_IN,
        });
        let edns = proptest::option::of((512u16..4096, any::<bool>()).prop_map(|(p, d)| Edns {
            udp_payload: p,
            dnssec_ok: d,
            ..Edns::default()
        }));
        (
            any::<u16>(),
            flags,
            proptest::collection::vec(question, 0..2),
            proptest::collection::vec(record(), 0..4),
            proptest::collection::vec(record(), 0..3),
            proptest::collection::vec(record(), 0..3),
            edns,
        )
            .prop_map(|(id, flags, questions, answers, authority, additional, edns)| DnsMessage {
                id,
                flags,
                questions,
                answers,
                authority,
                additional,
                edns,
            })
    }

    proptest! {
        #[test]
        fn decode_inverts_encode(m in message()) {
            let wire = encode_message(&m).unwrap();
            let back = decode_message(&wire).unwrap();
            prop_assert_eq!(&back, &m);
            prop_assert_eq!(encode_message(&back).unwrap(), wire);
        }

        #[test]
        fn decoder_is_total(bytes in proptest::collection::vec(any::<u8>(), 0..600)) {
            let _ = decode_message(&bytes);
        }

        #[test]
        fn decoder_survives_mutation(m in message(), idx in any::<usize>(), val in any::<u8>()) {
            let mut wire = encode_message(&m).unwrap();
            let i = idx % wire.len();
            wire[i] = val;
            let _ = decode_message(&wire);
            wire.truncate(i);
            let _ = decode_message(&wire);
        }
    }
}
