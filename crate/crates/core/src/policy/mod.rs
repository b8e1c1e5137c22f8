//! Negotiation policy, per-client rate limiting and the UDP fragmentation
//! guard.

mod fragmentation;
mod rate_limit;

use std::fmt;
use std::str::FromStr;

use crate::crypto::{classify_profile, AlgorithmId, AlgorithmSuite, Classicality, DeploymentClass};

pub use fragmentation::{fragmentation_guard, truncated_response, GuardDecision, MAX_MESSAGE};
pub use rate_limit::{RateDecision, RateLimitConfig, RateLimiter, HANDSHAKE_COST, QUERY_COST};

/// Negotiation strictness, weakest first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub enum PolicyMode {
    #[default]
    AllowLegacy,
    HybridPreferred,
    HybridRequired,
    PqcOnly,
}

impl PolicyMode {
    pub const ALL: [PolicyMode; 4] = [
        PolicyMode::AllowLegacy,
        PolicyMode::HybridPreferred,
        PolicyMode::HybridRequired,
        PolicyMode::PqcOnly,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyMode::AllowLegacy => "allow-legacy",
            PolicyMode::HybridPreferred => "hybrid-preferred",
            PolicyMode::HybridRequired => "hybrid-required",
            PolicyMode::PqcOnly => "pqc-only",
        }
    }

    pub fn to_u8(self) -> u8 {
        self as u8
    }

    pub fn from_u8(v: u8) -> Option<Self> {
        Self::ALL.get(v as usize).copied()
    }

    /// Whether a negotiated (kem, sig) pair satisfies this mode.
    pub fn permits(self, kem: AlgorithmId, sig: AlgorithmId) -> bool {
        match self {
            PolicyMode::AllowLegacy | PolicyMode::HybridPreferred => true,
            PolicyMode::HybridRequired => kem.classicality().quantum_resistant(),
            PolicyMode::PqcOnly => classify_profile(kem, sig) == DeploymentClass::PqcOnly,
        }
    }

    fn kem_acceptable(self, kem: AlgorithmId) -> bool {
        match self {
            PolicyMode::AllowLegacy | PolicyMode::HybridPreferred => true,
            PolicyMode::HybridRequired => kem.classicality().quantum_resistant(),
            PolicyMode::PqcOnly => kem.classicality() == Classicality::PostQuantum,
        }
    }

    fn sig_acceptable(self, sig: AlgorithmId) -> bool {
        match self {
            PolicyMode::PqcOnly => sig.classicality() == Classicality::PostQuantum,
            _ => true,
        }
    }
}

impl fmt::Display for PolicyMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str() == s.to_ascii_lowercase())
            .ok_or_else(|| {
                format!("unknown policy `{s}` (allow-legacy|hybrid-preferred|hybrid-required|pqc-only)")
            })
    }
}

/// Algorithms a client offers, in preference order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Offer {
    pub kems: Vec<AlgorithmId>,
    pub sigs: Vec<AlgorithmId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RejectReason {
    /// Nothing offered meets the mode's post-quantum requirement.
    ClassicalOnlyOffer,
    NoCommonSuite,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RejectReason::ClassicalOnlyOffer => "classical-only-offer",
            RejectReason::NoCommonSuite => "no-common-suite",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Accept(AlgorithmSuite),
    Reject(RejectReason),
}

fn kem_strength(kem: AlgorithmId) -> u8 {
    match kem.classicality() {
        Classicality::Hybrid => 2,
        Classicality::PostQuantum => 1,
        Classicality::Classical => 0,
    }
}

/// Picks the strongest acceptable suite from `offer` that the server also
/// supports. KEMs rank hybrid > post-quantum > classical in every mode;
/// ties and signatures follow the client's order.
pub fn negotiate(
    offer: &Offer,
    mode: PolicyMode,
    server_kems: &[AlgorithmId],
    server_sigs: &[AlgorithmId],
) -> Decision {
    let kems: Vec<AlgorithmId> = offer.kems.iter().copied().filter(|k| mode.kem_acceptable(*k)).collect();
    let sigs: Vec<AlgorithmId> = offer.sigs.iter().copied().filter(|s| mode.sig_acceptable(*s)).collect();
    if kems.is_empty() || sigs.is_empty() {
        return if offer.kems.is_empty() || offer.sigs.is_empty() {
            Decision::Reject(RejectReason::NoCommonSuite)
        } else {
            Decision::Reject(RejectReason::ClassicalOnlyOffer)
        };
    }
    let kem = kems
        .iter()
        .enumerate()
        .filter(|(_, k)| server_kems.contains(k))
        .max_by_key(|(i, k)| (kem_strength(**k), std::cmp::Reverse(*i)))
        .map(|(_, k)| *k);
    let sig = sigs.iter().copied().find(|s| server_sigs.contains(s));
    match (kem, sig) {
        (Some(kem), Some(sig)) if mode.permits(kem, sig) => match AlgorithmSuite::new(kem, sig) {
            Ok(suite) => Decision::Accept(suite),
            Err(_) => Decision::Reject(RejectReason::NoCommonSuite),
        },
        _ => Decision::Reject(RejectReason::NoCommonSuite),
    }
}

/// Offer-only decision: the offer is checked against the mode as if the
/// server supported everything it contains.
pub fn enforce_negotiation(offer: &Offer, mode: PolicyMode) -> Decision {
    negotiate(offer, mode, &offer.kems, &offer.sigs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::Kind;
    use proptest::prelude::*;

    fn id(n: &str) -> AlgorithmId {
        AlgorithmId::lookup(n).unwrap()
    }

    fn offer(kems: &[&str], sigs: &[&str]) -> Offer {
        Offer {
            kems: kems.iter().map(|n| id(n)).collect(),
            sigs: sigs.iter().map(|n| id(n)).collect(),
        }
    }

    #[test]
    fn modes_are_ordered_and_parse() {
        assert!(PolicyMode::AllowLegacy < PolicyMode::HybridPreferred);
        assert!(PolicyMode::HybridRequired < PolicyMode::PqcOnly);
        for m in PolicyMode::ALL {
            assert_eq!(m.as_str().parse::<PolicyMode>().unwrap(), m);
            assert_eq!(PolicyMode::from_u8(m.to_u8()), Some(m));
        }
        assert!("strict".parse::<PolicyMode>().is_err());
    }

    #[test]
    fn classical_offer_rejected_by_strict_modes() {
        let o = offer(&["x25519"], &["ed25519"]);
        for m in [PolicyMode::HybridRequired, PolicyMode::PqcOnly] {
            assert_eq!(enforce_negotiation(&o, m), Decision::Reject(RejectReason::ClassicalOnlyOffer));
        }
        assert!(matches!(enforce_negotiation(&o, PolicyMode::AllowLegacy), Decision::Accept(_)));
    }

    #[test]
    fn strongest_kem_wins_even_when_legacy_allowed() {
        let o = offer(&["x25519", "x25519_mlkem512", "mlkem512"], &["ed25519"]);
        let Decision::Accept(s) = enforce_negotiation(&o, PolicyMode::AllowLegacy) else {
            panic!()
        };
        assert_eq!(s.kem, id("x25519_mlkem512"));
        let Decision::Accept(s) = enforce_negotiation(&o, PolicyMode::HybridRequired) else {
            panic!()
        };
        assert_eq!(s.kem, id("x25519_mlkem512"));
    }

    #[test]
    fn stripped_hybrid_offer_is_rejected() {
        // An on-path attacker removes the post-quantum offers.
        let stripped = offer(&["x25519"], &["mldsa44"]);
        assert_eq!(
            enforce_negotiation(&stripped, PolicyMode::HybridRequired),
            Decision::Reject(RejectReason::ClassicalOnlyOffer)
        );
    }

    #[test]
    fn pqc_only_needs_pq_signature_too() {
        let o = offer(&["mlkem512"], &["ed25519"]);
        assert_eq!(
            enforce_negotiation(&o, PolicyMode::PqcOnly),
            Decision::Reject(RejectReason::ClassicalOnlyOffer)
        );
        let o = offer(&["mlkem512"], &["ed25519", "falcon512"]);
        let Decision::Accept(s) = enforce_negotiation(&o, PolicyMode::PqcOnly) else { panic!() };
        assert_eq!(s.deployment_class, DeploymentClass::PqcOnly);
    }

    #[test]
    fn disjoint_sets_have_no_common_suite() {
        let o = offer(&["mlkem768"], &["mldsa65"]);
        assert_eq!(
            negotiate(&o, PolicyMode::HybridRequired, &[id("mlkem512")], &[id("mldsa65")]),
            Decision::Reject(RejectReason::NoCommonSuite)
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(2000))]

        #[test]
        fn strict_modes_never_accept_classical_key_exchange(
            kem_idx in proptest::collection::vec(0usize..64, 0..6),
            sig_idx in proptest::collection::vec(0usize..64, 0..6),
            strict in any::<bool>(),
        ) {
            let kems: Vec<_> = AlgorithmId::all_of(Kind::Kem).collect();
            let sigs: Vec<_> = AlgorithmId::all_of(Kind::Signature).collect();
            let o = Offer {
                kems: kem_idx.iter().map(|i| kems[i % kems.len()]).collect(),
                sigs: sig_idx.iter().map(|i| sigs[i % sigs.len()]).collect(),
            };
            let mode = if strict { PolicyMode::PqcOnly } else { PolicyMode::HybridRequired };
            if let Decision::Accept(s) = enforce_negotiation(&o, mode) {
                prop_assert!(!s.deployment_class.classical_key_exchange());
                if strict {
                    prop_assert_eq!(s.deployment_class, DeploymentClass::PqcOnly);
                }
            }
        }
    }
}
