//! Composition of the performance profile from measured components, and the
//! phase-sum models for handshakes and resolutions.

use std::time::Duration;

use thiserror::Error;

use crate::bench::PerfSample;
use crate::channel::PhaseTimings;
use crate::crypto::AlgorithmSuite;
use crate::resolver::ResolutionTrace;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PerfError {
    #[error("samples come from different suites: {0} vs {1}")]
    SuiteMismatch(AlgorithmSuite, AlgorithmSuite),
}

/// A measured sample and the suite it ran under.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuiteSample {
    pub suite: AlgorithmSuite,
    pub sample: PerfSample,
}

/// CPU and memory composed with `max` instead of `+`, since peaks do not
/// add.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakComposition {
    pub cpu_client: f64,
    pub cpu_server: f64,
    pub mem: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileResult {
    /// δ·S_dnssec + S_transport, componentwise.
    pub p_dns: PerfSample,
    pub peak: PeakComposition,
    pub dnssec: bool,
    pub s_dnssec: PerfSample,
    pub s_transport: PerfSample,
    pub suite: AlgorithmSuite,
}

fn scaled_sum(a: &PerfSample, w: f64, b: &PerfSample) -> PerfSample {
    PerfSample {
        t: b.t,
        latency_ms: w * a.latency_ms + b.latency_ms,
        bandwidth_kb: w * a.bandwidth_kb + b.bandwidth_kb,
        cpu_client: w * a.cpu_client + b.cpu_client,
        cpu_server: w * a.cpu_server + b.cpu_server,
        mem: w * a.mem + b.mem,
    }
}

/// Composes a profile. Suites must agree on KEM and signature; the DNSSEC
/// algorithm may differ.
pub fn compose_profile(dnssec: bool, s_dnssec: &SuiteSample, s_transport: &SuiteSample) -> Result<ProfileResult, PerfError> {
    let (a, b) = (s_dnssec.suite, s_transport.suite);
    if a.kem != b.kem || a.sig != b.sig {
        return Err(PerfError::SuiteMismatch(a, b));
    }
    let w = if dnssec { 1.0 } else { 0.0 };
    let (d, t) = (&s_dnssec.sample, &s_transport.sample);
    let peak = if dnssec {
        PeakComposition { cpu_client: d.cpu_client.max(t.cpu_client), cpu_server: d.cpu_server.max(t.cpu_server), mem: d.mem.max(t.mem) }
    } else {
        PeakComposition { cpu_client: t.cpu_client, cpu_server: t.cpu_server, mem: t.mem }
    };
    Ok(ProfileResult {
        p_dns: scaled_sum(d, w, t),
        peak,
        dnssec,
        s_dnssec: *d,
        s_transport: *t,
        suite: if a.dnssec_sig.is_some() { a } else { b },
    })
}

/// DNSSEC-on minus DNSSEC-off, componentwise. Components may come out
/// negative when the difference is below measurement noise.
pub fn marginal(on: &PerfSample, off: &PerfSample) -> PerfSample {
    scaled_sum(off, -1.0, on)
}

/// Sum of every handshake phase.
pub fn phase1_total(t: &PhaseTimings) -> Duration {
    t.t_ch + t.t_sh + t.t_kem + t.t_sig + t.t_kdf + t.t_fin + t.t_term
}

/// Query/response time of every step, validation time when `dnssec`, plus
/// the return time.
pub fn phase2_total(trace: &ResolutionTrace, dnssec: bool) -> Duration {
    let mut total = trace.t_return;
    for s in &trace.steps {
        total += s.t_query + s.t_response;
        if dnssec {
            total += s.t_dnssec;
        }
    }
    total
}

/// (model − measured) / measured · 100; `None` when nothing was measured.
pub fn gap_pct(model: f64, measured: f64) -> Option<f64> {
    (measured != 0.0).then(|| (model - measured) / measured * 100.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::resolver::{ServerRole, TraceStep};
    use proptest::prelude::*;

    fn sample(l: f64, b: f64, c: f64, s: f64, m: f64) -> PerfSample {
        PerfSample { t: 0.0, latency_ms: l, bandwidth_kb: b, cpu_client: c, cpu_server: s, mem: m }
    }

    fn suite(k: &str, s: &str) -> AlgorithmSuite {
        AlgorithmSuite::from_names(k, s).unwrap()
    }

    #[test]
    fn delta_zero_is_transport_exactly() {
        let st = SuiteSample { suite: suite("mlkem512", "mldsa44"), sample: sample(9.1, 10.54, 5.8, 0.5, 0.165) };
        let sd = SuiteSample { suite: st.suite, sample: sample(1.0, 2.92, 6.0, 0.2, 0.141) };
        let p = compose_profile(false, &sd, &st).unwrap();
        assert_eq!(p.p_dns, st.sample);
    }

    #[test]
    fn delta_one_adds_bandwidth() {
        let st = SuiteSample { suite: suite("mlkem512", "mldsa44"), sample: sample(9.1, 10.54, 5.8, 0.5, 0.165) };
        let sd = SuiteSample { suite: st.suite, sample: sample(0.1, 2.92, 6.0, 0.2, 0.141) };
        let p = compose_profile(true, &sd, &st).unwrap();
        assert!((p.p_dns.bandwidth_kb - 13.46).abs() < 1e-9);
        assert!((p.peak.cpu_client - 6.0).abs() < 1e-12);
        assert!((p.p_dns.cpu_client - 11.8).abs() < 1e-9);
    }

    #[test]
    fn mismatched_suites_rejected() {
        let a = SuiteSample { suite: suite("mlkem512", "mldsa44"), sample: PerfSample::ZERO };
        let b = SuiteSample { suite: suite("mlkem512", "falcon512"), sample: PerfSample::ZERO };
        assert!(matches!(compose_profile(true, &a, &b), Err(PerfError::SuiteMismatch(..))));
    }

    #[test]
    fn phase1_sums_fields() {
        assert_eq!(phase1_total(&PhaseTimings::default()), Duration::ZERO);
        let us = Duration::from_micros;
        let t = PhaseTimings { t_ch: us(1), t_sh: us(2), t_kem: us(3), t_sig: us(4), t_kdf: us(5), t_fin: us(6), t_term: us(7) };
        let permuted = PhaseTimings { t_ch: us(7), t_sh: us(6), t_kem: us(5), t_sig: us(4), t_kdf: us(3), t_fin: us(2), t_term: us(1) };
        assert_eq!(phase1_total(&t), us(28));
        assert_eq!(phase1_total(&t), phase1_total(&permuted));
        assert_eq!(phase1_total(&t), t.total());
    }

    fn trace(n: usize) -> ResolutionTrace {
        let us = Duration::from_micros;
        ResolutionTrace {
            steps: (0..n)
                .map(|i| TraceStep { role: ServerRole::Root, zone: ".".into(), t_query: us(10 + i as u64), t_response: us(20), t_dnssec: us(100) })
                .collect(),
            t_return: us(5),
            cache_hit: false,
            outcome: None,
            wall: Duration::ZERO,
        }
    }

    #[test]
    fn phase2_structure() {
        let us = Duration::from_micros;
        assert_eq!(phase2_total(&trace(1), false), us(35));
        assert_eq!(phase2_total(&trace(1), true), us(135));
        assert_eq!(phase2_total(&trace(3), true), us(10 + 11 + 12 + 60 + 300 + 5));
    }

    #[test]
    fn gap() {
        assert!((gap_pct(11.0, 10.0).unwrap() - 10.0).abs() < 1e-9);
        assert_eq!(gap_pct(1.0, 0.0), None);
    }

    fn arb_sample() -> impl Strategy<Value = PerfSample> {
        (0.0..1e4f64, 0.0..1e4f64, 0.0..100f64, 0.0..100f64, 0.0..100f64)
            .prop_map(|(l, b, c, s, m)| sample(l, b, c, s, m))
    }

    proptest! {
        #[test]
        fn composition_is_linear(a in arb_sample(), b in arb_sample(), t in arb_sample(), k in 0.0..10f64) {
            let su = suite("mlkem512", "mldsa44");
            let ss = |s| SuiteSample { suite: su, sample: s };
            let lhs = compose_profile(true, &ss(scaled_sum(&a, 1.0, &b)), &ss(t)).unwrap().p_dns;
            let rhs = scaled_sum(&b, 1.0, &compose_profile(true, &ss(a), &ss(t)).unwrap().p_dns);
            prop_assert!((lhs.bandwidth_kb - rhs.bandwidth_kb).abs() < 1e-6);
            prop_assert!((lhs.latency_ms - rhs.latency_ms).abs() < 1e-6);
            let scaled = PerfSample { bandwidth_kb: a.bandwidth_kb * k, ..a };
            let p = compose_profile(true, &ss(scaled), &ss(t)).unwrap().p_dns;
            prop_assert!((p.bandwidth_kb - (k * a.bandwidth_kb + t.bandwidth_kb)).abs() < 1e-6);
            let m = marginal(&scaled_sum(&a, 1.0, &t), &t);
            prop_assert!((m.bandwidth_kb - a.bandwidth_kb).abs() < 1e-6);
        }
    }
}
