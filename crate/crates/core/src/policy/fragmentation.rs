use crate::dns::{encode_message, DnsMessage, WireError};
use crate::transport::TransportKind;

/// Largest DNS message any transport can carry.
pub const MAX_MESSAGE: usize = 65535;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GuardDecision {
    Pass,
    /// Send a truncated response with TC set so the client retries over a
    /// stream transport.
    TruncateAndFlag,
    Reject,
}

pub fn fragmentation_guard(
    message_len: usize,
    transport: TransportKind,
    advertised_max: u16,
) -> GuardDecision {
    if message_len > MAX_MESSAGE {
        return GuardDecision::Reject;
    }
    match transport {
        TransportKind::UdpPlain if message_len > advertised_max as usize => {
            GuardDecision::TruncateAndFlag
        }
        _ => GuardDecision::Pass,
    }
}

/// Encodes `response` with TC set and all record sections emptied, dropping
/// the question and OPT record too if they would still exceed `max`.
pub fn truncated_response(response: &DnsMessage, max: u16) -> Result<Vec<u8>, WireError> {
    let mut tc = response.clone();
    tc.flags.truncated = true;
    tc.answers.clear();
    tc.authority.clear();
    tc.additional.clear();
    let bytes = encode_message(&tc)?;
    if bytes.len() <= max as usize {
        return Ok(bytes);
    }
    tc.edns = None;
    let bytes = encode_message(&tc)?;
    if bytes.len() <= max as usize {
        return Ok(bytes);
    }
    tc.questions.clear();
    encode_message(&tc)
}
