pub mod crypto;
pub mod dns;
pub mod dnssec;
pub mod channel;
pub mod policy;
pub mod transport;
pub mod resolver;
pub mod bench;
pub mod perf;
