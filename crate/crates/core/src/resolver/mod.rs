//! Stub and simulated-recursive resolution over a local zone store, plus the
//! DoT/DoH/UDP server and a one-shot client.

mod cache;
mod client;
mod resolve;
mod server;
mod zone;

use std::net::SocketAddr;

use thiserror::Error;

use crate::channel::ChannelError;
use crate::dns::WireError;
use crate::dnssec::DnssecError;
use crate::transport::TransportError;

pub use cache::{Cache, CacheEntry, CacheKey};
pub use client::{query_once, query_session, query_udp, QueryOutcome};
pub use resolve::{ResolutionTrace, ResolveMode, Resolver, ResolverOptions, ServerRole, TraceStep};
pub use server::{serve, RunningServer, ServeConfig, ServerStats, StatsSnapshot};
pub use zone::{load_zone, load_zone_text, Lookup, ZoneStore, DEFAULT_ZONE};

#[derive(Debug, Error)]
pub enum ResolverError {
    #[error("zone: {0}")]
    Zone(#[from] WireError),
    #[error("dnssec: {0}")]
    Dnssec(#[from] DnssecError),
    #[error("zone has no records")]
    EmptyZone,
    #[error("{0}")]
    Io(String),
    #[error("cannot bind {addr}: {reason}")]
    BindFailure { addr: SocketAddr, reason: String },
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("server answered with {0}")]
    BadResponse(String),
}

#[cfg(test)]
mod tests;
