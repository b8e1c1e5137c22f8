use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::Mutex;
use std::time::{Duration, Instant};

/// Tokens charged for one secure-channel handshake.
pub const HANDSHAKE_COST: f64 = 1.0;
/// Tokens charged for one query on an established session.
pub const QUERY_COST: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateLimitConfig {
    pub capacity: f64,
    /// Tokens per second.
    pub refill_rate: f64,
    /// Key buckets by the full address tuple instead of the source IP.
    pub per_tuple: bool,
}

impl Default for RateLimitConfig {
    fn default() -> Self {
        Self { capacity: 50.0, refill_rate: 25.0, per_tuple: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RateDecision {
    Allowed,
    Throttled { retry_after: Duration },
}

impl RateDecision {
    pub fn is_allowed(&self) -> bool {
        matches!(self, RateDecision::Allowed)
    }
}

#[derive(Debug, Clone, Copy)]
struct Bucket {
    tokens: f64,
    updated: Instant,
}

/// Token bucket per client identity.
#[derive(Debug)]
pub struct RateLimiter {
    config: RateLimitConfig,
    buckets: Mutex<HashMap<SocketAddr, Bucket>>,
}

impl RateLimiter {
    pub fn new(config: RateLimitConfig) -> Self {
        assert!(config.capacity > 0.0 && config.refill_rate >= 0.0, "invalid rate limit config");
        Self { config, buckets: Mutex::new(HashMap::new()) }
    }

    pub fn config(&self) -> RateLimitConfig {
        self.config
    }

    fn identity(&self, client: SocketAddr) -> SocketAddr {
        if self.config.per_tuple {
            client
        } else {
            SocketAddr::new(client.ip(), 0)
        }
    }

    pub fn check(&self, client: SocketAddr, cost: f64) -> RateDecision {
        self.check_at(client, cost, Instant::now())
    }

    /// Charges `cost` tokens to `client` at time `now`. Times earlier than the
    /// last update do not refill.
    pub fn check_at(&self, client: SocketAddr, cost: f64, now: Instant) -> RateDecision {
        debug_assert!(cost > 0.0);
        let cfg = self.config;
        let mut buckets = self.buckets.lock().unwrap_or_else(|e| e.into_inner());
        let bucket = buckets
            .entry(self.identity(client))
            .or_insert(Bucket { tokens: cfg.capacity, updated: now });
        let elapsed = now.saturating_duration_since(bucket.updated).as_secs_f64();
        bucket.tokens = (bucket.tokens + elapsed * cfg.refill_rate).min(cfg.capacity);
        bucket.updated = bucket.updated.max(now);
        if bucket.tokens >= cost {
            bucket.tokens -= cost;
            RateDecision::Allowed
        } else {
            let missing = cost - bucket.tokens;
            let retry_after = if cfg.refill_rate > 0.0 {
                Duration::from_secs_f64(missing / cfg.refill_rate)
            } else {
                Duration::MAX
            };
            RateDecision::Throttled { retry_after }
        }
    }

    /// Current token count for `client`, without refilling.
    pub fn tokens(&self, client: SocketAddr) -> f64 {
        let buckets = self.buckets.lock().unwrap_or_else(|e| e.into_inner());
        buckets
            .get(&self.identity(client))
            .map_or(self.config.capacity, |b| b.tokens)
    }
}
