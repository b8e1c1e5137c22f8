use std::collections::{BTreeMap, HashMap};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use crate::dns::{DnsMessage, Name, RecordType};
use crate::dnssec::ValidationOutcome;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CacheKey {
    pub name: Name,
    pub rtype: RecordType,
    pub dnssec_ok: bool,
}

impl CacheKey {
    pub fn new(name: &Name, rtype: RecordType, dnssec_ok: bool) -> Self {
        Self { name: name.to_lowercase(), rtype, dnssec_ok }
    }
}

#[derive(Debug, Clone)]
pub struct CacheEntry {
    pub message: DnsMessage,
    pub outcome: Option<ValidationOutcome>,
    pub expires: Instant,
    tick: u64,
}

#[derive(Debug, Default)]
struct Inner {
    entries: HashMap<CacheKey, CacheEntry>,
    /// Recency order: tick -> key.
    order: BTreeMap<u64, CacheKey>,
    tick: u64,
}

/// LRU response cache honouring the minimum TTL of each message.
#[derive(Debug)]
pub struct Cache {
    capacity: usize,
    inner: Mutex<Inner>,
}

impl Cache {
    pub fn new(capacity: usize) -> Self {
        Self { capacity: capacity.max(1), inner: Mutex::new(Inner::default()) }
    }

    pub fn len(&self) -> usize {
        self.inner.lock().unwrap_or_else(|e| e.into_inner()).entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, key: &CacheKey, now: Instant) -> Option<CacheEntry> {
        let mut inner = self.inner.lock().unwrap_or_else(|e| e.into_inner());
        let inner = &mut *inner;
        let entry = inner.entries.get_mut(key)?;
        if now >= entry.expires {
            let tick = entry.tick;
            inner.entries.remove(key);
            inner.order.remove(&tick);
            return None;
        }
        inner.tick += 1;
        inner.order.remove(&entry.tick);
        entry.tick = inner.tick;
        inner.order.insert(inner.tick, key.clone());
        Some(entry.clone())
    }

    /// Stores `message` unless it is Bogus or carries no records. Returns
    /// whether it was stored.
    pub fn put(&self, key: CacheKey, message: &DnsMessage, outcome: Option<ValidationOutcome>, now: Instant) -> bool {
        if outcome == Some(ValidationOutcome::Bogus) {
            return false;
        }
        let Some(ttl) = message.all_records().map(|r| r.ttl).min() else {
            return false;
        };
        if ttl == 0 {
            return false;
        }
        let mut inner = self.inner.lock().unwrap_or_else(|e| e.into_inner());
        inner.tick += 1;
        let tick = inner.tick;
        if let Some(old) = inner.entries.remove(&key) {
            inner.order.remove(&old.tick);
        }
        while inner.entries.len() >= self.capacity {
            let Some((_, victim)) = inner.order.pop_first() else { break };
            inner.entries.remove(&victim);
        }
        inner.order.insert(tick, key.clone());
        inner.entries.insert(
            key,
            CacheEntry {
                message: message.clone(),
                outcome,
                expires: now + Duration::from_secs(ttl as u64),
                tick,
            },
        );
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dns::{build_query, RData, ResourceRecord};

    fn answer(name: &str, ttl: u32) -> DnsMessage {
        let q = build_query(name, RecordType::A, false).unwrap();
        let mut r = DnsMessage::response_to(&q);
        r.answers.push(ResourceRecord::new(Name::parse(name).unwrap(), ttl, RData::A([192, 0, 2, 1].into())));
        r
    }

    fn key(name: &str) -> CacheKey {
        CacheKey::new(&Name::parse(name).unwrap(), RecordType::A, false)
    }

    #[test]
    fn hit_then_expiry() {
        let c = Cache::new(8);
        let t = Instant::now();
        assert!(c.put(key("a.example"), &answer("a.example", 30), Some(ValidationOutcome::Secure), t));
        assert!(c.get(&key("A.EXAMPLE"), t + Duration::from_secs(29)).is_some());
        assert!(c.get(&key("a.example"), t + Duration::from_secs(30)).is_none());
        assert!(c.is_empty());
    }

    #[test]
    fn bogus_and_empty_never_stored() {
        let c = Cache::new(8);
        let t = Instant::now();
        assert!(!c.put(key("a.example"), &answer("a.example", 30), Some(ValidationOutcome::Bogus), t));
        let q = build_query("b.example", RecordType::A, false).unwrap();
        assert!(!c.put(key("b.example"), &DnsMessage::response_to(&q), None, t));
        assert!(c.is_empty());
    }

    #[test]
    fn least_recently_used_is_evicted() {
        let c = Cache::new(2);
        let t = Instant::now();
        c.put(key("a.example"), &answer("a.example", 60), None, t);
        c.put(key("b.example"), &answer("b.example", 60), None, t);
        assert!(c.get(&key("a.example"), t).is_some());
        c.put(key("c.example"), &answer("c.example", 60), None, t);
        assert!(c.get(&key("b.example"), t).is_none());
        assert!(c.get(&key("a.example"), t).is_some());
        assert_eq!(c.len(), 2);
    }
}
