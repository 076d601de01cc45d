//! Response cache for per-paper reads.

use std::collections::{HashMap, HashSet};
use std::num::NonZeroUsize;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::body::Bytes;
use lru::LruCache;
use paperdesk_core::{Clock, PaperId, Timestamp};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CacheKey {
    pub endpoint: &'static str,
    pub paper_id: PaperId,
    pub view: &'static str,
    /// View parameters (section selector, preview length).
    pub params: String,
}

/// Cache backend. Implementations must never return expired entries; any
/// internal failure should behave like a miss.
pub trait ViewCache: Send + Sync {
    fn get(&self, key: &CacheKey) -> Option<Bytes>;
    fn set(&self, key: CacheKey, value: Bytes);
    fn delete(&self, key: &CacheKey);
    /// Drops every entry of `id`.
    fn invalidate_paper(&self, id: &PaperId);
    fn ttl(&self) -> Duration;
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Pass-through backend.
#[derive(Debug, Default)]
pub struct NoCache;

impl ViewCache for NoCache {
    fn get(&self, _key: &CacheKey) -> Option<Bytes> {
        None
    }
    fn set(&self, _key: CacheKey, _value: Bytes) {}
    fn delete(&self, _key: &CacheKey) {}
    fn invalidate_paper(&self, _id: &PaperId) {}
    fn ttl(&self) -> Duration {
        Duration::ZERO
    }
    fn len(&self) -> usize {
        0
    }
}

struct Inner {
    entries: LruCache<CacheKey, (Bytes, Timestamp)>,
    by_paper: HashMap<PaperId, HashSet<CacheKey>>,
}

impl Inner {
    fn forget(&mut self, key: &CacheKey) {
        if let Some(keys) = self.by_paper.get_mut(&key.paper_id) {
            keys.remove(key);
            if keys.is_empty() {
                self.by_paper.remove(&key.paper_id);
            }
        }
    }
}

/// In-process LRU with a time-to-live.
pub struct LruTtlCache {
    inner: Mutex<Inner>,
    ttl: Duration,
    clock: Arc<dyn Clock>,
}

impl LruTtlCache {
    pub fn new(capacity: usize, ttl: Duration, clock: Arc<dyn Clock>) -> Self {
        let cap = NonZeroUsize::new(capacity.max(1)).unwrap();
        LruTtlCache {
            inner: Mutex::new(Inner {
                entries: LruCache::new(cap),
                by_paper: HashMap::new(),
            }),
            ttl,
            clock,
        }
    }

    fn lock(&self) -> Option<std::sync::MutexGuard<'_, Inner>> {
        self.inner.lock().ok()
    }
}

impl ViewCache for LruTtlCache {
    fn get(&self, key: &CacheKey) -> Option<Bytes> {
        let mut g = self.lock()?;
        let (bytes, inserted) = g.entries.get(key)?.clone();
        let age = self.clock.now().unix() - inserted.unix();
        if age < 0 || age as u64 >= self.ttl.as_secs() {
            g.entries.pop(key);
            g.forget(key);
            return None;
        }
        Some(bytes)
    }

    fn set(&self, key: CacheKey, value: Bytes) {
        let Some(mut g) = self.lock() else { return };
        let now = self.clock.now();
        g.by_paper
            .entry(key.paper_id.clone())
            .or_default()
            .insert(key.clone());
        if let Some((evicted, _)) = g.entries.push(key.clone(), (value, now)) {
            if evicted != key {
                g.forget(&evicted);
            }
        }
    }

    fn delete(&self, key: &CacheKey) {
        if let Some(mut g) = self.lock() {
            g.entries.pop(key);
            g.forget(key);
        }
    }

    fn invalidate_paper(&self, id: &PaperId) {
        if let Some(mut g) = self.lock() {
            for k in g.by_paper.remove(id).unwrap_or_default() {
                g.entries.pop(&k);
            }
        }
    }

    fn ttl(&self) -> Duration {
        self.ttl
    }

    fn len(&self) -> usize {
        self.lock().map_or(0, |g| g.entries.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use paperdesk_core::FixedClock;

    fn key(id: &str, view: &'static str) -> CacheKey {
        CacheKey {
            endpoint: "arxiv",
            paper_id: PaperId::arxiv(id).unwrap(),
            view,
            params: String::new(),
        }
    }

    fn setup(cap: usize) -> (Arc<FixedClock>, LruTtlCache) {
        let clock = Arc::new(FixedClock::new("2025-01-01T00:00:00".parse().unwrap()));
        let c = LruTtlCache::new(cap, Duration::from_secs(3600), clock.clone());
        (clock, c)
    }

    #[test]
    fn entries_expire_at_ttl() {
        let (clock, c) = setup(10);
        c.set(key("2401.00001", "head"), Bytes::from_static(b"x"));
        clock.advance_secs(3599);
        assert_eq!(
            c.get(&key("2401.00001", "head")).as_deref(),
            Some(&b"x"[..])
        );
        clock.advance_secs(1);
        assert_eq!(c.get(&key("2401.00001", "head")), None);
        assert!(c.is_empty());
    }

    #[test]
    fn eviction_is_least_recently_used() {
        let (_, c) = setup(2);
        c.set(key("2401.00001", "head"), Bytes::from_static(b"1"));
        c.set(key("2401.00002", "head"), Bytes::from_static(b"2"));
        c.get(&key("2401.00001", "head"));
        c.set(key("2401.00003", "head"), Bytes::from_static(b"3"));
        assert!(c.get(&key("2401.00002", "head")).is_none());
        assert!(c.get(&key("2401.00001", "head")).is_some());
        assert_eq!(c.len(), 2);
    }

    #[test]
    fn paper_invalidation_drops_all_views() {
        let (_, c) = setup(10);
        c.set(key("2401.00001", "head"), Bytes::from_static(b"h"));
        c.set(key("2401.00001", "raw"), Bytes::from_static(b"r"));
        c.set(key("2401.00002", "head"), Bytes::from_static(b"o"));
        c.invalidate_paper(&PaperId::arxiv("2401.00001").unwrap());
        assert_eq!(c.len(), 1);
        assert!(c.get(&key("2401.00002", "head")).is_some());
        c.delete(&key("2401.00002", "head"));
        assert!(c.is_empty());
    }
}
