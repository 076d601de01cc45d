//! Per-token, per-day, per-endpoint request counts.

use std::collections::{BTreeMap, HashMap};
use std::sync::Mutex;

use paperdesk_core::Timestamp;
use serde::Serialize;

#[derive(Debug, Default)]
struct TokenUsage {
    /// day (`YYYY-MM-DD`) → endpoint → count
    days: BTreeMap<String, BTreeMap<String, u64>>,
    in_flight: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct UsageSummary {
    pub days: u32,
    pub from: String,
    pub to: String,
    pub by_endpoint: BTreeMap<String, u64>,
    pub total: u64,
}

#[derive(Debug, Default)]
pub struct UsageLedger {
    inner: Mutex<HashMap<String, TokenUsage>>,
}

pub fn day_of(t: Timestamp) -> String {
    t.date().to_string()
}

impl UsageLedger {
    fn lock(&self) -> std::sync::MutexGuard<'_, HashMap<String, TokenUsage>> {
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Reserves a slot for one request; false when the daily quota is spent
    /// (counting requests still in flight).
    pub fn try_admit(&self, token: &str, day: &str, quota: Option<u64>) -> bool {
        let mut m = self.lock();
        let u = m.entry(token.to_string()).or_default();
        if let Some(q) = quota {
            let used: u64 = u.days.get(day).map_or(0, |e| e.values().sum());
            if used + u.in_flight >= q {
                return false;
            }
        }
        u.in_flight += 1;
        true
    }

    /// Releases an admitted slot, counting it under `endpoint` when given.
    pub fn settle(&self, token: &str, day: &str, endpoint: Option<&str>) {
        let mut m = self.lock();
        let u = m.entry(token.to_string()).or_default();
        u.in_flight = u.in_flight.saturating_sub(1);
        if let Some(e) = endpoint {
            *u.days
                .entry(day.to_string())
                .or_default()
                .entry(e.to_string())
                .or_default() += 1;
        }
    }

    /// Counts for `token` from `days` whole days before `now` through today.
    pub fn summary(&self, token: &str, now: Timestamp, days: u32) -> UsageSummary {
        let to = day_of(now);
        let from = day_of(now.plus_secs(-86_400 * i64::from(days)));
        let mut by_endpoint = BTreeMap::new();
        if let Some(u) = self.lock().get(token) {
            for (_, counts) in u.days.range(from.clone()..=to.clone()) {
                for (k, v) in counts {
                    *by_endpoint.entry(k.clone()).or_default() += v;
                }
            }
        }
        let total = by_endpoint.values().sum();
        UsageSummary {
            days,
            from,
            to,
            by_endpoint,
            total,
        }
    }

    /// Sum of every count ever recorded.
    pub fn grand_total(&self) -> u64 {
        self.lock()
            .values()
            .flat_map(|u| u.days.values())
            .flat_map(|d| d.values())
            .sum()
    }

    pub fn used_on(&self, token: &str, day: &str) -> u64 {
        self.lock()
            .get(token)
            .and_then(|u| u.days.get(day))
            .map_or(0, |d| d.values().sum())
    }
}
