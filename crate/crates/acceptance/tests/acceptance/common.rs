use std::sync::Arc;
use std::time::Duration;

use paperdesk_core::retrieval::{HashedEmbedder, SearchIndex};
use paperdesk_core::store::{InstrumentedStore, MemoryStore, RecordStore};
use paperdesk_core::{Clock, FixedClock};
use paperdesk_service::{AccessService, ApiToken, LruTtlCache, ServiceSettings, TokenRegistry};
use paperdesk_testkit::{corpus, fixture_now};

pub fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Builds the fixture records once so no criterion pays for it.
pub fn warm_up() {
    let _ = corpus().records();
}

pub fn clock() -> Arc<FixedClock> {
    Arc::new(FixedClock::new(fixture_now()))
}

pub fn fixture_index(clock: Arc<dyn Clock>) -> Arc<SearchIndex> {
    let store = MemoryStore::new();
    let index = Arc::new(SearchIndex::with_clock(
        Arc::new(HashedEmbedder::default()),
        clock,
    ));
    corpus().load_into(&store, &index);
    index
}

/// The fixture corpus behind a store that counts (and optionally delays) reads.
pub fn fixture_store(read_delay: Duration) -> Arc<InstrumentedStore<MemoryStore>> {
    let store = InstrumentedStore::new(MemoryStore::new(), read_delay);
    for r in corpus().records() {
        store.put(r.clone()).unwrap();
    }
    Arc::new(store)
}

pub const TOKENS: [(&str, Option<u64>); 3] =
    [("alpha", None), ("gamma", None), ("beta", Some(2_000))];

pub fn tokens() -> TokenRegistry {
    TokenRegistry::new(TOKENS.map(|(t, quota)| ApiToken {
        token: t.into(),
        label: t.into(),
        quota,
    }))
}

pub fn settings() -> ServiceSettings {
    ServiceSettings {
        trace_dir: None,
        ..ServiceSettings::default()
    }
}

pub fn service(store: Arc<dyn RecordStore>, cached: bool) -> Arc<AccessService> {
    let clock = clock();
    let index = fixture_index(clock.clone());
    let b = AccessService::builder(store, index)
        .tokens(tokens())
        .clock(clock.clone())
        .settings(settings());
    if cached {
        b.cache(Arc::new(LruTtlCache::new(
            10_000,
            Duration::from_secs(3600),
            clock,
        )))
        .build()
    } else {
        b.no_cache().build()
    }
}
