//! Token-authenticated REST access to paper records, with per-token usage
//! accounting, a response cache and built-in agent endpoints.

pub mod auth;
pub mod cache;
pub mod config;
pub mod http;
pub mod ledger;
pub mod service;

use std::sync::Arc;
use std::time::Duration;

use paperdesk_core::retrieval::{HashedEmbedder, SearchIndex};
use paperdesk_core::store::{FileStore, RecordStore};
use paperdesk_core::{Clock, SystemClock};

pub use auth::{ApiToken, TokenRegistry};
pub use cache::{CacheKey, LruTtlCache, NoCache, ViewCache};
pub use config::{Config, ConfigError};
pub use ledger::{UsageLedger, UsageSummary};
pub use service::{
    AccessService, ApiRequest, ApiResponse, LocalApi, ServiceBuilder, ServiceError, ServiceSettings,
};

/// Opens the record store and the persisted index (empty if none) under
/// `config.data_dir`.
pub fn open_data(
    config: &Config,
    clock: Arc<dyn Clock>,
) -> Result<(Arc<FileStore>, Arc<SearchIndex>), String> {
    let store = FileStore::open(config.records_dir()).map_err(|e| e.to_string())?;
    let embedder = Arc::new(HashedEmbedder::default());
    let index_dir = config.index_dir();
    let index = if SearchIndex::read_manifest(&index_dir)
        .map_err(|e| e.to_string())?
        .is_some()
    {
        SearchIndex::load(&index_dir, embedder, clock).map_err(|e| e.to_string())?
    } else {
        SearchIndex::with_clock(embedder, clock)
    };
    Ok((Arc::new(store), Arc::new(index)))
}

/// Wires a service over `store` and `index` as configured.
pub fn build(
    config: &Config,
    store: Arc<dyn RecordStore>,
    index: Arc<SearchIndex>,
    clock: Arc<dyn Clock>,
) -> Result<Arc<AccessService>, String> {
    let tokens = match &config.tokens_file {
        Some(p) => TokenRegistry::load(p)?,
        None => TokenRegistry::default(),
    };
    let b = AccessService::builder(store, index)
        .tokens(tokens)
        .clock(clock.clone())
        .settings(ServiceSettings::from_config(config));
    let b = if config.cache.enabled {
        b.cache(Arc::new(LruTtlCache::new(
            config.cache.capacity,
            Duration::from_secs(config.cache.ttl_secs),
            clock,
        )))
    } else {
        b.no_cache()
    };
    Ok(b.build())
}

pub fn open(config: &Config) -> Result<Arc<AccessService>, String> {
    let clock: Arc<dyn Clock> = Arc::new(SystemClock);
    let (store, index) = open_data(config, clock.clone())?;
    build(config, store, index, clock)
}
