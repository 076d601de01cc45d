//! Scholarly-metadata lookups and social attention signals.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::Deserialize;

use super::EnrichError;
use crate::id::PaperId;
use crate::record::{ExternalContext, TrendingSignal};
use crate::time::Timestamp;

#[derive(Debug, Clone, Default, PartialEq, Eq, Deserialize)]
pub struct ScholarlyRecord {
    #[serde(default)]
    pub citations: Option<u64>,
    #[serde(default)]
    pub venue: Option<String>,
    #[serde(default)]
    pub journal_name: Option<String>,
}

pub trait ScholarlyClient: Send + Sync {
    /// Short provider name recorded as `linked_source`.
    fn provider(&self) -> &str;
    /// `Ok(None)` when the provider does not know the paper.
    fn lookup(&self, id: &PaperId) -> Result<Option<ScholarlyRecord>, EnrichError>;
}

/// Context for `id`; `None` when the provider has nothing on it.
pub fn fetch_external_context(
    id: &PaperId,
    client: &dyn ScholarlyClient,
) -> Result<Option<ExternalContext>, EnrichError> {
    let Some(rec) = client.lookup(id)? else {
        return Ok(None);
    };
    if rec.citations.is_none() && rec.venue.is_none() && rec.journal_name.is_none() {
        return Ok(None);
    }
    Ok(Some(ExternalContext {
        citations: rec.citations,
        venue: rec.venue,
        journal_name: rec.journal_name,
        linked_source: client.provider().to_string(),
    }))
}

/// Reads a JSON object keyed by bare paper id.
#[derive(Debug, Clone, Default)]
pub struct FixtureScholarly {
    provider: String,
    records: HashMap<String, ScholarlyRecord>,
}

impl FixtureScholarly {
    pub fn load(path: &Path) -> Result<Self, EnrichError> {
        let text = fs::read_to_string(path)
            .map_err(|e| EnrichError::UpstreamUnavailable(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, EnrichError> {
        let records = serde_json::from_str(text)
            .map_err(|e| EnrichError::UpstreamUnavailable(e.to_string()))?;
        Ok(Self {
            provider: "fixture-scholarly".into(),
            records,
        })
    }
}

impl ScholarlyClient for FixtureScholarly {
    fn provider(&self) -> &str {
        &self.provider
    }

    fn lookup(&self, id: &PaperId) -> Result<Option<ScholarlyRecord>, EnrichError> {
        Ok(self.records.get(id.as_str()).cloned())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct SocialPost {
    pub text: String,
    #[serde(default)]
    pub views: u64,
    #[serde(default)]
    pub likes: u64,
    #[serde(default)]
    pub reposts: u64,
}

pub trait SocialSearch: Send + Sync {
    /// Posts whose text contains `needle`.
    fn search(&self, needle: &str) -> Result<Vec<SocialPost>, EnrichError>;
}

/// Reads a JSON array of posts.
#[derive(Debug, Clone, Default)]
pub struct FixtureSocial {
    posts: Vec<SocialPost>,
}

impl FixtureSocial {
    pub fn load(path: &Path) -> Result<Self, EnrichError> {
        let text = fs::read_to_string(path)
            .map_err(|e| EnrichError::UpstreamUnavailable(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, EnrichError> {
        let posts = serde_json::from_str(text)
            .map_err(|e| EnrichError::UpstreamUnavailable(e.to_string()))?;
        Ok(Self { posts })
    }
}

impl SocialSearch for FixtureSocial {
    fn search(&self, needle: &str) -> Result<Vec<SocialPost>, EnrichError> {
        Ok(self
            .posts
            .iter()
            .filter(|p| p.text.contains(needle))
            .cloned()
            .collect())
    }
}

/// Sums counters over posts mentioning the paper's landing URL (with or
/// without scheme), merged with `previous` so counters never decrease.
pub fn aggregate_trending(
    id: &PaperId,
    social: &dyn SocialSearch,
    previous: Option<&TrendingSignal>,
    now: Timestamp,
) -> Result<TrendingSignal, EnrichError> {
    let landing = id.landing_url();
    let needle = landing
        .split_once("://")
        .map_or(landing.as_str(), |(_, rest)| rest);
    let posts = social.search(needle)?;
    let fresh = TrendingSignal {
        total_views: posts.iter().map(|p| p.views).sum(),
        total_likes: posts.iter().map(|p| p.likes).sum(),
        total_reposts: posts.iter().map(|p| p.reposts).sum(),
        as_of: Some(now),
    };
    Ok(match previous {
        Some(prev) => prev.merged(&fresh),
        None => fresh,
    })
}
