use std::fs;
use std::path::PathBuf;

use serde::Deserialize;
use tracing::warn;

use super::IngestError;
use crate::id::{Corpus, PaperId};
use crate::record::AuthorEntry;
use crate::time::Timestamp;

/// Official metadata for one paper as delivered by the upstream listing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetadataEntry {
    pub paper_id: PaperId,
    pub title: String,
    pub abstract_text: String,
    pub authors: Vec<AuthorEntry>,
    pub categories: Vec<String>,
    pub publish_at: Timestamp,
    pub update_at: Timestamp,
    pub src_url: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MalformedEntry {
    pub line: usize,
    pub id: Option<String>,
    pub reason: String,
}

/// Source of metadata listings. Each item is either a parsed entry or a
/// description of why the upstream entry could not be parsed.
pub trait MetadataFeed: Send + Sync {
    fn entries(&self) -> Result<Vec<Result<MetadataEntry, MalformedEntry>>, IngestError>;
}

#[derive(Deserialize)]
#[serde(untagged)]
enum AuthorLine {
    Name(String),
    Entry(AuthorEntry),
}

#[derive(Deserialize)]
struct ManifestLine {
    #[serde(default)]
    corpus: Option<String>,
    #[serde(alias = "arxiv_id", alias = "pmc_id")]
    id: String,
    title: String,
    #[serde(rename = "abstract", default)]
    abstract_text: String,
    #[serde(default)]
    authors: Vec<AuthorLine>,
    #[serde(default)]
    categories: Vec<String>,
    publish_at: String,
    #[serde(default)]
    update_at: Option<String>,
    #[serde(default)]
    src_url: Option<String>,
}

impl MetadataEntry {
    /// Parses one JSON-lines manifest line.
    pub fn from_manifest_line(line: &str) -> Result<Self, (Option<String>, String)> {
        let raw: ManifestLine = serde_json::from_str(line).map_err(|e| {
            let id = serde_json::from_str::<serde_json::Value>(line)
                .ok()
                .and_then(|v| v.get("id").and_then(|i| i.as_str()).map(str::to_string));
            (id, e.to_string())
        })?;
        let id_hint = Some(raw.id.clone());
        let fail = |reason: String| (id_hint.clone(), reason);
        let corpus: Corpus = match raw.corpus.as_deref() {
            None => Corpus::Arxiv,
            Some(c) => c
                .parse()
                .map_err(|e: crate::id::IdError| fail(e.to_string()))?,
        };
        let paper_id = PaperId::new(corpus, raw.id.clone()).map_err(|e| fail(e.to_string()))?;
        if raw.title.trim().is_empty() {
            return Err(fail("title is empty".into()));
        }
        let publish_at: Timestamp = raw
            .publish_at
            .parse()
            .map_err(|e: crate::time::TimestampError| fail(e.to_string()))?;
        let update_at = match raw.update_at {
            Some(u) => u
                .parse()
                .map_err(|e: crate::time::TimestampError| fail(e.to_string()))?,
            None => publish_at,
        };
        if update_at < publish_at {
            return Err(fail(format!(
                "update_at {update_at} precedes publish_at {publish_at}"
            )));
        }
        let authors = raw
            .authors
            .into_iter()
            .map(|a| match a {
                AuthorLine::Name(name) => AuthorEntry::named(name),
                AuthorLine::Entry(e) => e,
            })
            .collect::<Vec<_>>();
        if authors.iter().any(|a| a.name.trim().is_empty()) {
            return Err(fail("author name is empty".into()));
        }
        let src_url = raw.src_url.unwrap_or_else(|| paper_id.landing_url());
        Ok(MetadataEntry {
            paper_id,
            title: raw.title,
            abstract_text: raw.abstract_text,
            authors,
            categories: raw.categories,
            publish_at,
            update_at,
            src_url,
        })
    }
}

/// Local stand-in for the upstream listing: a JSON-lines manifest file with
/// one metadata entry per line. Blank lines are ignored.
#[derive(Debug, Clone)]
pub struct JsonLinesFeed {
    path: PathBuf,
}

impl JsonLinesFeed {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        Self { path: path.into() }
    }

    pub fn parse(text: &str) -> Vec<Result<MetadataEntry, MalformedEntry>> {
        text.lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                MetadataEntry::from_manifest_line(l).map_err(|(id, reason)| MalformedEntry {
                    line: i + 1,
                    id,
                    reason,
                })
            })
            .collect()
    }
}

impl MetadataFeed for JsonLinesFeed {
    fn entries(&self) -> Result<Vec<Result<MetadataEntry, MalformedEntry>>, IngestError> {
        let text = fs::read_to_string(&self.path).map_err(|e| {
            IngestError::UpstreamUnavailable(format!("{}: {e}", self.path.display()))
        })?;
        Ok(Self::parse(&text))
    }
}

/// Entries updated strictly after `since`, ordered by `(update_at, paper_id)`.
/// Malformed entries are logged and skipped.
pub fn harvest_metadata(
    feed: &dyn MetadataFeed,
    since: Timestamp,
) -> Result<Vec<MetadataEntry>, IngestError> {
    let mut out: Vec<MetadataEntry> = feed
        .entries()?
        .into_iter()
        .filter_map(|item| match item {
            Ok(e) => Some(e),
            Err(bad) => {
                warn!(line = bad.line, id = ?bad.id, reason = %bad.reason, "skipping malformed feed entry");
                None
            }
        })
        .filter(|e| e.update_at > since)
        .collect();
    out.sort_by(|a, b| {
        a.update_at
            .cmp(&b.update_at)
            .then_with(|| a.paper_id.cmp(&b.paper_id))
    });
    Ok(out)
}
