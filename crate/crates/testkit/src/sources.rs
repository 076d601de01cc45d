//! In-memory feed and artifact sources.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::RwLock;

use paperdesk_core::ingest::{
    ArtifactSource, IngestError, MalformedEntry, MetadataEntry, MetadataFeed,
};
use paperdesk_core::PaperId;

/// Artifacts held in maps keyed by paper id.
#[derive(Debug, Default, Clone)]
pub struct MemoryFetcher {
    html: HashMap<PaperId, String>,
    markdown: HashMap<PaperId, String>,
}

impl MemoryFetcher {
    pub fn insert_html(&mut self, id: &PaperId, html: &str) {
        self.html.insert(id.clone(), html.to_string());
    }

    pub fn insert_markdown(&mut self, id: &PaperId, md: &str) {
        self.markdown.insert(id.clone(), md.to_string());
    }

    pub fn remove(&mut self, id: &PaperId) {
        self.html.remove(id);
        self.markdown.remove(id);
    }
}

impl ArtifactSource for MemoryFetcher {
    fn html(&self, id: &PaperId) -> Result<Option<String>, IngestError> {
        Ok(self.html.get(id).cloned())
    }

    fn pdf(&self, _id: &PaperId) -> Result<Option<PathBuf>, IngestError> {
        Ok(None)
    }

    fn markdown(&self, id: &PaperId) -> Result<Option<String>, IngestError> {
        Ok(self.markdown.get(id).cloned())
    }
}

/// Mutable metadata feed with an outage switch.
#[derive(Debug, Default)]
pub struct VecFeed {
    entries: RwLock<Vec<MetadataEntry>>,
    down: AtomicBool,
}

impl VecFeed {
    pub fn new(entries: Vec<MetadataEntry>) -> Self {
        VecFeed {
            entries: RwLock::new(entries),
            down: AtomicBool::new(false),
        }
    }

    /// Adds or replaces an entry by paper id.
    pub fn upsert(&self, entry: MetadataEntry) {
        let mut v = self.entries.write().unwrap();
        v.retain(|e| e.paper_id != entry.paper_id);
        v.push(entry);
    }

    pub fn set_down(&self, down: bool) {
        self.down.store(down, Ordering::SeqCst);
    }
}

impl MetadataFeed for VecFeed {
    fn entries(&self) -> Result<Vec<Result<MetadataEntry, MalformedEntry>>, IngestError> {
        if self.down.load(Ordering::SeqCst) {
            return Err(IngestError::UpstreamUnavailable("feed offline".into()));
        }
        Ok(self
            .entries
            .read()
            .unwrap()
            .iter()
            .cloned()
            .map(Ok)
            .collect())
    }
}
