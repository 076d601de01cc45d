//! Lexical, dense and hybrid retrieval over compact surrogates (title,
//! abstract and section TL;DRs) with attribute filters and pagination.

pub mod dense;
pub mod fusion;
pub mod index;
pub mod lexical;
pub mod query;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dense::{Embedder, HashedEmbedder};
pub use fusion::{reciprocal_rank_fusion, RRF_K};
pub use index::{IndexManifest, SearchIndex, Snapshot};
pub use lexical::tokenize;
pub use query::{
    apply_filters, FilterSet, Mode, ModeScores, Page, RankedHit, RetrievalQuery, SearchResults,
};

use crate::id::PaperId;
use crate::record::PaperRecord;
use crate::time::Timestamp;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RetrievalError {
    #[error("invalid filter: {0}")]
    InvalidFilter(String),
    #[error("invalid query: {0}")]
    InvalidQuery(String),
    #[error("embedder mismatch: index built with '{index}', query uses '{query}'")]
    EmbedderVersionMismatch { index: String, query: String },
    #[error("index storage: {0}")]
    Storage(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Surrogate {
    pub paper_id: PaperId,
    pub text: String,
    pub categories: Vec<String>,
    /// Author names.
    pub authors: Vec<String>,
    pub publish_at: Timestamp,
    pub citations: Option<u64>,
    pub venue: Option<String>,
}

impl Surrogate {
    pub fn from_record(record: &PaperRecord) -> Self {
        let mut text = format!("{} {}", record.title(), record.abstract_text());
        for tldr in record.sections().iter().filter_map(|s| s.tldr()) {
            text.push(' ');
            text.push_str(tldr);
        }
        Surrogate {
            paper_id: record.paper_id().clone(),
            text,
            categories: record.categories().to_vec(),
            authors: record.authors().iter().map(|a| a.name.clone()).collect(),
            publish_at: record.publish_at(),
            citations: record.external().and_then(|e| e.citations),
            venue: record.external().and_then(|e| e.venue.clone()),
        }
    }
}
