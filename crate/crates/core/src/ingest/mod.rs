//! Upstream metadata + source artifact → canonical record.
//!
//! The stages are pure given their injected collaborators (feed, fetcher,
//! converter, clock), so re-running ingestion with the same inputs and clock
//! reproduces the record byte for byte.

mod acquire;
mod assemble;
mod feed;
mod normalize;
mod pipeline;
mod segment;

pub use acquire::{
    acquire_artifact, AcquireOptions, ArtifactKind, ArtifactSource, CommandConverter,
    FixtureFetcher, PdfConverter, PreconvertedConverter, SourceArtifact,
};
pub use assemble::{assemble_record, metadata_only_record, PIPELINE_VERSION};
pub use feed::{harvest_metadata, JsonLinesFeed, MalformedEntry, MetadataEntry, MetadataFeed};
pub use normalize::{normalize, normalize_html, normalize_markdown};
pub use pipeline::{build_record, failed_provenance};
pub use segment::{segment_sections, SectionNode, SectionTree};

use thiserror::Error;

use crate::record::SchemaViolation;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("upstream unavailable: {0}")]
    UpstreamUnavailable(String),
    #[error("malformed entry at line {line}: {reason}")]
    MalformedEntry { line: usize, reason: String },
    #[error("conversion failed for {id}: {reason}")]
    ConversionFailed { id: String, reason: String },
    #[error("normalized content is empty")]
    EmptyContent,
    #[error(transparent)]
    SchemaViolation(#[from] SchemaViolation),
}

impl IngestError {
    pub fn is_retryable(&self) -> bool {
        matches!(
            self,
            IngestError::UpstreamUnavailable(_) | IngestError::ConversionFailed { .. }
        )
    }
}
