use super::feed::MetadataEntry;
use super::segment::SectionTree;
use super::IngestError;
use crate::record::{PaperRecord, Provenance, RecordDraft, SectionDraft, SourceType};
use crate::tokens::TokenEstimator;

pub const PIPELINE_VERSION: &str = concat!("paperdesk-", env!("CARGO_PKG_VERSION"));

/// Builds a pre-enrichment record with budget counts from `estimator`.
pub fn assemble_record(
    meta: &MetadataEntry,
    body: String,
    tree: &SectionTree,
    provenance: Provenance,
    estimator: &dyn TokenEstimator,
) -> Result<PaperRecord, IngestError> {
    let sections = tree
        .sections
        .iter()
        .map(|s| SectionDraft {
            name: s.name.clone(),
            depth: s.depth,
            byte_range: s.body.clone(),
            tldr: None,
            token_count: estimator.estimate(&body[s.body.clone()]),
        })
        .collect();
    let token_count = estimator.estimate(&body);
    let record = PaperRecord::new(RecordDraft {
        paper_id: meta.paper_id.clone(),
        src_url: meta.src_url.clone(),
        title: meta.title.clone(),
        abstract_text: meta.abstract_text.clone(),
        authors: meta.authors.clone(),
        categories: meta.categories.clone(),
        publish_at: meta.publish_at,
        update_at: meta.update_at,
        body,
        sections,
        token_count,
        tldr: None,
        keywords: Vec::new(),
        resource_links: Vec::new(),
        external: None,
        trending: None,
        provenance,
    })?;
    Ok(record)
}

/// Record for a paper whose artifacts could not be converted: metadata only,
/// empty body and no sections.
pub fn metadata_only_record(
    meta: &MetadataEntry,
    mut provenance: Provenance,
) -> Result<PaperRecord, IngestError> {
    provenance.source_type = SourceType::MetadataOnly;
    assemble_record(
        meta,
        String::new(),
        &SectionTree::default(),
        provenance,
        &crate::tokens::WordPunctEstimator,
    )
}
