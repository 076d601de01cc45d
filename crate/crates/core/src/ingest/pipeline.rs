use super::acquire::{acquire_artifact, AcquireOptions, ArtifactSource, PdfConverter};
use super::assemble::{assemble_record, PIPELINE_VERSION};
use super::feed::MetadataEntry;
use super::normalize::normalize;
use super::segment::segment_sections;
use super::IngestError;
use crate::record::{PaperRecord, Provenance};
use crate::time::Timestamp;
use crate::tokens::TokenEstimator;

/// acquire → normalize → segment → assemble for one feed entry.
pub fn build_record(
    meta: &MetadataEntry,
    fetcher: &dyn ArtifactSource,
    converter: &dyn PdfConverter,
    opts: &AcquireOptions,
    estimator: &dyn TokenEstimator,
    now: Timestamp,
) -> Result<PaperRecord, IngestError> {
    let artifact = acquire_artifact(&meta.paper_id, fetcher, converter, opts, now)?;
    let body = normalize(&artifact)?;
    let tree = segment_sections(&body);
    let provenance = Provenance {
        source_type: artifact.source_type,
        extraction_time: now,
        update_time: meta.update_at,
        pipeline_version: PIPELINE_VERSION.to_string(),
    };
    assemble_record(meta, body, &tree, provenance, estimator)
}

/// Provenance for a record that never got past acquisition.
pub fn failed_provenance(meta: &MetadataEntry, now: Timestamp) -> Provenance {
    Provenance {
        source_type: crate::record::SourceType::MetadataOnly,
        extraction_time: now,
        update_time: meta.update_at,
        pipeline_version: PIPELINE_VERSION.to_string(),
    }
}
