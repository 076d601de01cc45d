//! Canonical paper records and the data layer around them: ingestion,
//! enrichment, retrieval indexes, record storage and incremental sync.

pub mod enrich;
pub mod fsutil;
pub mod id;
pub mod ingest;
pub mod protocol;
pub mod record;
pub mod retrieval;
pub mod store;
pub mod sync;
pub mod time;
pub mod tokens;
pub mod view;

pub use id::{Corpus, PaperId};
pub use record::{PaperRecord, SchemaViolation};
pub use time::{Clock, FixedClock, SystemClock, Timestamp};
pub use tokens::{TokenEstimator, WordPunctEstimator};
pub use view::{project_view, SectionSelector, ViewError, ViewKind, ViewPayload};
