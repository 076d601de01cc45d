//! The canonical paper record and its fixed-schema JSON form.
//!
//! Serialized keys follow the published header order (`arxiv_id`, `src_url`,
//! `title`, `abstract`, `authors`, `token_count`, `venue`, `journal_name`,
//! `citations`, `sections`, `categories`, `publish_at`, `keywords`, `tldr`,
//! `github_url`) followed by the extension keys `update_at`,
//! `external_source`, `resource_links`, `trending`, `provenance` and `body`.
//! Optional fields are omitted when absent. Section entries carry a `span`
//! of Unicode scalar offsets into `body` instead of a copy of their text.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::id::{Corpus, PaperId};
use crate::time::Timestamp;
use crate::tokens::TokenEstimator;

pub const MAX_KEYWORDS: usize = 5;
pub const DEFAULT_PREVIEW_LEN: usize = 10_000;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SchemaViolation {
    #[error("{0} must not be empty")]
    Empty(&'static str),
    #[error("update_at {update_at} precedes publish_at {publish_at}")]
    UpdateBeforePublish {
        publish_at: Timestamp,
        update_at: Timestamp,
    },
    #[error("section {idx}: {reason}")]
    Section { idx: usize, reason: String },
    #[error("{0} keywords exceed the limit of {MAX_KEYWORDS}")]
    TooManyKeywords(usize),
    #[error("section tokens {sections} exceed total {total}")]
    BudgetInconsistent { sections: usize, total: usize },
    #[error("invalid record json: {0}")]
    Json(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuthorEntry {
    pub name: String,
    #[serde(default)]
    pub orgs: Vec<String>,
}

impl AuthorEntry {
    pub fn named(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            orgs: Vec::new(),
        }
    }
}

/// One addressable section. `body` is the exact slice `span` of the record body.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SectionEntry {
    name: String,
    idx: usize,
    depth: u8,
    span: (usize, usize),
    body: String,
    tldr: Option<String>,
    token_count: usize,
}

impl SectionEntry {
    pub fn name(&self) -> &str {
        &self.name
    }
    pub fn idx(&self) -> usize {
        self.idx
    }
    pub fn depth(&self) -> u8 {
        self.depth
    }
    /// Unicode scalar offsets `[start, end)` into the record body.
    pub fn span(&self) -> (usize, usize) {
        self.span
    }
    pub fn body(&self) -> &str {
        &self.body
    }
    pub fn tldr(&self) -> Option<&str> {
        self.tldr.as_deref()
    }
    pub fn token_count(&self) -> usize {
        self.token_count
    }
}

/// Input for building a section: byte range into the body plus counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SectionDraft {
    pub name: String,
    pub depth: u8,
    pub byte_range: std::ops::Range<usize>,
    pub tldr: Option<String>,
    pub token_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BudgetHints {
    pub total_token_count: usize,
    pub total_chars: usize,
    pub per_section_tokens: Vec<usize>,
    pub is_truncatable: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceType {
    Html,
    PdfConverted,
    MarkdownFixture,
    /// Both acquisition paths failed; only metadata views are meaningful.
    MetadataOnly,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub source_type: SourceType,
    pub extraction_time: Timestamp,
    pub update_time: Timestamp,
    pub pipeline_version: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExternalContext {
    pub citations: Option<u64>,
    pub venue: Option<String>,
    pub journal_name: Option<String>,
    pub linked_source: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrendingSignal {
    pub total_views: u64,
    pub total_likes: u64,
    pub total_reposts: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub as_of: Option<Timestamp>,
}

impl TrendingSignal {
    /// Counter-wise maximum; used so successive aggregations never regress.
    pub fn merged(&self, newer: &TrendingSignal) -> TrendingSignal {
        TrendingSignal {
            total_views: self.total_views.max(newer.total_views),
            total_likes: self.total_likes.max(newer.total_likes),
            total_reposts: self.total_reposts.max(newer.total_reposts),
            as_of: newer.as_of.or(self.as_of),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResourceKind {
    Github,
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceLink {
    pub url: String,
    pub kind: ResourceKind,
}

/// Everything needed to build a [`PaperRecord`]; validated by [`PaperRecord::new`].
#[derive(Debug, Clone)]
pub struct RecordDraft {
    pub paper_id: PaperId,
    pub src_url: String,
    pub title: String,
    pub abstract_text: String,
    pub authors: Vec<AuthorEntry>,
    pub categories: Vec<String>,
    pub publish_at: Timestamp,
    pub update_at: Timestamp,
    pub body: String,
    pub sections: Vec<SectionDraft>,
    pub token_count: usize,
    pub tldr: Option<String>,
    pub keywords: Vec<String>,
    pub resource_links: Vec<ResourceLink>,
    pub external: Option<ExternalContext>,
    pub trending: Option<TrendingSignal>,
    pub provenance: Provenance,
}

/// Schema-stable, section-addressable paper object.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PaperRecord {
    paper_id: PaperId,
    src_url: String,
    title: String,
    abstract_text: String,
    authors: Vec<AuthorEntry>,
    categories: Vec<String>,
    publish_at: Timestamp,
    update_at: Timestamp,
    body: String,
    total_chars: usize,
    sections: Vec<SectionEntry>,
    token_count: usize,
    tldr: Option<String>,
    keywords: Vec<String>,
    resource_links: Vec<ResourceLink>,
    external: Option<ExternalContext>,
    trending: Option<TrendingSignal>,
    provenance: Provenance,
}

fn char_offset(body: &str, byte: usize) -> usize {
    body[..byte].chars().count()
}

impl PaperRecord {
    pub fn new(draft: RecordDraft) -> Result<Self, SchemaViolation> {
        if draft.title.trim().is_empty() {
            return Err(SchemaViolation::Empty("title"));
        }
        if draft.src_url.trim().is_empty() {
            return Err(SchemaViolation::Empty("src_url"));
        }
        if draft.authors.iter().any(|a| a.name.trim().is_empty()) {
            return Err(SchemaViolation::Empty("author name"));
        }
        if draft.update_at < draft.publish_at {
            return Err(SchemaViolation::UpdateBeforePublish {
                publish_at: draft.publish_at,
                update_at: draft.update_at,
            });
        }
        if draft.keywords.len() > MAX_KEYWORDS {
            return Err(SchemaViolation::TooManyKeywords(draft.keywords.len()));
        }

        let body = draft.body;
        let mut sections = Vec::with_capacity(draft.sections.len());
        let mut prev_end = 0usize;
        let mut prev_char_end = 0usize;
        for (idx, s) in draft.sections.into_iter().enumerate() {
            let bad = |reason: &str| SchemaViolation::Section {
                idx,
                reason: reason.to_string(),
            };
            let r = s.byte_range;
            if r.start > r.end || r.end > body.len() {
                return Err(bad("span out of bounds"));
            }
            if !body.is_char_boundary(r.start) || !body.is_char_boundary(r.end) {
                return Err(bad("span not on a character boundary"));
            }
            if r.start < prev_end {
                return Err(bad("span overlaps or precedes the previous section"));
            }
            if !(1..=6).contains(&s.depth) {
                return Err(bad("depth must be within 1..=6"));
            }
            let start = prev_char_end + char_offset(&body[prev_end..], r.start - prev_end);
            let end = start + body[r.start..r.end].chars().count();
            prev_end = r.end;
            prev_char_end = end;
            sections.push(SectionEntry {
                name: s.name,
                idx,
                depth: s.depth,
                span: (start, end),
                body: body[r.clone()].to_string(),
                tldr: s.tldr,
                token_count: s.token_count,
            });
        }
        let section_sum: usize = sections.iter().map(|s| s.token_count).sum();
        if section_sum > draft.token_count {
            return Err(SchemaViolation::BudgetInconsistent {
                sections: section_sum,
                total: draft.token_count,
            });
        }
        let total_chars = body.chars().count();
        Ok(Self {
            paper_id: draft.paper_id,
            src_url: draft.src_url,
            title: draft.title,
            abstract_text: draft.abstract_text,
            authors: draft.authors,
            categories: draft.categories,
            publish_at: draft.publish_at,
            update_at: draft.update_at,
            body,
            total_chars,
            sections,
            token_count: draft.token_count,
            tldr: draft.tldr,
            keywords: draft.keywords,
            resource_links: draft.resource_links,
            external: draft.external,
            trending: draft.trending,
            provenance: draft.provenance,
        })
    }

    /// Converts back into a draft (byte ranges recomputed from spans).
    pub fn into_draft(self) -> RecordDraft {
        let sections = self
            .sections
            .iter()
            .map(|s| SectionDraft {
                name: s.name.clone(),
                depth: s.depth,
                byte_range: self.byte_range(s.span),
                tldr: s.tldr.clone(),
                token_count: s.token_count,
            })
            .collect();
        RecordDraft {
            paper_id: self.paper_id,
            src_url: self.src_url,
            title: self.title,
            abstract_text: self.abstract_text,
            authors: self.authors,
            categories: self.categories,
            publish_at: self.publish_at,
            update_at: self.update_at,
            body: self.body,
            sections,
            token_count: self.token_count,
            tldr: self.tldr,
            keywords: self.keywords,
            resource_links: self.resource_links,
            external: self.external,
            trending: self.trending,
            provenance: self.provenance,
        }
    }

    fn byte_range(&self, (start, end): (usize, usize)) -> std::ops::Range<usize> {
        let mut it = self
            .body
            .char_indices()
            .map(|(i, _)| i)
            .chain(std::iter::once(self.body.len()));
        let b_start = it.nth(start).unwrap_or(self.body.len());
        let b_end = if end == start {
            b_start
        } else {
            it.nth(end - start - 1).unwrap_or(self.body.len())
        };
        b_start..b_end
    }

    pub fn paper_id(&self) -> &PaperId {
        &self.paper_id
    }
    pub fn src_url(&self) -> &str {
        &self.src_url
    }
    pub fn title(&self) -> &str {
        &self.title
    }
    pub fn abstract_text(&self) -> &str {
        &self.abstract_text
    }
    pub fn authors(&self) -> &[AuthorEntry] {
        &self.authors
    }
    pub fn categories(&self) -> &[String] {
        &self.categories
    }
    pub fn publish_at(&self) -> Timestamp {
        self.publish_at
    }
    pub fn update_at(&self) -> Timestamp {
        self.update_at
    }
    pub fn body(&self) -> &str {
        &self.body
    }
    pub fn total_chars(&self) -> usize {
        self.total_chars
    }
    pub fn sections(&self) -> &[SectionEntry] {
        &self.sections
    }
    pub fn token_count(&self) -> usize {
        self.token_count
    }
    pub fn tldr(&self) -> Option<&str> {
        self.tldr.as_deref()
    }
    pub fn keywords(&self) -> &[String] {
        &self.keywords
    }
    pub fn resource_links(&self) -> &[ResourceLink] {
        &self.resource_links
    }
    pub fn external(&self) -> Option<&ExternalContext> {
        self.external.as_ref()
    }
    pub fn trending(&self) -> Option<&TrendingSignal> {
        self.trending.as_ref()
    }
    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// First accepted GitHub link, surfaced as `github_url`.
    pub fn github_url(&self) -> Option<&str> {
        self.resource_links
            .iter()
            .find(|l| l.kind == ResourceKind::Github)
            .map(|l| l.url.as_str())
    }

    pub fn budget(&self, preview_len: usize) -> BudgetHints {
        BudgetHints {
            total_token_count: self.token_count,
            total_chars: self.total_chars,
            per_section_tokens: self.sections.iter().map(|s| s.token_count).collect(),
            is_truncatable: self.total_chars > preview_len,
        }
    }

    /// Recomputes every token count with `estimator`.
    pub fn recount_tokens(&mut self, estimator: &dyn TokenEstimator) {
        self.token_count = estimator.estimate(&self.body);
        for s in &mut self.sections {
            s.token_count = estimator.estimate(&s.body);
        }
    }

    pub fn set_tldr(&mut self, tldr: Option<String>) {
        self.tldr = tldr;
    }

    /// Sets section TL;DRs by position; extra entries are ignored.
    pub fn set_section_tldrs(&mut self, tldrs: Vec<Option<String>>) {
        for (s, t) in self.sections.iter_mut().zip(tldrs) {
            s.tldr = t;
        }
    }

    /// Stores at most five keywords.
    pub fn set_keywords(&mut self, mut keywords: Vec<String>) {
        keywords.truncate(MAX_KEYWORDS);
        self.keywords = keywords;
    }

    /// Replaces affiliation lists for authors matched by exact name.
    pub fn set_affiliations(&mut self, affiliations: &[AuthorEntry]) {
        for author in &mut self.authors {
            if let Some(found) = affiliations.iter().find(|a| a.name == author.name) {
                author.orgs = found.orgs.clone();
            }
        }
    }

    pub fn set_resource_links(&mut self, links: Vec<ResourceLink>) {
        self.resource_links = links;
    }

    pub fn set_external(&mut self, external: Option<ExternalContext>) {
        self.external = external;
    }

    pub fn set_trending(&mut self, trending: Option<TrendingSignal>) {
        self.trending = trending;
    }

    pub fn set_provenance(&mut self, provenance: Provenance) {
        self.provenance = provenance;
    }

    /// Canonical compact JSON.
    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string(&RecordWire::from(self)).expect("record serialization is infallible")
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(RecordWire::from(self)).expect("record serialization is infallible")
    }

    pub fn from_json(text: &str) -> Result<Self, SchemaViolation> {
        let wire: RecordWire =
            serde_json::from_str(text).map_err(|e| SchemaViolation::Json(e.to_string()))?;
        wire.try_into()
    }
}

/// Section inventory entry as serialized (no body text).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct SectionWire {
    pub name: String,
    pub idx: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tldr: Option<String>,
    pub token_count: usize,
    #[serde(default = "default_depth")]
    pub depth: u8,
    pub span: (usize, usize),
}

fn default_depth() -> u8 {
    1
}

fn is_empty_slice<T>(v: &[T]) -> bool {
    v.is_empty()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct RecordWire {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arxiv_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pmc_id: Option<String>,
    pub src_url: String,
    pub title: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
    pub authors: Vec<AuthorEntry>,
    pub token_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub venue: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub journal_name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub citations: Option<u64>,
    pub sections: Vec<SectionWire>,
    pub categories: Vec<String>,
    pub publish_at: Timestamp,
    #[serde(default, skip_serializing_if = "is_empty_slice")]
    pub keywords: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tldr: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub github_url: Option<String>,
    pub update_at: Timestamp,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub external_source: Option<String>,
    #[serde(default, skip_serializing_if = "is_empty_slice")]
    pub resource_links: Vec<ResourceLink>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trending: Option<TrendingSignal>,
    pub provenance: Provenance,
    pub body: String,
}

impl From<&PaperRecord> for RecordWire {
    fn from(r: &PaperRecord) -> Self {
        let (arxiv_id, pmc_id) = match r.paper_id.corpus() {
            Corpus::Arxiv => (Some(r.paper_id.as_str().to_string()), None),
            Corpus::Pmc => (None, Some(r.paper_id.as_str().to_string())),
        };
        let ext = r.external.as_ref();
        RecordWire {
            arxiv_id,
            pmc_id,
            src_url: r.src_url.clone(),
            title: r.title.clone(),
            abstract_text: r.abstract_text.clone(),
            authors: r.authors.clone(),
            token_count: r.token_count,
            venue: ext.and_then(|e| e.venue.clone()),
            journal_name: ext.and_then(|e| e.journal_name.clone()),
            citations: ext.and_then(|e| e.citations),
            sections: r
                .sections
                .iter()
                .map(|s| SectionWire {
                    name: s.name.clone(),
                    idx: s.idx,
                    tldr: s.tldr.clone(),
                    token_count: s.token_count,
                    depth: s.depth,
                    span: s.span,
                })
                .collect(),
            categories: r.categories.clone(),
            publish_at: r.publish_at,
            keywords: r.keywords.clone(),
            tldr: r.tldr.clone(),
            github_url: r.github_url().map(str::to_string),
            update_at: r.update_at,
            external_source: ext.map(|e| e.linked_source.clone()),
            resource_links: r.resource_links.clone(),
            trending: r.trending.clone(),
            provenance: r.provenance.clone(),
            body: r.body.clone(),
        }
    }
}

impl TryFrom<RecordWire> for PaperRecord {
    type Error = SchemaViolation;

    fn try_from(w: RecordWire) -> Result<Self, Self::Error> {
        let id_err = |e: crate::id::IdError| SchemaViolation::Json(e.to_string());
        let paper_id = match (w.arxiv_id, w.pmc_id) {
            (Some(a), None) => PaperId::arxiv(a).map_err(id_err)?,
            (None, Some(p)) => PaperId::pmc(p).map_err(id_err)?,
            _ => {
                return Err(SchemaViolation::Json(
                    "exactly one of arxiv_id/pmc_id required".into(),
                ))
            }
        };
        // char offsets -> byte offsets
        let bounds: Vec<usize> = w
            .body
            .char_indices()
            .map(|(i, _)| i)
            .chain(std::iter::once(w.body.len()))
            .collect();
        let mut sections = Vec::with_capacity(w.sections.len());
        for (pos, s) in w.sections.into_iter().enumerate() {
            if s.idx != pos {
                return Err(SchemaViolation::Section {
                    idx: pos,
                    reason: "idx out of sequence".into(),
                });
            }
            let (start, end) = s.span;
            if start > end || end >= bounds.len() {
                return Err(SchemaViolation::Section {
                    idx: pos,
                    reason: "span out of bounds".into(),
                });
            }
            sections.push(SectionDraft {
                name: s.name,
                depth: s.depth,
                byte_range: bounds[start]..bounds[end],
                tldr: s.tldr,
                token_count: s.token_count,
            });
        }
        let external = w.external_source.map(|linked_source| ExternalContext {
            citations: w.citations,
            venue: w.venue,
            journal_name: w.journal_name,
            linked_source,
        });
        let mut resource_links = w.resource_links;
        if let Some(gh) = w.github_url {
            if !resource_links.iter().any(|l| l.url == gh) {
                resource_links.insert(
                    0,
                    ResourceLink {
                        url: gh,
                        kind: ResourceKind::Github,
                    },
                );
            }
        }
        PaperRecord::new(RecordDraft {
            paper_id,
            src_url: w.src_url,
            title: w.title,
            abstract_text: w.abstract_text,
            authors: w.authors,
            categories: w.categories,
            publish_at: w.publish_at,
            update_at: w.update_at,
            body: w.body,
            sections,
            token_count: w.token_count,
            tldr: w.tldr,
            keywords: w.keywords,
            resource_links,
            external,
            trending: w.trending,
            provenance: w.provenance,
        })
    }
}
