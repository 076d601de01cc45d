//! Wire-level pieces shared by the HTTP service and its clients: error codes,
//! response envelopes and the query-string encoding of retrieval requests.

use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::record::PaperRecord;
use crate::retrieval::{FilterSet, Mode, Page, RetrievalError, RetrievalQuery, SearchIndex};
use crate::store::RecordStore;
use crate::time::Timestamp;
use crate::view::{project_view, ViewError, ViewKind};

/// Machine-readable error codes with their HTTP status.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ErrorCode {
    Unauthorized,
    UnknownPaper,
    SectionNotFound,
    InvalidView,
    InvalidFilter,
    InvalidQuery,
    UnsupportedView,
    QuotaExceeded,
    NotFound,
    UpstreamUnavailable,
    Internal,
}

impl ErrorCode {
    pub fn status(self) -> u16 {
        match self {
            ErrorCode::Unauthorized => 401,
            ErrorCode::UnknownPaper | ErrorCode::SectionNotFound | ErrorCode::NotFound => 404,
            ErrorCode::InvalidView
            | ErrorCode::InvalidFilter
            | ErrorCode::InvalidQuery
            | ErrorCode::UnsupportedView => 400,
            ErrorCode::QuotaExceeded => 429,
            ErrorCode::UpstreamUnavailable => 503,
            ErrorCode::Internal => 500,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::Unauthorized => "Unauthorized",
            ErrorCode::UnknownPaper => "UnknownPaper",
            ErrorCode::SectionNotFound => "SectionNotFound",
            ErrorCode::InvalidView => "InvalidView",
            ErrorCode::InvalidFilter => "InvalidFilter",
            ErrorCode::InvalidQuery => "InvalidQuery",
            ErrorCode::UnsupportedView => "UnsupportedView",
            ErrorCode::QuotaExceeded => "QuotaExceeded",
            ErrorCode::NotFound => "NotFound",
            ErrorCode::UpstreamUnavailable => "UpstreamUnavailable",
            ErrorCode::Internal => "Internal",
        }
    }
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Body of every non-2xx response: `{"status":"error","error":{...}}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: ErrorCode,
    pub message: String,
}

fn split_list(v: &str) -> impl Iterator<Item = String> + '_ {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
}

/// Builds a retrieval query from `q`, `mode`, `categories`, `authors`,
/// `from`, `to`, `min_citations`, `venue`, `offset` and `limit` parameters.
/// List parameters are comma separated and may repeat.
pub fn retrieval_query_from_params<'a>(
    params: impl IntoIterator<Item = (&'a str, &'a str)>,
) -> Result<RetrievalQuery, RetrievalError> {
    let mut q = None;
    let mut mode = Mode::Hybrid;
    let mut filters = FilterSet::default();
    let (mut offset, mut limit) = (0usize, crate::retrieval::query::DEFAULT_LIMIT);
    let bad = |k: &str, v: &str| RetrievalError::InvalidFilter(format!("bad value for {k}: '{v}'"));
    for (k, v) in params {
        match k {
            "q" => q = Some(v.to_string()),
            "mode" => mode = v.parse()?,
            "categories" | "category" => filters.categories.extend(split_list(v)),
            "authors" | "author" => filters.authors.extend(split_list(v)),
            "from" => filters.publish_from = Some(v.parse::<Timestamp>().map_err(|_| bad(k, v))?),
            "to" => {
                filters.publish_to = Some(Timestamp::parse_end_bound(v).map_err(|_| bad(k, v))?)
            }
            "min_citations" => {
                filters.min_citations = Some(v.trim().parse().map_err(|_| bad(k, v))?)
            }
            "venue" => {
                filters.venue_contains = Some(v.to_string()).filter(|s| !s.trim().is_empty())
            }
            "offset" => {
                offset = v
                    .trim()
                    .parse()
                    .map_err(|_| RetrievalError::InvalidQuery(format!("bad offset '{v}'")))?
            }
            "limit" => {
                limit = v
                    .trim()
                    .parse()
                    .map_err(|_| RetrievalError::InvalidQuery(format!("bad limit '{v}'")))?
            }
            _ => {}
        }
    }
    let q = q.ok_or_else(|| RetrievalError::InvalidQuery("missing q".into()))?;
    filters.validate()?;
    Ok(RetrievalQuery::new(mode, q)
        .with_filters(filters)
        .with_page(Page::new(offset, limit)?))
}

/// Inverse of [`retrieval_query_from_params`].
pub fn retrieval_query_to_params(query: &RetrievalQuery) -> Vec<(String, String)> {
    let mut out = vec![
        ("q".to_string(), query.q.clone()),
        ("mode".to_string(), query.mode.to_string()),
    ];
    let f = &query.filters;
    if !f.categories.is_empty() {
        out.push(("categories".into(), f.categories.join(",")));
    }
    for a in &f.authors {
        out.push(("authors".into(), a.clone()));
    }
    if let Some(t) = f.publish_from {
        out.push(("from".into(), t.to_string()));
    }
    if let Some(t) = f.publish_to {
        out.push(("to".into(), t.to_string()));
    }
    if let Some(c) = f.min_citations {
        out.push(("min_citations".into(), c.to_string()));
    }
    if let Some(v) = &f.venue_contains {
        out.push(("venue".into(), v.clone()));
    }
    out.push(("offset".into(), query.page.offset.to_string()));
    out.push(("limit".into(), query.page.limit.to_string()));
    out
}

/// `{status, data, provenance, budget}`.
pub fn envelope(data: Value, provenance: Value, budget: Value) -> Value {
    json!({"status": "ok", "data": data, "provenance": provenance, "budget": budget})
}

pub fn record_provenance(r: &PaperRecord) -> Value {
    let p = r.provenance();
    json!({
        "src_url": r.src_url(),
        "source_type": p.source_type,
        "extraction_time": p.extraction_time,
        "update_time": p.update_time,
        "pipeline_version": p.pipeline_version,
    })
}

pub fn view_envelope(
    r: &PaperRecord,
    view: &ViewKind,
    preview_len: usize,
) -> Result<Value, ViewError> {
    let payload = project_view(r, view, preview_len)?;
    let budget = serde_json::to_value(r.budget(preview_len)).expect("budget hints serialize");
    Ok(envelope(payload.data, record_provenance(r), budget))
}

/// Counters of a paper that was never aggregated read as zeros without `as_of`.
pub fn trending_envelope(r: &PaperRecord) -> Value {
    let mut data = serde_json::Map::new();
    data.insert("arxiv_id".into(), json!(r.paper_id().as_str()));
    if let Value::Object(m) =
        serde_json::to_value(r.trending().cloned().unwrap_or_default()).unwrap()
    {
        data.extend(m);
    }
    envelope(Value::Object(data), record_provenance(r), Value::Null)
}

/// Ranked hits joined with their brief fields from `store`.
pub fn retrieve_envelope(
    index: &SearchIndex,
    store: &dyn RecordStore,
    q: &RetrievalQuery,
) -> Result<Value, RetrievalError> {
    let snapshot = index.snapshot();
    let results = index.search(q)?;
    let mut hits = Vec::with_capacity(results.hits.len());
    for h in &results.hits {
        let mut hit = serde_json::Map::new();
        hit.insert("arxiv_id".into(), json!(h.paper_id.as_str()));
        hit.insert("rank".into(), json!(h.rank));
        hit.insert("score".into(), json!(h.score));
        hit.insert(
            "mode_scores".into(),
            serde_json::to_value(h.mode_scores).unwrap(),
        );
        let record = store
            .get(&h.paper_id)
            .map_err(|e| RetrievalError::Storage(e.to_string()))?;
        if let Some(r) = record {
            hit.insert("title".into(), json!(r.title()));
            hit.insert("abstract".into(), json!(r.abstract_text()));
            if let Some(t) = r.tldr() {
                hit.insert("tldr".into(), json!(t));
            }
            hit.insert("categories".into(), json!(r.categories()));
            hit.insert("publish_at".into(), json!(r.publish_at()));
            hit.insert("src_url".into(), json!(r.src_url()));
        }
        hits.push(Value::Object(hit));
    }
    let data = json!({
        "q": q.q,
        "mode": q.mode,
        "total": results.total,
        "offset": q.page.offset,
        "limit": q.page.limit,
        "hits": hits,
    });
    let provenance = json!({
        "embedder": snapshot.embedder_tag(),
        "index_generation": snapshot.generation(),
        "index_built_at": snapshot.built_at(),
    });
    Ok(envelope(data, provenance, Value::Null))
}
