//! Deep search: hybrid retrieval under attribute filters, then head-view
//! screening against textual constraints.

use paperdesk_core::retrieval::{FilterSet, Mode, Page, RetrievalQuery};
use paperdesk_core::{PaperId, Timestamp, ViewKind};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::api::{data, ApiError, PaperApi};
use crate::policy::Candidate;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchConstraints {
    /// Enforced by the retrieval call and re-checked on the head view.
    #[serde(default)]
    pub filters: FilterSet,
    /// Each must occur (case-insensitively) in the title, abstract, keywords
    /// or TL;DR.
    #[serde(default)]
    pub phrases: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintCheck {
    pub constraint: String,
    pub satisfied: bool,
    /// Head field that satisfied the constraint.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShortlistEntry {
    pub arxiv_id: String,
    pub retrieval_rank: usize,
    pub score: f64,
    pub title: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tldr: Option<String>,
    pub src_url: String,
    pub publish_at: String,
    pub categories: Vec<String>,
    pub matched: Vec<ConstraintCheck>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trending: Option<Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Shortlist {
    pub query: String,
    pub k: usize,
    /// Candidates whose head view was screened.
    pub screened: usize,
    pub candidates: Vec<ShortlistEntry>,
    /// Views read, in order, as `(arxiv_id, view)`.
    pub reads: Vec<(String, String)>,
}

#[derive(Debug, Clone)]
pub struct SearchOptions {
    /// Retrieval hits screened before giving up.
    pub screen_depth: usize,
    pub with_trending: bool,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            screen_depth: 20,
            with_trending: true,
        }
    }
}

const HEADER_FIELDS: [&str; 4] = ["title", "abstract", "keywords", "tldr"];

fn field_text(head: &Value, field: &str) -> String {
    match head.get(field) {
        Some(Value::String(s)) => s.clone(),
        Some(Value::Array(a)) => a
            .iter()
            .filter_map(Value::as_str)
            .collect::<Vec<_>>()
            .join(" | "),
        _ => String::new(),
    }
}

fn str_list(v: &Value, key: &str) -> Vec<String> {
    v.get(key)
        .and_then(Value::as_array)
        .map(|a| {
            a.iter()
                .filter_map(Value::as_str)
                .map(str::to_string)
                .collect()
        })
        .unwrap_or_default()
}

/// Checks every constraint against a head payload.
pub fn screen_head(head: &Value, constraints: &SearchConstraints) -> Vec<ConstraintCheck> {
    let mut out = Vec::new();
    for phrase in &constraints.phrases {
        let needle = phrase.to_lowercase();
        let field = HEADER_FIELDS
            .iter()
            .find(|f| field_text(head, f).to_lowercase().contains(&needle))
            .map(|f| f.to_string());
        out.push(ConstraintCheck {
            constraint: format!("phrase \"{phrase}\""),
            satisfied: field.is_some(),
            field,
        });
    }
    let f = &constraints.filters;
    if !f.categories.is_empty() {
        let cats = str_list(head, "categories");
        let ok = f
            .categories
            .iter()
            .any(|c| cats.iter().any(|x| x.eq_ignore_ascii_case(c)));
        out.push(ConstraintCheck {
            constraint: format!("category in [{}]", f.categories.join(", ")),
            satisfied: ok,
            field: ok.then(|| "categories".into()),
        });
    }
    if f.publish_from.is_some() || f.publish_to.is_some() {
        let at = head
            .get("publish_at")
            .and_then(Value::as_str)
            .and_then(|s| s.parse::<Timestamp>().ok());
        let ok = at.is_some_and(|t| {
            f.publish_from.is_none_or(|a| t >= a) && f.publish_to.is_none_or(|b| t <= b)
        });
        let show = |t: Option<Timestamp>| t.map_or("*".to_string(), |t| t.to_string());
        out.push(ConstraintCheck {
            constraint: format!("published {}..{}", show(f.publish_from), show(f.publish_to)),
            satisfied: ok,
            field: ok.then(|| "publish_at".into()),
        });
    }
    out
}

/// Runs deep search and returns at most `k` candidates satisfying every
/// constraint, in retrieval order. Never reads raw or json views.
pub fn deep_search(
    api: &dyn PaperApi,
    query: &str,
    constraints: &SearchConstraints,
    k: usize,
    opts: &SearchOptions,
) -> Result<Shortlist, ApiError> {
    let depth = opts.screen_depth.clamp(1, 100);
    let q = RetrievalQuery::new(Mode::Hybrid, query)
        .with_filters(constraints.filters.clone())
        .with_page(Page::new(0, depth).expect("valid page"));
    let envelope = api.retrieve(&q)?;
    let hits = Candidate::from_hits(data(&envelope)?);
    let mut out = Shortlist {
        query: query.to_string(),
        k,
        screened: 0,
        candidates: Vec::new(),
        reads: Vec::new(),
    };
    for hit in hits {
        if out.candidates.len() >= k {
            break;
        }
        let head_env = api.view(&hit.paper_id, &ViewKind::Head)?;
        let head = data(&head_env)?;
        out.screened += 1;
        out.reads
            .push((hit.paper_id.as_str().to_string(), "head".into()));
        let matched = screen_head(head, constraints);
        if !matched.iter().all(|c| c.satisfied) {
            continue;
        }
        let trending = if opts.with_trending {
            out.reads
                .push((hit.paper_id.as_str().to_string(), "trending_signal".into()));
            Some(data(&api.trending(&hit.paper_id)?)?.clone())
        } else {
            None
        };
        out.candidates.push(ShortlistEntry {
            arxiv_id: hit.paper_id.as_str().to_string(),
            retrieval_rank: hit.rank,
            score: hit.score,
            title: field_text(head, "title"),
            tldr: head.get("tldr").and_then(Value::as_str).map(str::to_string),
            src_url: field_text(head, "src_url"),
            publish_at: field_text(head, "publish_at"),
            categories: str_list(head, "categories"),
            matched,
            trending,
        });
    }
    Ok(out)
}

impl Shortlist {
    pub fn ids(&self) -> Vec<PaperId> {
        self.candidates
            .iter()
            .filter_map(|c| PaperId::arxiv(&c.arxiv_id).ok())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn screening_reports_fields() {
        let head = json!({
            "title": "Global Memory for Retrieval",
            "abstract": "We study long inputs.",
            "keywords": ["long-context retrieval"],
            "categories": ["cs.CL"],
            "publish_at": "2024-09-09T00:00:00",
        });
        let c = SearchConstraints {
            filters: FilterSet {
                categories: vec!["cs.cl".into()],
                publish_from: Some("2024-09-01".parse().unwrap()),
                publish_to: Some(Timestamp::parse_end_bound("2024-09-30").unwrap()),
                ..FilterSet::default()
            },
            phrases: vec![
                "global memory".into(),
                "Long-Context".into(),
                "graph".into(),
            ],
        };
        let checks = screen_head(&head, &c);
        assert_eq!(checks[0].field.as_deref(), Some("title"));
        assert_eq!(checks[1].field.as_deref(), Some("keywords"));
        assert!(!checks[2].satisfied);
        assert!(checks[3].satisfied && checks[4].satisfied);
    }
}
