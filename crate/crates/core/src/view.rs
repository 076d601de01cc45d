//! Progressive-disclosure projections of a [`PaperRecord`].

use std::fmt;
use std::str::FromStr;

use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::record::PaperRecord;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ViewError {
    #[error("section '{0}' not found")]
    SectionNotFound(String),
    #[error("invalid view: {0}")]
    InvalidView(String),
}

/// A section address: a numeric selector is an index, anything else an exact
/// (case-sensitive) name; the lowest index wins among duplicate names.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum SectionSelector {
    Idx(usize),
    Name(String),
}

impl FromStr for SectionSelector {
    type Err = ViewError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.is_empty() {
            return Err(ViewError::InvalidView("empty section selector".into()));
        }
        if s.bytes().all(|b| b.is_ascii_digit()) {
            return s
                .parse()
                .map(SectionSelector::Idx)
                .map_err(|_| ViewError::InvalidView(format!("section index '{s}' out of range")));
        }
        Ok(SectionSelector::Name(s.to_string()))
    }
}

impl fmt::Display for SectionSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SectionSelector::Idx(i) => write!(f, "{i}"),
            SectionSelector::Name(n) => f.write_str(n),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ViewKind {
    Brief,
    Head,
    Preview,
    Section(SectionSelector),
    Raw,
    Json,
}

impl ViewKind {
    pub const NAMES: [&'static str; 6] = ["brief", "head", "preview", "section", "raw", "json"];

    /// Parses a `type=` value with its optional `section=` companion.
    pub fn parse(kind: &str, section: Option<&str>) -> Result<Self, ViewError> {
        let view = match kind {
            "brief" => ViewKind::Brief,
            "head" => ViewKind::Head,
            "preview" => ViewKind::Preview,
            "raw" => ViewKind::Raw,
            "json" => ViewKind::Json,
            "section" => {
                let sel = section.ok_or_else(|| {
                    ViewError::InvalidView("type=section requires section=".into())
                })?;
                return Ok(ViewKind::Section(sel.parse()?));
            }
            other => {
                return Err(ViewError::InvalidView(format!(
                    "unknown view type '{other}'"
                )))
            }
        };
        Ok(view)
    }

    pub fn name(&self) -> &'static str {
        match self {
            ViewKind::Brief => "brief",
            ViewKind::Head => "head",
            ViewKind::Preview => "preview",
            ViewKind::Section(_) => "section",
            ViewKind::Raw => "raw",
            ViewKind::Json => "json",
        }
    }

    /// Position on the access ladder, cheapest first.
    pub fn cost_rank(&self) -> u8 {
        match self {
            ViewKind::Brief => 0,
            ViewKind::Head => 1,
            ViewKind::Preview => 2,
            ViewKind::Section(_) => 3,
            ViewKind::Raw => 4,
            ViewKind::Json => 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViewPayload {
    pub view: &'static str,
    pub data: Value,
}

fn id_entry(record: &PaperRecord) -> (String, Value) {
    let id = record.paper_id();
    (
        id.corpus().id_key().to_string(),
        Value::String(id.as_str().to_string()),
    )
}

pub fn find_section<'a>(
    record: &'a PaperRecord,
    selector: &SectionSelector,
) -> Option<&'a crate::record::SectionEntry> {
    match selector {
        SectionSelector::Idx(i) => record.sections().get(*i),
        SectionSelector::Name(n) => record.sections().iter().find(|s| s.name() == n),
    }
}

/// Keys of the header-first payload; everything else in the serialized record
/// stays out of `head`.
pub const HEAD_KEYS: [&str; 15] = [
    "arxiv_id",
    "src_url",
    "title",
    "abstract",
    "authors",
    "token_count",
    "venue",
    "journal_name",
    "citations",
    "sections",
    "categories",
    "publish_at",
    "keywords",
    "tldr",
    "github_url",
];

fn head(record: &PaperRecord) -> Value {
    let Value::Object(full) = record.to_json_value() else {
        unreachable!()
    };
    let id_key = record.paper_id().corpus().id_key();
    let mut out = Map::new();
    for (k, v) in full {
        let keep = k == id_key || (k != "arxiv_id" && HEAD_KEYS.contains(&k.as_str()));
        if !keep {
            continue;
        }
        if k == "sections" {
            let inventory = v
                .as_array()
                .into_iter()
                .flatten()
                .map(|s| {
                    let mut s = s.as_object().cloned().unwrap_or_default();
                    s.remove("span");
                    s.remove("depth");
                    Value::Object(s)
                })
                .collect();
            out.insert(k, Value::Array(inventory));
        } else {
            out.insert(k, v);
        }
    }
    Value::Object(out)
}

/// Projects `record` onto one rung of the access ladder.
pub fn project_view(
    record: &PaperRecord,
    view: &ViewKind,
    preview_len: usize,
) -> Result<ViewPayload, ViewError> {
    if preview_len == 0 {
        return Err(ViewError::InvalidView(
            "preview length must be positive".into(),
        ));
    }
    let (id_key, id_val) = id_entry(record);
    let data = match view {
        ViewKind::Brief => {
            let mut m = Map::new();
            m.insert(id_key, id_val);
            m.insert("title".into(), json!(record.title()));
            m.insert("abstract".into(), json!(record.abstract_text()));
            m.insert("categories".into(), json!(record.categories()));
            m.insert("publish_at".into(), json!(record.publish_at()));
            if let Some(t) = record.tldr() {
                m.insert("tldr".into(), json!(t));
            }
            Value::Object(m)
        }
        ViewKind::Head => head(record),
        ViewKind::Preview => {
            let total = record.total_chars();
            let take = preview_len.min(total);
            let end = record
                .body()
                .char_indices()
                .nth(take)
                .map_or(record.body().len(), |(i, _)| i);
            let mut m = Map::new();
            m.insert(id_key, id_val);
            m.insert("preview".into(), json!(&record.body()[..end]));
            m.insert("is_truncated".into(), json!(total > preview_len));
            m.insert("total_chars".into(), json!(total));
            Value::Object(m)
        }
        ViewKind::Section(sel) => {
            let s = find_section(record, sel)
                .ok_or_else(|| ViewError::SectionNotFound(sel.to_string()))?;
            let mut m = Map::new();
            m.insert(id_key, id_val);
            m.insert("name".into(), json!(s.name()));
            m.insert("idx".into(), json!(s.idx()));
            m.insert("depth".into(), json!(s.depth()));
            if let Some(t) = s.tldr() {
                m.insert("tldr".into(), json!(t));
            }
            m.insert("token_count".into(), json!(s.token_count()));
            m.insert("body".into(), json!(s.body()));
            Value::Object(m)
        }
        ViewKind::Raw => {
            let mut m = Map::new();
            m.insert(id_key, id_val);
            m.insert("body".into(), json!(record.body()));
            Value::Object(m)
        }
        ViewKind::Json => record.to_json_value(),
    };
    Ok(ViewPayload {
        view: view.name(),
        data,
    })
}
