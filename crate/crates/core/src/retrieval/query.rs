use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{RetrievalError, Surrogate};
use crate::id::PaperId;
use crate::time::Timestamp;

pub const DEFAULT_LIMIT: usize = 10;
pub const MAX_LIMIT: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Lexical,
    Dense,
    Hybrid,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Lexical => "lexical",
            Mode::Dense => "dense",
            Mode::Hybrid => "hybrid",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = RetrievalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "lexical" | "bm25" => Ok(Mode::Lexical),
            "dense" | "vector" => Ok(Mode::Dense),
            "hybrid" => Ok(Mode::Hybrid),
            other => Err(RetrievalError::InvalidQuery(format!(
                "unknown mode '{other}'"
            ))),
        }
    }
}

/// Attribute conditions; every present clause must hold.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterSet {
    /// Any-of, case-insensitive.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub categories: Vec<String>,
    /// All-of, case-insensitive exact name match.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub authors: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub publish_from: Option<Timestamp>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub publish_to: Option<Timestamp>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_citations: Option<u64>,
    /// Case-insensitive substring of the venue.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub venue_contains: Option<String>,
}

impl FilterSet {
    pub fn is_empty(&self) -> bool {
        *self == FilterSet::default()
    }

    pub fn validate(&self) -> Result<(), RetrievalError> {
        if let (Some(from), Some(to)) = (self.publish_from, self.publish_to) {
            if from > to {
                return Err(RetrievalError::InvalidFilter(format!(
                    "publish range {from}..{to} is inverted"
                )));
            }
        }
        Ok(())
    }

    pub fn matches(&self, s: &Surrogate) -> bool {
        if !self.categories.is_empty()
            && !self
                .categories
                .iter()
                .any(|c| s.categories.iter().any(|sc| sc.eq_ignore_ascii_case(c)))
        {
            return false;
        }
        if !self.authors.iter().all(|a| {
            s.authors
                .iter()
                .any(|sa| sa.to_lowercase() == a.to_lowercase())
        }) {
            return false;
        }
        if self.publish_from.is_some_and(|from| s.publish_at < from) {
            return false;
        }
        if self.publish_to.is_some_and(|to| s.publish_at > to) {
            return false;
        }
        if let Some(min) = self.min_citations {
            if s.citations.is_none_or(|c| c < min) {
                return false;
            }
        }
        if let Some(v) = &self.venue_contains {
            let needle = v.to_lowercase();
            if !s
                .venue
                .as_ref()
                .is_some_and(|venue| venue.to_lowercase().contains(&needle))
            {
                return false;
            }
        }
        true
    }
}

/// Keeps candidates satisfying every clause of `filters`.
pub fn apply_filters<'a>(
    candidates: impl IntoIterator<Item = &'a Surrogate>,
    filters: &FilterSet,
) -> Result<Vec<&'a Surrogate>, RetrievalError> {
    filters.validate()?;
    Ok(candidates
        .into_iter()
        .filter(|s| filters.matches(s))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Page {
    pub offset: usize,
    pub limit: usize,
}

impl Default for Page {
    fn default() -> Self {
        Page {
            offset: 0,
            limit: DEFAULT_LIMIT,
        }
    }
}

impl Page {
    pub fn new(offset: usize, limit: usize) -> Result<Self, RetrievalError> {
        if !(1..=MAX_LIMIT).contains(&limit) {
            return Err(RetrievalError::InvalidQuery(format!(
                "limit must be in 1..={MAX_LIMIT}, got {limit}"
            )));
        }
        Ok(Page { offset, limit })
    }

    /// Everything, for internal callers that want the full ordering.
    pub fn all() -> Self {
        Page {
            offset: 0,
            limit: usize::MAX,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalQuery {
    pub mode: Mode,
    pub q: String,
    #[serde(default)]
    pub filters: FilterSet,
    #[serde(default)]
    pub page: Page,
}

impl RetrievalQuery {
    pub fn new(mode: Mode, q: impl Into<String>) -> Self {
        Self {
            mode,
            q: q.into(),
            filters: FilterSet::default(),
            page: Page::default(),
        }
    }

    pub fn with_filters(mut self, filters: FilterSet) -> Self {
        self.filters = filters;
        self
    }

    pub fn with_page(mut self, page: Page) -> Self {
        self.page = page;
        self
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ModeScores {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lexical: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dense: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedHit {
    pub paper_id: PaperId,
    pub score: f64,
    /// 1-based position in the full ordering.
    pub rank: usize,
    pub mode_scores: ModeScores,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResults {
    /// Size of the full ordering before pagination.
    pub total: usize,
    pub hits: Vec<RankedHit>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn demo() -> Surrogate {
        Surrogate {
            paper_id: PaperId::arxiv("2409.05591").unwrap(),
            text: "memory".into(),
            categories: vec!["cs.CL".into(), "cs.AI".into()],
            authors: vec!["Hongjin Qian".into()],
            publish_at: "2024-09-09".parse().unwrap(),
            citations: Some(63),
            venue: Some("The Web Conference".into()),
        }
    }

    #[test]
    fn category_any_of() {
        let f = FilterSet {
            categories: vec!["cs.CL".into(), "q-bio.GN".into()],
            ..Default::default()
        };
        assert!(f.matches(&demo()));
    }

    #[test]
    fn publish_range_excludes() {
        let f = FilterSet {
            publish_from: Some("2024-01-01".parse().unwrap()),
            publish_to: Some(Timestamp::parse_end_bound("2024-06-30").unwrap()),
            ..Default::default()
        };
        assert!(!f.matches(&demo()));
    }

    #[test]
    fn authors_all_of_case_insensitive() {
        let one = FilterSet {
            authors: vec!["hongjin qian".into()],
            ..Default::default()
        };
        assert!(one.matches(&demo()));
        let two = FilterSet {
            authors: vec!["hongjin qian".into(), "Someone Else".into()],
            ..Default::default()
        };
        assert!(!two.matches(&demo()));
    }

    #[test]
    fn citations_and_venue() {
        let ok = FilterSet {
            min_citations: Some(50),
            venue_contains: Some("web conf".into()),
            ..Default::default()
        };
        assert!(ok.matches(&demo()));
        let mut s = demo();
        s.citations = None;
        assert!(!ok.matches(&s));
    }

    #[test]
    fn inverted_range_rejected() {
        let f = FilterSet {
            publish_from: Some("2024-02-01".parse().unwrap()),
            publish_to: Some("2024-01-01".parse().unwrap()),
            ..Default::default()
        };
        assert!(matches!(
            f.validate(),
            Err(RetrievalError::InvalidFilter(_))
        ));
    }

    #[test]
    fn page_bounds() {
        assert!(Page::new(0, 0).is_err());
        assert!(Page::new(0, 101).is_err());
        assert_eq!(Page::new(20, 100).unwrap().offset, 20);
        assert_eq!(Page::default().limit, 10);
    }
}
