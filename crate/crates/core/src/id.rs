//! Corpus-qualified paper identifiers.

use std::fmt;
use std::str::FromStr;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

static ARXIV_MODERN: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^\d{4}\.\d{4,5}(v\d+)?$").unwrap());
static ARXIV_LEGACY: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^[a-z][a-z-]*(\.[A-Z]{2})?/\d{7}(v\d+)?$").unwrap());
static PMC: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^PMC\d+$").unwrap());

#[derive(Debug, Error, PartialEq, Eq)]
pub enum IdError {
    #[error("empty identifier")]
    Empty,
    #[error("'{id}' is not a valid {corpus} identifier")]
    Grammar { corpus: Corpus, id: String },
    #[error("unknown corpus '{0}'")]
    UnknownCorpus(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Corpus {
    Arxiv,
    Pmc,
}

impl Corpus {
    pub fn as_str(self) -> &'static str {
        match self {
            Corpus::Arxiv => "arxiv",
            Corpus::Pmc => "pmc",
        }
    }

    /// Key under which the identifier appears in a serialized record.
    pub fn id_key(self) -> &'static str {
        match self {
            Corpus::Arxiv => "arxiv_id",
            Corpus::Pmc => "pmc_id",
        }
    }

    fn accepts(self, id: &str) -> bool {
        match self {
            Corpus::Arxiv => ARXIV_MODERN.is_match(id) || ARXIV_LEGACY.is_match(id),
            Corpus::Pmc => PMC.is_match(id),
        }
    }
}

impl fmt::Display for Corpus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Corpus {
    type Err = IdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "arxiv" => Ok(Corpus::Arxiv),
            "pmc" => Ok(Corpus::Pmc),
            other => Err(IdError::UnknownCorpus(other.to_string())),
        }
    }
}

/// A validated `(corpus, id)` pair. Ordering is corpus first, then the id
/// string, which is the tie-break order used by every ranking.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PaperId {
    corpus: Corpus,
    id: String,
}

impl PaperId {
    pub fn new(corpus: Corpus, id: impl Into<String>) -> Result<Self, IdError> {
        let id = id.into();
        let id = id.trim().to_string();
        if id.is_empty() {
            return Err(IdError::Empty);
        }
        if !corpus.accepts(&id) {
            return Err(IdError::Grammar { corpus, id });
        }
        Ok(Self { corpus, id })
    }

    pub fn arxiv(id: impl Into<String>) -> Result<Self, IdError> {
        Self::new(Corpus::Arxiv, id)
    }

    pub fn pmc(id: impl Into<String>) -> Result<Self, IdError> {
        Self::new(Corpus::Pmc, id)
    }

    pub fn corpus(&self) -> Corpus {
        self.corpus
    }

    pub fn as_str(&self) -> &str {
        &self.id
    }

    /// Upstream landing page, used as the default source link.
    pub fn landing_url(&self) -> String {
        match self.corpus {
            Corpus::Arxiv => format!("https://arxiv.org/abs/{}", self.id),
            Corpus::Pmc => format!("https://www.ncbi.nlm.nih.gov/pmc/articles/{}/", self.id),
        }
    }

    /// Relative path of the canonical record file, `<corpus>/<id>.json`.
    pub fn record_path(&self) -> String {
        format!("{}/{}.json", self.corpus, self.id)
    }
}

impl fmt::Display for PaperId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.corpus, self.id)
    }
}

impl FromStr for PaperId {
    type Err = IdError;

    /// Parses the `corpus:id` form produced by `Display`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (corpus, id) = s
            .split_once(':')
            .ok_or_else(|| IdError::UnknownCorpus(s.to_string()))?;
        PaperId::new(corpus.parse()?, id)
    }
}

impl Serialize for PaperId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PaperId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
