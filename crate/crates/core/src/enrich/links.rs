//! Repository link extraction and validation.

use std::collections::HashSet;
use std::fs;
use std::path::Path;
use std::sync::LazyLock;

use regex::Regex;

use super::generator::{
    GeneratorOutput, GeneratorRequest, GeneratorTask, LinkContext, TextGenerator,
};
use super::EnrichError;
use crate::record::{ResourceKind, ResourceLink};

pub const CONTEXT_RADIUS: usize = 200;

static GITHUB: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"https?://(?:www\.)?github\.com/([A-Za-z0-9][A-Za-z0-9-]*)/([A-Za-z0-9._-]+)")
        .unwrap()
});

/// Default list of framework/library repositories that are never paper specific.
pub const DEFAULT_DENYLIST: &str = include_str!("repo_denylist.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Validation {
    Pending,
    Accepted,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResourceCandidate {
    pub url: String,
    pub owner: String,
    pub repo: String,
    pub kind: ResourceKind,
    /// Up to 200 characters either side of the link, link text excluded.
    pub context_window: String,
    pub validated: Validation,
}

impl ResourceCandidate {
    pub fn to_link(&self) -> ResourceLink {
        ResourceLink {
            url: self.url.clone(),
            kind: self.kind,
        }
    }
}

/// Repository names (case-insensitive) dropped before validation.
#[derive(Debug, Clone)]
pub struct Denylist(HashSet<String>);

impl Denylist {
    /// One name per line; blank lines and `#` comments ignored.
    pub fn parse(text: &str) -> Self {
        Denylist(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(str::to_lowercase)
                .collect(),
        )
    }

    pub fn from_file(path: &Path) -> std::io::Result<Self> {
        Ok(Self::parse(&fs::read_to_string(path)?))
    }

    pub fn contains(&self, repo: &str) -> bool {
        self.0.contains(&repo.to_lowercase())
    }
}

impl Default for Denylist {
    fn default() -> Self {
        Self::parse(DEFAULT_DENYLIST)
    }
}

fn window(body: &str, start: usize, end: usize) -> String {
    let before: String = {
        let mut v: Vec<char> = body[..start].chars().rev().take(CONTEXT_RADIUS).collect();
        v.reverse();
        v.into_iter().collect()
    };
    let after: String = body[end..].chars().take(CONTEXT_RADIUS).collect();
    format!("{before} {after}")
}

/// GitHub repository links in `body`, deduplicated by owner/repo in order of
/// first appearance, with denylisted repositories removed.
pub fn extract_resource_links(body: &str, denylist: &Denylist) -> Vec<ResourceCandidate> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for caps in GITHUB.captures_iter(body) {
        let whole = caps.get(0).unwrap();
        let owner = caps[1].to_string();
        let mut repo = caps[2].trim_end_matches(['.', ',', ';', ':']).to_string();
        if let Some(stripped) = repo.strip_suffix(".git") {
            repo = stripped.to_string();
        }
        if repo.is_empty() || repo == "." || repo == ".." {
            continue;
        }
        if denylist.contains(&repo) {
            continue;
        }
        if !seen.insert(format!("{}/{}", owner.to_lowercase(), repo.to_lowercase())) {
            continue;
        }
        out.push(ResourceCandidate {
            url: format!("https://github.com/{owner}/{repo}"),
            context_window: window(body, whole.start(), whole.end()),
            owner,
            repo,
            kind: ResourceKind::Github,
            validated: Validation::Pending,
        });
    }
    out
}

/// Asks `validator` whether the candidate belongs to the paper. A failing
/// validator leaves the candidate pending.
pub fn validate_resource_link(
    candidate: &ResourceCandidate,
    title: &str,
    abstract_text: &str,
    validator: &dyn TextGenerator,
) -> Validation {
    let req = GeneratorRequest {
        task: GeneratorTask::LinkValidation,
        context: String::new(),
        authors: Vec::new(),
        title: title.to_string(),
        abstract_text: abstract_text.to_string(),
        section: None,
        link: Some(LinkContext {
            url: candidate.url.clone(),
            owner: candidate.owner.clone(),
            repo: candidate.repo.clone(),
            context_window: candidate.context_window.clone(),
        }),
    };
    match validator.generate(&req) {
        Ok(GeneratorOutput::Verdict { accepted: true }) => Validation::Accepted,
        Ok(GeneratorOutput::Verdict { accepted: false }) => Validation::Rejected,
        Ok(_)
        | Err(EnrichError::GeneratorUnavailable(_))
        | Err(EnrichError::UpstreamUnavailable(_)) => Validation::Pending,
    }
}
