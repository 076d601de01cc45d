//! Text-generation boundary for TL;DRs, keywords, affiliations and link
//! validation, plus the deterministic extractive reference generator.

use std::collections::HashMap;
use std::io::Write;
use std::process::{Command, Stdio};

use serde::{Deserialize, Serialize};

use super::EnrichError;
use crate::record::{AuthorEntry, PaperRecord};
use crate::tokens::TokenEstimator;

pub const DEFAULT_CONTEXT_TOKENS: usize = 2048;
pub const PAPER_TLDR_TAG: &str = "[research paper]";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorTask {
    PaperTldr,
    SectionTldr,
    Keywords,
    Affiliations,
    LinkValidation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SectionContext {
    pub name: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkContext {
    pub url: String,
    pub owner: String,
    pub repo: String,
    pub context_window: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorRequest {
    pub task: GeneratorTask,
    /// Token-bounded prefix of the body.
    pub context: String,
    pub authors: Vec<AuthorEntry>,
    pub title: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub section: Option<SectionContext>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub link: Option<LinkContext>,
}

impl GeneratorRequest {
    pub fn for_record(
        task: GeneratorTask,
        record: &PaperRecord,
        estimator: &dyn TokenEstimator,
        context_tokens: usize,
    ) -> Self {
        Self {
            task,
            context: estimator.prefix(record.body(), context_tokens).to_string(),
            authors: record.authors().to_vec(),
            title: record.title().to_string(),
            abstract_text: record.abstract_text().to_string(),
            section: None,
            link: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeneratorOutput {
    Text { text: Option<String> },
    Keywords { keywords: Vec<String> },
    Affiliations { authors: Vec<AuthorEntry> },
    Verdict { accepted: bool },
}

pub trait TextGenerator: Send + Sync {
    fn generate(&self, request: &GeneratorRequest) -> Result<GeneratorOutput, EnrichError>;
}

/// First sentence: text up to the first `.`, `!` or `?` followed by
/// whitespace or the end of input.
pub fn first_sentence(text: &str) -> Option<String> {
    let text = text.trim();
    if text.is_empty() {
        return None;
    }
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if matches!(c, '.' | '!' | '?') {
            match chars.peek() {
                None => return Some(text.to_string()),
                Some((_, n)) if n.is_whitespace() => {
                    return Some(text[..i + c.len_utf8()].to_string())
                }
                _ => {}
            }
        }
    }
    Some(text.to_string())
}

pub const STOPWORDS: &[&str] = &[
    "a", "about", "above", "after", "again", "against", "all", "also", "am", "an", "and", "any",
    "are", "as", "at", "be", "because", "been", "before", "being", "below", "between", "both",
    "but", "by", "can", "could", "did", "do", "does", "doing", "down", "during", "each", "few",
    "for", "from", "further", "had", "has", "have", "having", "he", "her", "here", "hers", "him",
    "his", "how", "i", "if", "in", "into", "is", "it", "its", "itself", "just", "may", "me",
    "more", "most", "must", "my", "no", "nor", "not", "now", "of", "off", "on", "once", "only",
    "or", "other", "our", "ours", "out", "over", "own", "same", "she", "should", "so", "some",
    "such", "than", "that", "the", "their", "them", "then", "there", "these", "they", "this",
    "those", "through", "to", "too", "under", "until", "up", "us", "very", "via", "was", "we",
    "were", "what", "when", "where", "which", "while", "who", "whom", "why", "will", "with",
    "would", "you", "your", "yours", "et", "al", "paper", "propose", "proposed", "show", "shows",
    "use", "used", "using", "based", "results", "new", "however", "thus", "within", "without",
    "well", "one", "two", "three", "first", "second",
];

/// Lowercased word-character runs.
pub fn words(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !(c.is_alphanumeric() || c == '_'))
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
}

/// Top-`n` terms by frequency (ties alphabetical), skipping stopwords,
/// numerals and terms shorter than three characters.
pub fn top_terms(text: &str, n: usize) -> Vec<String> {
    let mut tf: HashMap<String, usize> = HashMap::new();
    for w in words(text) {
        if w.chars().count() < 3
            || !w.chars().next().is_some_and(char::is_alphabetic)
            || STOPWORDS.contains(&w.as_str())
        {
            continue;
        }
        *tf.entry(w).or_default() += 1;
    }
    let mut ranked: Vec<(String, usize)> = tf.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.into_iter().take(n).map(|(w, _)| w).collect()
}

/// Lowercase with `-` and `_` removed, for name-overlap checks.
pub fn squash(s: &str) -> String {
    s.chars()
        .filter(|c| *c != '-' && *c != '_')
        .flat_map(char::to_lowercase)
        .collect()
}

/// Deterministic extractive generator used in tests and as the default.
#[derive(Debug, Default, Clone, Copy)]
pub struct ReferenceGenerator;

impl TextGenerator for ReferenceGenerator {
    fn generate(&self, req: &GeneratorRequest) -> Result<GeneratorOutput, EnrichError> {
        Ok(match req.task {
            GeneratorTask::PaperTldr => {
                let source = if req.abstract_text.trim().is_empty() {
                    &req.context
                } else {
                    &req.abstract_text
                };
                GeneratorOutput::Text {
                    text: first_sentence(source).map(|s| format!("{PAPER_TLDR_TAG} {s}")),
                }
            }
            GeneratorTask::SectionTldr => GeneratorOutput::Text {
                text: req.section.as_ref().and_then(|s| first_sentence(&s.text)),
            },
            GeneratorTask::Keywords => {
                let text = format!("{}\n{}\n{}", req.title, req.abstract_text, req.context);
                GeneratorOutput::Keywords {
                    keywords: top_terms(&text, crate::record::MAX_KEYWORDS),
                }
            }
            GeneratorTask::Affiliations => GeneratorOutput::Affiliations {
                authors: req.authors.clone(),
            },
            GeneratorTask::LinkValidation => {
                let link = req.link.as_ref().ok_or_else(|| {
                    EnrichError::GeneratorUnavailable("link_validation without link".into())
                })?;
                let repo = squash(&link.repo);
                let haystacks = [&req.title, &req.abstract_text, &link.context_window];
                let accepted =
                    !repo.is_empty() && haystacks.iter().any(|h| squash(h).contains(&repo));
                GeneratorOutput::Verdict { accepted }
            }
        })
    }
}

/// Exchanges one JSON request / JSON response per invocation over stdio
/// with an external program.
#[derive(Debug, Clone)]
pub struct SubprocessGenerator {
    program: String,
    args: Vec<String>,
}

impl SubprocessGenerator {
    pub fn new(program: impl Into<String>, args: Vec<String>) -> Self {
        Self {
            program: program.into(),
            args,
        }
    }
}

impl TextGenerator for SubprocessGenerator {
    fn generate(&self, request: &GeneratorRequest) -> Result<GeneratorOutput, EnrichError> {
        let unavailable =
            |e: String| EnrichError::GeneratorUnavailable(format!("{}: {e}", self.program));
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| unavailable(e.to_string()))?;
        let payload = serde_json::to_vec(request).map_err(|e| unavailable(e.to_string()))?;
        child
            .stdin
            .take()
            .expect("stdin is piped")
            .write_all(&payload)
            .map_err(|e| unavailable(e.to_string()))?;
        let out = child
            .wait_with_output()
            .map_err(|e| unavailable(e.to_string()))?;
        if !out.status.success() {
            return Err(unavailable(format!("exit status {}", out.status)));
        }
        serde_json::from_slice(&out.stdout).map_err(|e| unavailable(format!("bad response: {e}")))
    }
}

/// Outputs of one summarization pass, applied atomically.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Summaries {
    pub tldr: Option<String>,
    pub section_tldrs: Vec<Option<String>>,
    pub keywords: Vec<String>,
    pub affiliations: Vec<AuthorEntry>,
}

fn unexpected(task: GeneratorTask, out: &GeneratorOutput) -> EnrichError {
    EnrichError::GeneratorUnavailable(format!("unexpected output for {task:?}: {out:?}"))
}

/// Runs every summarization task; the record is only modified when all of
/// them succeed.
pub fn generate_summaries(
    record: &mut PaperRecord,
    generator: &dyn TextGenerator,
    estimator: &dyn TokenEstimator,
    context_tokens: usize,
) -> Result<Summaries, EnrichError> {
    let base = |task| GeneratorRequest::for_record(task, record, estimator, context_tokens);

    let tldr = match generator.generate(&base(GeneratorTask::PaperTldr))? {
        GeneratorOutput::Text { text } => text,
        other => return Err(unexpected(GeneratorTask::PaperTldr, &other)),
    };
    let mut section_tldrs = Vec::with_capacity(record.sections().len());
    for s in record.sections() {
        let mut req = base(GeneratorTask::SectionTldr);
        req.section = Some(SectionContext {
            name: s.name().to_string(),
            text: estimator.prefix(s.body(), context_tokens).to_string(),
        });
        match generator.generate(&req)? {
            GeneratorOutput::Text { text } => section_tldrs.push(text),
            other => return Err(unexpected(GeneratorTask::SectionTldr, &other)),
        }
    }
    let mut keywords = match generator.generate(&base(GeneratorTask::Keywords))? {
        GeneratorOutput::Keywords { keywords } => keywords,
        other => return Err(unexpected(GeneratorTask::Keywords, &other)),
    };
    keywords.truncate(crate::record::MAX_KEYWORDS);
    let affiliations = match generator.generate(&base(GeneratorTask::Affiliations))? {
        GeneratorOutput::Affiliations { authors } => authors,
        other => return Err(unexpected(GeneratorTask::Affiliations, &other)),
    };

    let summaries = Summaries {
        tldr,
        section_tldrs,
        keywords,
        affiliations,
    };
    record.set_tldr(summaries.tldr.clone());
    record.set_section_tldrs(summaries.section_tldrs.clone());
    record.set_keywords(summaries.keywords.clone());
    record.set_affiliations(&summaries.affiliations);
    Ok(summaries)
}
