//! HTML-first artifact acquisition with PDF-conversion fallback.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::process::Command;

use tracing::debug;

use super::normalize::normalize_html;
use super::segment::segment_sections;
use super::IngestError;
use crate::id::PaperId;
use crate::record::SourceType;
use crate::time::Timestamp;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArtifactKind {
    Html,
    Markdown,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceArtifact {
    pub kind: ArtifactKind,
    pub content: String,
    pub fetched_at: Timestamp,
    pub source_type: SourceType,
}

/// Where raw artifacts come from. `Ok(None)` means the upstream has no
/// artifact of that kind; `Err` means the upstream could not be reached.
pub trait ArtifactSource: Send + Sync {
    fn html(&self, id: &PaperId) -> Result<Option<String>, IngestError>;
    fn pdf(&self, id: &PaperId) -> Result<Option<PathBuf>, IngestError>;
    /// Markdown supplied directly (fixtures, pre-rendered corpora).
    fn markdown(&self, id: &PaperId) -> Result<Option<String>, IngestError>;
}

/// PDF → markdown conversion.
pub trait PdfConverter: Send + Sync {
    fn convert(&self, pdf: &Path) -> Result<String, String>;
}

/// Runs an external converter: `<program> <args..> <pdf path>`, markdown on
/// stdout, exit status 0 on success.
#[derive(Debug, Clone)]
pub struct CommandConverter {
    program: String,
    args: Vec<String>,
}

impl CommandConverter {
    pub fn new(program: impl Into<String>, args: Vec<String>) -> Self {
        Self {
            program: program.into(),
            args,
        }
    }

    /// Splits a whitespace-separated command line.
    pub fn from_command_line(line: &str) -> Option<Self> {
        let mut parts = line.split_whitespace().map(str::to_string);
        let program = parts.next()?;
        Some(Self {
            program,
            args: parts.collect(),
        })
    }
}

impl PdfConverter for CommandConverter {
    fn convert(&self, pdf: &Path) -> Result<String, String> {
        let out = Command::new(&self.program)
            .args(&self.args)
            .arg(pdf)
            .output()
            .map_err(|e| format!("spawning {}: {e}", self.program))?;
        if !out.status.success() {
            return Err(format!(
                "{} exited with {}: {}",
                self.program,
                out.status,
                String::from_utf8_lossy(&out.stderr).trim()
            ));
        }
        String::from_utf8(out.stdout).map_err(|e| format!("converter output is not UTF-8: {e}"))
    }
}

/// Accepts already-converted markdown stored next to the PDF (`x.pdf` → `x.md`).
#[derive(Debug, Clone, Copy, Default)]
pub struct PreconvertedConverter;

impl PdfConverter for PreconvertedConverter {
    fn convert(&self, pdf: &Path) -> Result<String, String> {
        let md = pdf.with_extension("md");
        fs::read_to_string(&md).map_err(|e| format!("{}: {e}", md.display()))
    }
}

/// Reads `<root>/<corpus>/<id>.{html,pdf,md}`.
#[derive(Debug, Clone)]
pub struct FixtureFetcher {
    root: PathBuf,
}

impl FixtureFetcher {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    fn path(&self, id: &PaperId, ext: &str) -> PathBuf {
        self.root
            .join(id.corpus().as_str())
            .join(format!("{}.{ext}", id.as_str()))
    }

    fn read(&self, id: &PaperId, ext: &str) -> Result<Option<String>, IngestError> {
        match fs::read_to_string(self.path(id, ext)) {
            Ok(s) => Ok(Some(s)),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(IngestError::UpstreamUnavailable(e.to_string())),
        }
    }
}

impl ArtifactSource for FixtureFetcher {
    fn html(&self, id: &PaperId) -> Result<Option<String>, IngestError> {
        self.read(id, "html")
    }

    fn pdf(&self, id: &PaperId) -> Result<Option<PathBuf>, IngestError> {
        let p = self.path(id, "pdf");
        Ok(p.exists().then_some(p))
    }

    fn markdown(&self, id: &PaperId) -> Result<Option<String>, IngestError> {
        self.read(id, "md")
    }
}

#[derive(Debug, Clone, Copy)]
pub struct AcquireOptions {
    /// A headingless HTML extraction shorter than this counts as a failed parse.
    pub html_min_chars: usize,
}

impl Default for AcquireOptions {
    fn default() -> Self {
        Self {
            html_min_chars: 500,
        }
    }
}

fn html_usable(html: &str, opts: &AcquireOptions) -> bool {
    match normalize_html(html) {
        Ok(body) => {
            !segment_sections(&body).sections.is_empty()
                || body.chars().count() >= opts.html_min_chars
        }
        Err(_) => false,
    }
}

/// HTML when it parses, else the PDF through `converter`, else directly
/// supplied markdown.
pub fn acquire_artifact(
    id: &PaperId,
    fetcher: &dyn ArtifactSource,
    converter: &dyn PdfConverter,
    opts: &AcquireOptions,
    now: Timestamp,
) -> Result<SourceArtifact, IngestError> {
    let mut reasons = Vec::new();
    match fetcher.html(id)? {
        Some(html) if html_usable(&html, opts) => {
            return Ok(SourceArtifact {
                kind: ArtifactKind::Html,
                content: html,
                fetched_at: now,
                source_type: SourceType::Html,
            });
        }
        Some(_) => reasons.push("html did not parse into usable content".to_string()),
        None => reasons.push("no html".to_string()),
    }
    debug!(%id, "html path failed, trying pdf conversion");
    match fetcher.pdf(id)? {
        Some(pdf) => match converter.convert(&pdf) {
            Ok(md) if !md.trim().is_empty() => {
                return Ok(SourceArtifact {
                    kind: ArtifactKind::Markdown,
                    content: md,
                    fetched_at: now,
                    source_type: SourceType::PdfConverted,
                });
            }
            Ok(_) => reasons.push("converter produced no text".into()),
            Err(e) => reasons.push(e),
        },
        None => reasons.push("no pdf".into()),
    }
    if let Some(md) = fetcher.markdown(id)? {
        if !md.trim().is_empty() {
            return Ok(SourceArtifact {
                kind: ArtifactKind::Markdown,
                content: md,
                fetched_at: now,
                source_type: SourceType::MarkdownFixture,
            });
        }
    }
    Err(IngestError::ConversionFailed {
        id: id.to_string(),
        reason: reasons.join("; "),
    })
}
