//! TOML configuration shared by the server and the command-line tool.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {reason}")]
    Read { path: PathBuf, reason: String },
    #[error("{path}: {reason}")]
    Parse { path: PathBuf, reason: String },
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerConfig {
    pub bind: String,
    pub port: u16,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            bind: "127.0.0.1".into(),
            port: 8080,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CacheConfig {
    pub enabled: bool,
    pub ttl_secs: u64,
    pub capacity: usize,
}

impl Default for CacheConfig {
    fn default() -> Self {
        CacheConfig {
            enabled: true,
            ttl_secs: 3600,
            capacity: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    pub trace_dir: Option<PathBuf>,
    pub default_budget: usize,
    pub max_escalations: usize,
    pub shortlist: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            trace_dir: Some("trace".into()),
            default_budget: 4_000,
            max_escalations: 4,
            shortlist: 3,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyncConfig {
    /// JSON-lines metadata manifest harvested on every run.
    pub manifest: Option<PathBuf>,
    /// Root holding `<corpus>/<id>.{html,pdf,md}` artifacts.
    pub artifacts_dir: Option<PathBuf>,
    /// e.g. `"Mon-Fri 06:00"`; UTC.
    pub schedule: Option<String>,
    /// External PDF-to-Markdown command line; the PDF path is appended.
    pub pdf_converter: Option<String>,
    /// Summarizer command speaking the generator JSON protocol.
    pub generator_command: Option<String>,
    pub scholarly_fixture: Option<PathBuf>,
    pub social_fixture: Option<PathBuf>,
    pub repo_denylist: Option<PathBuf>,
    /// A headingless HTML extraction shorter than this falls back to the PDF.
    pub html_min_chars: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub server: ServerConfig,
    /// Holds `records/`, `index/` and `state/`.
    pub data_dir: PathBuf,
    /// Lines of `<token> <label> [quota=<requests per day>]`.
    pub tokens_file: Option<PathBuf>,
    pub preview_len: usize,
    /// Paper ids readable without a token.
    pub allowlist: Vec<String>,
    pub cache: CacheConfig,
    pub agent: AgentConfig,
    pub sync: SyncConfig,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            server: ServerConfig::default(),
            data_dir: "data".into(),
            tokens_file: None,
            preview_len: 10_000,
            allowlist: vec!["2409.05591".into()],
            cache: CacheConfig::default(),
            agent: AgentConfig::default(),
            sync: SyncConfig::default(),
        }
    }
}

impl Config {
    pub fn parse(text: &str, path: &Path) -> Result<Self, ConfigError> {
        let cfg: Config = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: path.into(),
            reason: e.to_string(),
        })?;
        if cfg.preview_len == 0 {
            return Err(ConfigError::Parse {
                path: path.into(),
                reason: "preview_len must be positive".into(),
            });
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.into(),
            reason: e.to_string(),
        })?;
        Self::parse(&text, path)
    }

    pub fn records_dir(&self) -> PathBuf {
        self.data_dir.join("records")
    }

    pub fn index_dir(&self) -> PathBuf {
        self.data_dir.join("index")
    }

    pub fn state_dir(&self) -> PathBuf {
        self.data_dir.join("state")
    }
}
