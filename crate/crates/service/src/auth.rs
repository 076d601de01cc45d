//! Bearer tokens.

use std::collections::HashMap;
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiToken {
    pub token: String,
    pub label: String,
    /// Maximum authorized requests per UTC day.
    pub quota: Option<u64>,
}

#[derive(Debug, Clone, Default)]
pub struct TokenRegistry {
    tokens: HashMap<String, ApiToken>,
}

impl TokenRegistry {
    pub fn new(tokens: impl IntoIterator<Item = ApiToken>) -> Self {
        TokenRegistry {
            tokens: tokens.into_iter().map(|t| (t.token.clone(), t)).collect(),
        }
    }

    /// Parses `<token> [label] [quota=N]` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut out = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let token = parts.next().unwrap().to_string();
            let mut label = None;
            let mut quota = None;
            for p in parts {
                if let Some(q) = p.strip_prefix("quota=") {
                    quota = Some(
                        q.parse()
                            .map_err(|_| format!("line {}: bad quota '{q}'", n + 1))?,
                    );
                } else if label.is_none() {
                    label = Some(p.to_string());
                } else {
                    return Err(format!("line {}: unexpected '{p}'", n + 1));
                }
            }
            out.push(ApiToken {
                label: label.unwrap_or_else(|| "unnamed".into()),
                token,
                quota,
            });
        }
        Ok(Self::new(out))
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::parse(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn lookup(&self, token: &str) -> Option<&ApiToken> {
        self.tokens.get(token)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}
