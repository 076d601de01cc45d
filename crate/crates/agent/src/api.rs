//! The protocol surface the agent reads through.

use std::time::Duration;

use paperdesk_core::protocol::{retrieval_query_to_params, ErrorBody, ErrorCode};
use paperdesk_core::retrieval::RetrievalQuery;
use paperdesk_core::{Corpus, PaperId, SectionSelector, ViewKind};
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ApiError {
    #[error("{status} {code}: {message}")]
    Service {
        status: u16,
        code: ErrorCode,
        message: String,
    },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("malformed response: {0}")]
    Malformed(String),
}

impl ApiError {
    pub fn code(&self) -> Option<ErrorCode> {
        match self {
            ApiError::Service { code, .. } => Some(*code),
            _ => None,
        }
    }
}

/// Read access to papers. Every method returns the full response envelope
/// (`{status, data, provenance, budget}`).
pub trait PaperApi: Send + Sync {
    fn view(&self, id: &PaperId, view: &ViewKind) -> Result<Value, ApiError>;
    fn retrieve(&self, query: &RetrievalQuery) -> Result<Value, ApiError>;
    fn trending(&self, id: &PaperId) -> Result<Value, ApiError>;
}

impl<T: PaperApi + ?Sized> PaperApi for &T {
    fn view(&self, id: &PaperId, view: &ViewKind) -> Result<Value, ApiError> {
        (**self).view(id, view)
    }
    fn retrieve(&self, query: &RetrievalQuery) -> Result<Value, ApiError> {
        (**self).retrieve(query)
    }
    fn trending(&self, id: &PaperId) -> Result<Value, ApiError> {
        (**self).trending(id)
    }
}

/// Query pairs for a view read.
pub fn view_params(id: &PaperId, view: &ViewKind) -> Vec<(String, String)> {
    let mut out = vec![
        ("type".to_string(), view.name().to_string()),
        ("id".to_string(), id.as_str().to_string()),
    ];
    if let ViewKind::Section(sel) = view {
        out.push(("section".into(), sel.to_string()));
    }
    out
}

/// Endpoint path serving views of `id`'s corpus.
pub fn view_path(id: &PaperId) -> &'static str {
    match id.corpus() {
        Corpus::Arxiv => "/arxiv",
        Corpus::Pmc => "/pmc",
    }
}

/// Parses `{"status":"error","error":{...}}` bodies; anything else becomes
/// an `Internal` error carrying the raw text.
pub fn error_from_body(status: u16, body: &str) -> ApiError {
    let parsed = serde_json::from_str::<Value>(body)
        .ok()
        .and_then(|v| v.get("error").cloned())
        .and_then(|e| serde_json::from_value::<ErrorBody>(e).ok());
    match parsed {
        Some(e) => ApiError::Service {
            status,
            code: e.code,
            message: e.message,
        },
        None => ApiError::Service {
            status,
            code: ErrorCode::Internal,
            message: body.chars().take(200).collect(),
        },
    }
}

/// Blocking HTTP client for a running service.
#[derive(Clone)]
pub struct HttpApi {
    base: String,
    token: Option<String>,
    agent: ureq::Agent,
}

impl HttpApi {
    pub fn new(base: impl Into<String>, token: Option<String>) -> Self {
        Self::with_timeout(base, token, Duration::from_secs(30))
    }

    pub fn with_timeout(base: impl Into<String>, token: Option<String>, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(timeout))
            .build()
            .into();
        HttpApi {
            base: base.into().trim_end_matches('/').to_string(),
            token,
            agent,
        }
    }

    /// GET `path` with `params`; returns the decoded envelope of a 2xx reply.
    pub fn get(&self, path: &str, params: &[(String, String)]) -> Result<Value, ApiError> {
        let (status, body) = self.get_raw(path, params)?;
        if !(200..300).contains(&status) {
            return Err(error_from_body(status, &body));
        }
        serde_json::from_str(&body).map_err(|e| ApiError::Malformed(e.to_string()))
    }

    /// GET returning the status and body text whatever the status.
    pub fn get_raw(
        &self,
        path: &str,
        params: &[(String, String)],
    ) -> Result<(u16, String), ApiError> {
        let mut req = self.agent.get(format!("{}{path}", self.base));
        for (k, v) in params {
            req = req.query(k, v);
        }
        if let Some(t) = &self.token {
            req = req.header("Authorization", format!("Bearer {t}"));
        }
        let mut resp = req.call().map_err(|e| ApiError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let body = resp
            .body_mut()
            .with_config()
            .limit(256 * 1024 * 1024)
            .read_to_string()
            .map_err(|e| ApiError::Transport(e.to_string()))?;
        Ok((status, body))
    }
}

impl PaperApi for HttpApi {
    fn view(&self, id: &PaperId, view: &ViewKind) -> Result<Value, ApiError> {
        self.get(view_path(id), &view_params(id, view))
    }

    fn retrieve(&self, query: &RetrievalQuery) -> Result<Value, ApiError> {
        let mut params = vec![("type".to_string(), "retrieve".to_string())];
        params.extend(retrieval_query_to_params(query));
        self.get("/arxiv", &params)
    }

    fn trending(&self, id: &PaperId) -> Result<Value, ApiError> {
        self.get(
            "/arxiv/trending_signal",
            &[("id".to_string(), id.as_str().to_string())],
        )
    }
}

/// `data` member of an envelope.
pub fn data(envelope: &Value) -> Result<&Value, ApiError> {
    envelope
        .get("data")
        .ok_or_else(|| ApiError::Malformed("envelope without data".into()))
}

pub(crate) fn section_view(idx: usize) -> ViewKind {
    ViewKind::Section(SectionSelector::Idx(idx))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_bodies_decode() {
        let e = error_from_body(
            404,
            r#"{"status":"error","error":{"code":"UnknownPaper","message":"no such paper"}}"#,
        );
        assert_eq!(e.code(), Some(ErrorCode::UnknownPaper));
        let e = error_from_body(502, "Bad Gateway");
        assert_eq!(e.code(), Some(ErrorCode::Internal));
    }

    #[test]
    fn section_params_carry_selector() {
        let id = PaperId::arxiv("2409.05591").unwrap();
        let p = view_params(&id, &section_view(2));
        assert_eq!(p[0], ("type".into(), "section".into()));
        assert_eq!(p[2], ("section".into(), "2".into()));
        assert_eq!(view_path(&PaperId::pmc("PMC1000001").unwrap()), "/pmc");
    }
}
