//! Reads straight from a record store and index, without a server.

use std::sync::Arc;

use paperdesk_core::protocol::{retrieve_envelope, trending_envelope, view_envelope, ErrorCode};
use paperdesk_core::retrieval::{RetrievalError, RetrievalQuery, SearchIndex};
use paperdesk_core::store::RecordStore;
use paperdesk_core::{Corpus, PaperId, PaperRecord, ViewError, ViewKind};
use serde_json::Value;

use crate::api::{ApiError, PaperApi};

pub struct StoreApi {
    pub store: Arc<dyn RecordStore>,
    pub index: Arc<SearchIndex>,
    pub preview_len: usize,
}

fn service_error(code: ErrorCode, message: impl Into<String>) -> ApiError {
    ApiError::Service {
        status: code.status(),
        code,
        message: message.into(),
    }
}

impl StoreApi {
    pub fn new(store: Arc<dyn RecordStore>, index: Arc<SearchIndex>) -> Self {
        StoreApi {
            store,
            index,
            preview_len: 10_000,
        }
    }

    fn load(&self, id: &PaperId) -> Result<Arc<PaperRecord>, ApiError> {
        match self.store.get(id) {
            Ok(Some(r)) => Ok(r),
            Ok(None) => Err(service_error(
                ErrorCode::UnknownPaper,
                format!("unknown paper {id}"),
            )),
            Err(e) => Err(service_error(ErrorCode::UpstreamUnavailable, e.to_string())),
        }
    }
}

impl PaperApi for StoreApi {
    fn view(&self, id: &PaperId, view: &ViewKind) -> Result<Value, ApiError> {
        if id.corpus() == Corpus::Pmc && !matches!(view, ViewKind::Head | ViewKind::Json) {
            return Err(service_error(
                ErrorCode::UnsupportedView,
                "only head and json are served for PMC papers",
            ));
        }
        view_envelope(&*self.load(id)?, view, self.preview_len).map_err(|e| match e {
            ViewError::SectionNotFound(_) => {
                service_error(ErrorCode::SectionNotFound, e.to_string())
            }
            ViewError::InvalidView(_) => service_error(ErrorCode::InvalidView, e.to_string()),
        })
    }

    fn retrieve(&self, query: &RetrievalQuery) -> Result<Value, ApiError> {
        retrieve_envelope(&self.index, self.store.as_ref(), query).map_err(|e| {
            let code = match e {
                RetrievalError::InvalidFilter(_) => ErrorCode::InvalidFilter,
                RetrievalError::InvalidQuery(_) => ErrorCode::InvalidQuery,
                _ => ErrorCode::UpstreamUnavailable,
            };
            service_error(code, e.to_string())
        })
    }

    fn trending(&self, id: &PaperId) -> Result<Value, ApiError> {
        Ok(trending_envelope(&*self.load(id)?))
    }
}
