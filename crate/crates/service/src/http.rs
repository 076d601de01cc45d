//! HTTP binding of [`AccessService`].

use std::net::SocketAddr;
use std::sync::Arc;
use std::thread::JoinHandle;

use axum::extract::{Query, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode, Uri};
use axum::response::{IntoResponse, Response};
use axum::Router;
use paperdesk_core::protocol::ErrorCode;
use tokio::net::TcpListener;
use tokio::sync::oneshot;

use crate::service::{AccessService, ApiRequest, ApiResponse, ServiceError};

pub fn router(svc: Arc<AccessService>) -> Router {
    Router::new().fallback(dispatch).with_state(svc)
}

fn bearer(headers: &HeaderMap) -> Option<String> {
    let v = headers.get(header::AUTHORIZATION)?;
    let token = v
        .to_str()
        .ok()
        .and_then(|s| {
            s.strip_prefix("Bearer ")
                .or_else(|| s.strip_prefix("bearer "))
        })
        .map(str::trim)
        .unwrap_or("");
    Some(token.to_string())
}

async fn dispatch(State(svc): State<Arc<AccessService>>, uri: Uri, headers: HeaderMap) -> Response {
    let resp = match Query::<Vec<(String, String)>>::try_from_uri(&uri) {
        Err(e) => ServiceError::new(ErrorCode::InvalidQuery, e.body_text()).into_response_body(),
        Ok(Query(params)) => {
            let req = ApiRequest {
                path: uri.path().to_string(),
                params,
                bearer: bearer(&headers),
            };
            match tokio::task::spawn_blocking(move || svc.handle(&req)).await {
                Ok(r) => r,
                Err(e) => {
                    ServiceError::new(ErrorCode::Internal, e.to_string()).into_response_body()
                }
            }
        }
    };
    let status = StatusCode::from_u16(resp.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
    (
        status,
        [(
            header::CONTENT_TYPE,
            HeaderValue::from_static("application/json"),
        )],
        resp.body,
    )
        .into_response()
}

impl ServiceError {
    fn into_response_body(self) -> ApiResponse {
        self.response()
    }
}

/// Serves until ctrl-c.
pub async fn serve(listener: TcpListener, svc: Arc<AccessService>) -> std::io::Result<()> {
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(svc))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

/// A server on a background thread with its own runtime; stops on drop.
pub struct ServerHandle {
    pub addr: SocketAddr,
    stop: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        if let Some(s) = self.stop.take() {
            let _ = s.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

/// Binds `addr` (port 0 picks a free port) and serves in the background.
pub fn spawn(svc: Arc<AccessService>, addr: SocketAddr) -> std::io::Result<ServerHandle> {
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()?;
    let listener = rt.block_on(TcpListener::bind(addr))?;
    let addr = listener.local_addr()?;
    let (tx, rx) = oneshot::channel::<()>();
    let thread = std::thread::spawn(move || {
        rt.block_on(async move {
            let _ = axum::serve(listener, router(svc))
                .with_graceful_shutdown(async {
                    let _ = rx.await;
                })
                .await;
        });
    });
    Ok(ServerHandle {
        addr,
        stop: Some(tx),
        thread: Some(thread),
    })
}
