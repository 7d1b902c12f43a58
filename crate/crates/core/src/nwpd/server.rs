use std::net::SocketAddr;
use std::sync::Arc;
use std::thread;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use log::info;
use serde_json::json;
use tokio::sync::oneshot;

use super::store::{PolicyStore, PutError};
use crate::policy::PolicyDocument;

pub fn router(store: Arc<PolicyStore>) -> Router {
    Router::new()
        .route("/policy", get(get_policy).put(put_policy))
        .with_state(store)
}

async fn get_policy(State(store): State<Arc<PolicyStore>>) -> Response {
    match store.get() {
        Some(p) => (
            StatusCode::OK,
            [(header::CONTENT_TYPE, "application/json")],
            p.bytes.clone(),
        )
            .into_response(),
        None => (
            StatusCode::NOT_FOUND,
            Json(json!({"error": "no policy installed"})),
        )
            .into_response(),
    }
}

async fn put_policy(State(store): State<Arc<PolicyStore>>, body: Bytes) -> Response {
    let doc: PolicyDocument = match serde_json::from_slice(&body) {
        Ok(d) => d,
        Err(e) => {
            return (
                StatusCode::BAD_REQUEST,
                Json(json!({"error": "malformed policy", "detail": e.to_string()})),
            )
                .into_response()
        }
    };
    // Persistence does blocking file I/O.
    let result = tokio::task::spawn_blocking(move || store.put(doc)).await;
    match result {
        Ok(Ok(version)) => (StatusCode::OK, Json(json!({ "version": version }))).into_response(),
        Ok(Err(PutError::ValidationFailed(fields))) => (
            StatusCode::BAD_REQUEST,
            Json(json!({"error": "validation failed", "fields": fields})),
        )
            .into_response(),
        Ok(Err(PutError::StaleVersion { current, offered })) => (
            StatusCode::CONFLICT,
            Json(json!({"error": "stale version", "current": current, "offered": offered})),
        )
            .into_response(),
        Ok(Err(PutError::Store(e))) => (
            StatusCode::INTERNAL_SERVER_ERROR,
            Json(json!({"error": e.to_string()})),
        )
            .into_response(),
        Err(e) => (
            StatusCode::INTERNAL_SERVER_ERROR,
            Json(json!({"error": e.to_string()})),
        )
            .into_response(),
    }
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    store: Arc<PolicyStore>,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    info!("policy database listening on {}", listener.local_addr()?);
    axum::serve(listener, router(store))
        .with_graceful_shutdown(shutdown)
        .await
}

/// A server running on its own runtime thread; stops when dropped.
pub struct NwpdHandle {
    addr: SocketAddr,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<thread::JoinHandle<std::io::Result<()>>>,
}

impl NwpdHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}/policy", self.addr)
    }

    pub fn stop(mut self) -> std::io::Result<()> {
        self.shutdown_inner()
    }

    fn shutdown_inner(&mut self) -> std::io::Result<()> {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        match self.thread.take() {
            Some(t) => t.join().unwrap_or_else(|_| {
                Err(std::io::Error::other("policy server thread panicked"))
            }),
            None => Ok(()),
        }
    }
}

impl Drop for NwpdHandle {
    fn drop(&mut self) {
        let _ = self.shutdown_inner();
    }
}

/// Binds `addr` (port 0 picks a free port) and serves in the background.
pub fn spawn(store: Arc<PolicyStore>, addr: SocketAddr) -> std::io::Result<NwpdHandle> {
    let std_listener = std::net::TcpListener::bind(addr)?;
    std_listener.set_nonblocking(true)?;
    let bound = std_listener.local_addr()?;
    let (tx, rx) = oneshot::channel::<()>();
    let thread = thread::Builder::new()
        .name("nwpd".into())
        .spawn(move || {
            let rt = tokio::runtime::Builder::new_multi_thread()
                .worker_threads(4)
                .enable_all()
                .build()?;
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::from_std(std_listener)?;
                serve(listener, store, async {
                    let _ = rx.await;
                })
                .await
            })
        })?;
    Ok(NwpdHandle {
        addr: bound,
        shutdown: Some(tx),
        thread: Some(thread),
    })
}
