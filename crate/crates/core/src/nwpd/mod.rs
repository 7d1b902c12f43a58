//! Network-wide policy database (NWPD): a small JSON-over-HTTP service that
//! holds the operator's current policy document.
//!
//! * `GET /policy` → 200 with the document, or 404 when none is installed.
//! * `PUT /policy` → 200 `{"version": n}`, 400 with field-level errors, or
//!   409 when the version does not exceed the current one.

mod client;
mod server;
mod store;

use thiserror::Error;

pub use client::NwpdClient;
pub use server::{router, serve, spawn, NwpdHandle};
pub use store::{load_store, persist_store, PolicyStore, PutError, StoredPolicy, StoreError};

/// Environment variable overriding the store path of `serve-nwpd`.
pub const STORE_ENV: &str = "HWV_NWPD_STORE";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FetchError {
    #[error("policy database unreachable: {0}")]
    Unreachable(String),
    #[error("policy database has no policy installed")]
    NoPolicy,
    #[error("malformed policy: {0}")]
    MalformedPolicy(String),
    #[error("policy rejected: {0}")]
    Rejected(String),
    #[error("stale policy version: {0}")]
    Stale(String),
    #[error("unexpected HTTP {status}: {body}")]
    Http { status: u16, body: String },
}
