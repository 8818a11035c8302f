//! Mock workspace service: token login, changeset and node endpoints, a
//! GeoJSON export, the capture review API, and an async client for all of it.
//!
//! Every mutation is appended to a per-workspace JSON-lines log before it is
//! acknowledged; the log is replayed on startup.

pub mod api;
pub mod auth;
pub mod client;
pub mod config;
pub mod review;
pub mod server;
pub mod store;

pub use client::{ClientError, WorkspaceClient};
pub use config::ServiceConfig;
pub use server::{router, serve, serve_until, AppState, StartupError};
