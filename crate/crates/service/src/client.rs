//! Async HTTP client for the workspace service.

use std::time::Duration;

use reqwest::{Method, RequestBuilder, StatusCode};
use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use gm_core::osw::{Changeset, ChangesetId};
use gm_core::vetting::VettingRecord;

use crate::api::{
    ChangesetClosed, ChangesetOpened, ErrorBody, Health, LoginRequest, NodeCreated, NodeDocument,
    ReviewDetail, ReviewQueueItem, ReviewSubmission, UserToken, VerdictAccepted,
};

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("cannot reach {url}: {source}")]
    Transport { url: String, source: reqwest::Error },
    #[error("{status} {code}: {message}")]
    Api {
        status: u16,
        code: String,
        message: String,
    },
    #[error("unexpected response from {url}: {message}")]
    Decode { url: String, message: String },
    #[error("not logged in")]
    NoToken,
}

impl ClientError {
    /// Network or server-side failure, as opposed to a rejected request.
    pub fn is_environmental(&self) -> bool {
        match self {
            ClientError::Transport { .. } | ClientError::Decode { .. } => true,
            ClientError::Api { status, .. } => *status >= 500,
            ClientError::NoToken => false,
        }
    }

    pub fn status(&self) -> Option<u16> {
        match self {
            ClientError::Api { status, .. } => Some(*status),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct WorkspaceClient {
    http: reqwest::Client,
    base: String,
    token: Option<String>,
    node_retries: u32,
}

impl WorkspaceClient {
    pub fn new(base_url: &str) -> Result<Self, ClientError> {
        let http = reqwest::Client::builder()
            .connect_timeout(Duration::from_secs(5))
            .timeout(Duration::from_secs(30))
            .no_proxy()
            .build()
            .map_err(|source| ClientError::Transport {
                url: base_url.to_string(),
                source,
            })?;
        Ok(Self {
            http,
            base: base_url.trim_end_matches('/').to_string(),
            token: None,
            node_retries: 3,
        })
    }

    pub fn with_token(mut self, token: impl Into<String>) -> Self {
        self.token = Some(token.into());
        self
    }

    pub fn token(&self) -> Option<&str> {
        self.token.as_deref()
    }

    fn request(
        &self,
        method: Method,
        path: &str,
        authed: bool,
    ) -> Result<(String, RequestBuilder), ClientError> {
        let url = format!("{}{path}", self.base);
        let mut rb = self.http.request(method, &url);
        if authed {
            rb = rb.bearer_auth(self.token.as_deref().ok_or(ClientError::NoToken)?);
        }
        Ok((url, rb))
    }

    async fn send(url: &str, rb: RequestBuilder) -> Result<(StatusCode, String), ClientError> {
        let resp = rb.send().await.map_err(|source| ClientError::Transport {
            url: url.to_string(),
            source,
        })?;
        let status = resp.status();
        let text = resp.text().await.map_err(|source| ClientError::Transport {
            url: url.to_string(),
            source,
        })?;
        if status.is_success() {
            return Ok((status, text));
        }
        let (code, message) = match serde_json::from_str::<ErrorBody>(&text) {
            Ok(b) => (b.error, b.message),
            Err(_) => (
                status.canonical_reason().unwrap_or("error").to_string(),
                text,
            ),
        };
        Err(ClientError::Api {
            status: status.as_u16(),
            code,
            message,
        })
    }

    fn decode<T: DeserializeOwned>(url: &str, text: &str) -> Result<T, ClientError> {
        serde_json::from_str(text).map_err(|e| ClientError::Decode {
            url: url.to_string(),
            message: e.to_string(),
        })
    }

    async fn call<B: Serialize, T: DeserializeOwned>(
        &self,
        method: Method,
        path: &str,
        authed: bool,
        body: Option<&B>,
    ) -> Result<T, ClientError> {
        let (url, mut rb) = self.request(method, path, authed)?;
        if let Some(b) = body {
            rb = rb.json(b);
        }
        let (_, text) = Self::send(&url, rb).await?;
        Self::decode(&url, &text)
    }

    pub async fn health(&self) -> Result<Health, ClientError> {
        self.call::<(), _>(Method::GET, "/v1/health", false, None)
            .await
    }

    /// Logs in and keeps the token for later calls.
    pub async fn login(&mut self, user_id: &str, secret: &str) -> Result<UserToken, ClientError> {
        let req = LoginRequest {
            user_id: user_id.into(),
            secret: secret.into(),
        };
        let t: UserToken = self
            .call(Method::POST, "/v1/login", false, Some(&req))
            .await?;
        self.token = Some(t.token.clone());
        Ok(t)
    }

    pub async fn open_changeset(&self, ws: &str) -> Result<ChangesetId, ClientError> {
        let path = format!("/v1/workspaces/{ws}/changesets");
        let r: ChangesetOpened = self.call::<(), _>(Method::POST, &path, true, None).await?;
        Ok(r.changeset_id)
    }

    pub async fn changeset(&self, ws: &str, cs: ChangesetId) -> Result<Changeset, ClientError> {
        let path = format!("/v1/workspaces/{ws}/changesets/{cs}");
        self.call::<(), _>(Method::GET, &path, true, None).await
    }

    /// Uploads one node. Transport failures are retried when the document
    /// carries a client key, which makes the retry idempotent.
    pub async fn add_node(
        &self,
        ws: &str,
        cs: ChangesetId,
        doc: &NodeDocument,
    ) -> Result<NodeCreated, ClientError> {
        let path = format!("/v1/workspaces/{ws}/changesets/{cs}/nodes");
        let attempts = if doc.client_key.is_some() {
            self.node_retries + 1
        } else {
            1
        };
        let mut attempt = 0;
        loop {
            attempt += 1;
            match self.call(Method::POST, &path, true, Some(doc)).await {
                Err(ClientError::Transport { url, source }) if attempt < attempts => {
                    tracing::warn!(%url, error = %source, attempt, "retrying node upload");
                    tokio::time::sleep(Duration::from_millis(100 << attempt)).await;
                }
                other => return other,
            }
        }
    }

    pub async fn close_changeset(
        &self,
        ws: &str,
        cs: ChangesetId,
    ) -> Result<ChangesetClosed, ClientError> {
        let path = format!("/v1/workspaces/{ws}/changesets/{cs}/close");
        self.call::<(), _>(Method::PUT, &path, true, None).await
    }

    /// The export document exactly as served.
    pub async fn export(&self, ws: &str) -> Result<String, ClientError> {
        let (url, rb) = self.request(Method::GET, &format!("/v1/workspaces/{ws}/export"), true)?;
        Ok(Self::send(&url, rb).await?.1)
    }

    pub async fn submit_review(&self, sub: &ReviewSubmission) -> Result<(), ClientError> {
        let (url, rb) = self.request(Method::POST, "/v1/review/items", true)?;
        Self::send(&url, rb.json(sub)).await.map(|_| ())
    }

    pub async fn review_queue(&self) -> Result<Vec<ReviewQueueItem>, ClientError> {
        self.call::<(), _>(Method::GET, "/v1/review/queue", true, None)
            .await
    }

    pub async fn review_detail(&self, capture_id: &str) -> Result<ReviewDetail, ClientError> {
        self.call::<(), _>(Method::GET, &format!("/v1/review/{capture_id}"), true, None)
            .await
    }

    pub async fn post_verdict(
        &self,
        record: &VettingRecord,
    ) -> Result<VerdictAccepted, ClientError> {
        let path = format!("/v1/review/{}/verdict", record.capture_id);
        self.call(Method::POST, &path, true, Some(record)).await
    }
}
