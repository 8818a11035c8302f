#![allow(dead_code)]

use std::collections::BTreeMap;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{header, Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::Value;
use tower::ServiceExt;

use gm_service::{router, AppState, ServiceConfig};

pub fn config() -> ServiceConfig {
    ServiceConfig {
        users: BTreeMap::from([
            ("ana".to_string(), "pw-a".to_string()),
            ("bo".to_string(), "pw-b".to_string()),
        ]),
        workspaces: vec!["demo".into()],
        ..ServiceConfig::default()
    }
}

pub fn app(cfg: &ServiceConfig) -> Router {
    router(Arc::new(AppState::new(cfg).unwrap()), None)
}

/// One exchange as seen on the wire.
#[derive(Debug, Clone)]
pub struct Exchange {
    pub status: StatusCode,
    pub request: Option<Value>,
    pub body: String,
}

impl Exchange {
    pub fn json(&self) -> Value {
        serde_json::from_str(&self.body).unwrap_or(Value::Null)
    }
}

pub struct Harness {
    pub app: Router,
    pub rt: tokio::runtime::Runtime,
    pub log: Vec<Exchange>,
}

impl Harness {
    pub fn new(cfg: &ServiceConfig) -> Self {
        Self {
            app: app(cfg),
            rt: tokio::runtime::Builder::new_current_thread()
                .build()
                .unwrap(),
            log: Vec::new(),
        }
    }

    pub fn send(
        &mut self,
        method: Method,
        uri: &str,
        token: Option<&str>,
        body: Option<Value>,
    ) -> Exchange {
        let mut rb = Request::builder().method(method).uri(uri);
        if let Some(t) = token {
            rb = rb.header(header::AUTHORIZATION, format!("Bearer {t}"));
        }
        let req = match &body {
            Some(b) => rb
                .header(header::CONTENT_TYPE, "application/json")
                .body(Body::from(b.to_string()))
                .unwrap(),
            None => rb.body(Body::empty()).unwrap(),
        };
        let app = self.app.clone();
        let (status, bytes) = self.rt.block_on(async move {
            let resp = app.oneshot(req).await.unwrap();
            let status = resp.status();
            (status, resp.into_body().collect().await.unwrap().to_bytes())
        });
        let ex = Exchange {
            status,
            request: body,
            body: String::from_utf8(bytes.to_vec()).unwrap(),
        };
        self.log.push(ex.clone());
        ex
    }

    pub fn login(&mut self, user: &str, secret: &str) -> Exchange {
        self.send(
            Method::POST,
            "/v1/login",
            None,
            Some(serde_json::json!({ "user_id": user, "secret": secret })),
        )
    }

    pub fn token(&mut self, user: &str, secret: &str) -> String {
        let ex = self.login(user, secret);
        assert_eq!(ex.status, StatusCode::OK, "{}", ex.body);
        ex.json()["token"].as_str().unwrap().to_string()
    }

    pub fn open(&mut self, ws: &str, token: &str) -> Exchange {
        self.send(
            Method::POST,
            &format!("/v1/workspaces/{ws}/changesets"),
            Some(token),
            None,
        )
    }

    pub fn open_id(&mut self, ws: &str, token: &str) -> u64 {
        let ex = self.open(ws, token);
        assert_eq!(ex.status, StatusCode::CREATED, "{}", ex.body);
        ex.json()["changeset_id"].as_u64().unwrap()
    }

    pub fn node(&mut self, ws: &str, cs: u64, token: &str, doc: Value) -> Exchange {
        self.send(
            Method::POST,
            &format!("/v1/workspaces/{ws}/changesets/{cs}/nodes"),
            Some(token),
            Some(doc),
        )
    }

    pub fn close(&mut self, ws: &str, cs: u64, token: &str) -> Exchange {
        self.send(
            Method::PUT,
            &format!("/v1/workspaces/{ws}/changesets/{cs}/close"),
            Some(token),
            None,
        )
    }

    pub fn export(&mut self, ws: &str, token: &str) -> Exchange {
        self.send(
            Method::GET,
            &format!("/v1/workspaces/{ws}/export"),
            Some(token),
            None,
        )
    }
}

pub fn node_doc(class: &str, lat: f64, t: f64) -> Value {
    serde_json::json!({
        "location": { "latitude": lat, "longitude": -122.3 },
        "class": class,
        "timestamp": t,
    })
}
