#![allow(dead_code)]

use std::sync::Arc;

use axum::body::Body;
use axum::http::{header, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::Value;
use tower::ServiceExt;

use uuis_core::security::PasswordHasher;
use uuis_core::storage::{seed_fixture, Store, SEED_PASSWORD};
use uuis_core::Uuis;

pub fn seeded_uuis() -> Arc<Uuis> {
    let uuis = Uuis::with_hasher(Store::open_in_memory().unwrap(), PasswordHasher::fast());
    seed_fixture(uuis.store(), uuis.passwords()).unwrap();
    Arc::new(uuis)
}

pub struct Reply {
    pub status: StatusCode,
    pub headers: axum::http::HeaderMap,
    pub bytes: Vec<u8>,
}

impl Reply {
    pub fn json(&self) -> Value {
        serde_json::from_slice(&self.bytes)
            .unwrap_or_else(|e| panic!("body is not JSON ({e}): {}", String::from_utf8_lossy(&self.bytes)))
    }

    pub fn text(&self) -> String {
        String::from_utf8(self.bytes.clone()).unwrap()
    }
}

/// In-process HTTP client holding one session cookie.
#[derive(Clone)]
pub struct Client {
    pub app: Router,
    pub uuis: Arc<Uuis>,
    pub cookie: Option<String>,
}

impl Client {
    pub fn new(uuis: Arc<Uuis>) -> Self {
        Client {
            app: uuis_server::app(Arc::clone(&uuis)),
            uuis,
            cookie: None,
        }
    }

    pub fn seeded() -> Self {
        Self::new(seeded_uuis())
    }

    pub async fn send(&self, req: Request<Body>) -> Reply {
        let mut req = req;
        if let Some(c) = &self.cookie {
            req.headers_mut().insert(header::COOKIE, c.parse().unwrap());
        }
        let res = self.app.clone().oneshot(req).await.unwrap();
        let status = res.status();
        let headers = res.headers().clone();
        let bytes = res.into_body().collect().await.unwrap().to_bytes().to_vec();
        Reply { status, headers, bytes }
    }

    pub async fn get(&self, uri: &str) -> Reply {
        self.send(Request::get(uri).body(Body::empty()).unwrap()).await
    }

    pub async fn post(&self, uri: &str, body: Value) -> Reply {
        self.post_raw(uri, "application/json", body.to_string().into_bytes()).await
    }

    pub async fn post_raw(&self, uri: &str, content_type: &str, body: Vec<u8>) -> Reply {
        self.send(
            Request::post(uri)
                .header(header::CONTENT_TYPE, content_type)
                .body(Body::from(body))
                .unwrap(),
        )
        .await
    }

    pub async fn upload(&self, uri: &str, csv: &[u8]) -> Reply {
        let boundary = "uuisboundary7MA4YWxkTrZu0gW";
        let mut body = Vec::new();
        body.extend_from_slice(
            format!(
                "--{boundary}\r\nContent-Disposition: form-data; name=\"file\"; filename=\"assets.csv\"\r\n\
                 Content-Type: text/csv\r\n\r\n"
            )
            .as_bytes(),
        );
        body.extend_from_slice(csv);
        body.extend_from_slice(format!("\r\n--{boundary}--\r\n").as_bytes());
        self.post_raw(uri, &format!("multipart/form-data; boundary={boundary}"), body).await
    }

    /// Logs in and keeps the returned cookie.
    pub async fn login(&mut self, username: &str) -> Reply {
        self.login_with(username, SEED_PASSWORD).await
    }

    pub async fn login_with(&mut self, username: &str, password: &str) -> Reply {
        let r = self
            .post("/uuis/login", serde_json::json!({ "username": username, "password": password }))
            .await;
        if let Some(v) = r.headers.get(header::SET_COOKIE) {
            let pair = v.to_str().unwrap().split(';').next().unwrap().to_string();
            self.cookie = Some(pair);
        }
        r
    }

    pub async fn as_user(uuis: &Arc<Uuis>, username: &str) -> Client {
        let mut c = Client::new(Arc::clone(uuis));
        let r = c.login(username).await;
        assert_eq!(r.status, StatusCode::OK, "login {username}: {}", r.text());
        c
    }
}
