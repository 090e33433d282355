use std::sync::Arc;

use axum::extract::rejection::{JsonRejection, PathRejection, QueryRejection};
use axum::extract::{FromRequest, FromRequestParts, Path, Query, Request};
use axum::http::header::COOKIE;
use axum::http::request::Parts;
use axum::http::HeaderMap;
use axum::Json;
use serde::de::DeserializeOwned;
use serde::Deserialize;

use uuis_core::paging::{PageRequest, DEFAULT_PER_PAGE};
use uuis_core::{Actor, Error, Uuis};

use crate::error::{ApiError, ApiResult};

pub type Shared = Arc<Uuis>;

pub const SESSION_COOKIE: &str = "UUIS_SESSION";

/// Runs a synchronous domain call off the async executor.
///
/// A panic inside `f` is re-raised on the handler task so the panic layer
/// turns it into a 500.
pub async fn blocking<T, F>(uuis: &Shared, f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce(&Uuis) -> uuis_core::Result<T> + Send + 'static,
{
    let uuis = Arc::clone(uuis);
    match tokio::task::spawn_blocking(move || f(&uuis)).await {
        Ok(res) => res.map_err(ApiError::from),
        Err(e) if e.is_panic() => std::panic::resume_unwind(e.into_panic()),
        Err(e) => Err(ApiError::internal(e)),
    }
}

pub fn session_token(headers: &HeaderMap) -> Option<String> {
    headers
        .get_all(COOKIE)
        .iter()
        .filter_map(|v| v.to_str().ok())
        .flat_map(|v| v.split(';'))
        .filter_map(|kv| kv.trim().strip_prefix(SESSION_COOKIE)?.strip_prefix('='))
        .map(str::to_string)
        .next()
}

/// The signed-in user, with the request path recorded for auditing.
pub struct Auth(pub Actor);

impl FromRequestParts<Shared> for Auth {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &Shared) -> Result<Self, ApiError> {
        let token = session_token(&parts.headers).ok_or(Error::Unauthenticated)?;
        let path = parts.uri.path().to_string();
        let actor = blocking(state, move |u| u.actor_for_session(&token)).await?;
        Ok(Auth(actor.with_uri(path)))
    }
}

/// JSON body whose parse failures become 400 responses.
pub struct Body<T>(pub T);

impl<T: DeserializeOwned, S: Send + Sync> FromRequest<S> for Body<T> {
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, ApiError> {
        match Json::<T>::from_request(req, state).await {
            Ok(Json(v)) => Ok(Body(v)),
            Err(e) => Err(ApiError::bad_request(json_message(&e))),
        }
    }
}

fn json_message(e: &JsonRejection) -> String {
    e.body_text()
}

/// Query string whose parse failures become 400 responses.
pub struct Params<T>(pub T);

impl<T: DeserializeOwned, S: Send + Sync> FromRequestParts<S> for Params<T> {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &S) -> Result<Self, ApiError> {
        Query::<T>::from_request_parts(parts, state)
            .await
            .map(|Query(v)| Params(v))
            .map_err(|e: QueryRejection| ApiError::bad_request(e.body_text()))
    }
}

/// Numeric path id; anything else is a 400.
pub struct Id(pub i64);

impl<S: Send + Sync> FromRequestParts<S> for Id {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &S) -> Result<Self, ApiError> {
        Path::<i64>::from_request_parts(parts, state)
            .await
            .map(|Path(id)| Id(id))
            .map_err(|e: PathRejection| ApiError::bad_request(e.body_text()))
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Paging {
    pub page: Option<u32>,
    #[serde(alias = "per_page", alias = "max")]
    pub per_page: Option<u32>,
}

impl Paging {
    pub fn request(&self) -> ApiResult<PageRequest> {
        self.request_or(DEFAULT_PER_PAGE)
    }

    pub fn request_or(&self, default_per_page: u32) -> ApiResult<PageRequest> {
        Ok(PageRequest::new(
            self.page.unwrap_or(1),
            self.per_page.unwrap_or(default_per_page),
        )?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use axum::http::HeaderValue;

    #[test]
    fn finds_session_cookie_among_others() {
        let mut h = HeaderMap::new();
        h.append(COOKIE, HeaderValue::from_static("theme=dark; UUIS_SESSION=abc123; x=y"));
        assert_eq!(session_token(&h).as_deref(), Some("abc123"));
        let mut h = HeaderMap::new();
        h.append(COOKIE, HeaderValue::from_static("UUIS_SESSIONX=nope"));
        assert_eq!(session_token(&h), None);
    }
}
