use axum::http::header::SET_COOKIE;
use axum::http::HeaderMap;
use axum::response::{IntoResponse, Response};
use axum::extract::State;
use axum::Json;
use serde::Deserialize;

use uuis_core::security::{UserDetail, SESSION_IDLE_TIMEOUT};

use crate::error::ApiResult;
use crate::extract::{blocking, session_token, Auth, Body, Shared, SESSION_COOKIE};

#[derive(Debug, Deserialize)]
pub struct Credentials {
    pub username: String,
    pub password: String,
}

pub async fn login(State(uuis): State<Shared>, Body(c): Body<Credentials>) -> ApiResult<Response> {
    let (token, me) = blocking(&uuis, move |u| {
        let session = u.authenticate(&c.username, &c.password)?;
        let actor = u.actor_for_session(&session.token)?;
        Ok((session.token, u.me(&actor)?))
    })
    .await?;
    let cookie = format!(
        "{SESSION_COOKIE}={token}; HttpOnly; SameSite=Lax; Path=/; Max-Age={}",
        SESSION_IDLE_TIMEOUT.num_seconds()
    );
    Ok(([(SET_COOKIE, cookie)], Json(me)).into_response())
}

pub async fn logout(State(uuis): State<Shared>, headers: HeaderMap) -> Response {
    if let Some(token) = session_token(&headers) {
        uuis.logout(&token);
    }
    let cookie = format!("{SESSION_COOKIE}=; HttpOnly; SameSite=Lax; Path=/; Max-Age=0");
    ([(SET_COOKIE, cookie)], Json(serde_json::json!({ "loggedOut": true }))).into_response()
}

pub async fn me(State(uuis): State<Shared>, Auth(actor): Auth) -> ApiResult<Json<UserDetail>> {
    Ok(Json(blocking(&uuis, move |u| u.me(&actor)).await?))
}
