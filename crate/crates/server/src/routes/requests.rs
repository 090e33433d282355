use axum::extract::State;
use axum::Json;
use serde::Deserialize;

use uuis_core::workflow::{NewRequest, Request, RequestAction, RequestBuckets};

use crate::error::ApiResult;
use crate::extract::{blocking, Auth, Body, Id, Shared};

pub async fn list(State(uuis): State<Shared>, Auth(actor): Auth) -> ApiResult<Json<RequestBuckets>> {
    Ok(Json(blocking(&uuis, move |u| u.request_list(&actor)).await?))
}

pub async fn show(State(uuis): State<Shared>, Auth(actor): Auth, Id(id): Id) -> ApiResult<Json<Request>> {
    Ok(Json(blocking(&uuis, move |u| u.request_show(&actor, id)).await?))
}

pub async fn save(State(uuis): State<Shared>, Auth(actor): Auth, Body(new): Body<NewRequest>) -> ApiResult<Json<Request>> {
    Ok(Json(blocking(&uuis, move |u| u.request_create(&actor, new)).await?))
}

async fn act(uuis: Shared, actor: uuis_core::Actor, id: i64, action: RequestAction) -> ApiResult<Json<Request>> {
    Ok(Json(blocking(&uuis, move |u| u.transition(&actor, id, action)).await?))
}

pub async fn approve(State(uuis): State<Shared>, Auth(actor): Auth, Id(id): Id) -> ApiResult<Json<Request>> {
    act(uuis, actor, id, RequestAction::Approve).await
}

pub async fn reject(State(uuis): State<Shared>, Auth(actor): Auth, Id(id): Id) -> ApiResult<Json<Request>> {
    act(uuis, actor, id, RequestAction::Reject).await
}

pub async fn execute(State(uuis): State<Shared>, Auth(actor): Auth, Id(id): Id) -> ApiResult<Json<Request>> {
    act(uuis, actor, id, RequestAction::Execute).await
}

pub async fn not_execute(State(uuis): State<Shared>, Auth(actor): Auth, Id(id): Id) -> ApiResult<Json<Request>> {
    act(uuis, actor, id, RequestAction::NotExecute).await
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Assignment {
    pub part_id: i64,
}

pub async fn assign(
    State(uuis): State<Shared>,
    Auth(actor): Auth,
    Id(id): Id,
    Body(a): Body<Assignment>,
) -> ApiResult<Json<Request>> {
    Ok(Json(blocking(&uuis, move |u| u.assign(&actor, id, a.part_id)).await?))
}
