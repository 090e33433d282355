use std::collections::BTreeSet;

use axum::extract::State;
use axum::Json;
use serde::{Deserialize, Serialize};

use uuis_core::paging::Page;
use uuis_core::security::{
    Level, NewPart, NewRole, NewUser, PartChanges, Permission, Role, RoleChanges, UniversityPart, User, UserChanges,
    UserDetail,
};
use uuis_core::{Actor, Error, Uuis};

use crate::error::{ApiError, ApiResult};
use crate::extract::{blocking, Auth, Body, Id, Params, Paging, Shared};

pub async fn part_list(State(uuis): State<Shared>, Auth(actor): Auth) -> ApiResult<Json<Vec<UniversityPart>>> {
    Ok(Json(blocking(&uuis, move |u| u.part_list(&actor)).await?))
}

pub async fn part_show(State(uuis): State<Shared>, Auth(actor): Auth, Id(id): Id) -> ApiResult<Json<UniversityPart>> {
    Ok(Json(blocking(&uuis, move |u| u.part_show(&actor, id)).await?))
}

pub async fn part_heads(State(uuis): State<Shared>, Auth(actor): Auth, Id(id): Id) -> ApiResult<Json<Vec<User>>> {
    Ok(Json(blocking(&uuis, move |u| u.part_heads(&actor, id)).await?))
}

pub async fn part_create(
    State(uuis): State<Shared>,
    Auth(actor): Auth,
    Body(new): Body<NewPart>,
) -> ApiResult<Json<UniversityPart>> {
    Ok(Json(blocking(&uuis, move |u| u.part_create(&actor, new)).await?))
}

pub async fn part_update(
    State(uuis): State<Shared>,
    Auth(actor): Auth,
    Id(id): Id,
    Body(changes): Body<PartChanges>,
) -> ApiResult<Json<UniversityPart>> {
    Ok(Json(blocking(&uuis, move |u| u.part_update(&actor, id, changes)).await?))
}

pub async fn user_list(
    State(uuis): State<Shared>,
    Auth(actor): Auth,
    Params(p): Params<Paging>,
) -> ApiResult<Json<Page<User>>> {
    let page = p.request()?;
    Ok(Json(blocking(&uuis, move |u| u.user_list(&actor, page)).await?))
}

pub async fn user_show(State(uuis): State<Shared>, Auth(actor): Auth, Id(id): Id) -> ApiResult<Json<UserDetail>> {
    Ok(Json(blocking(&uuis, move |u| u.user_show(&actor, id)).await?))
}

pub async fn user_save(State(uuis): State<Shared>, Auth(actor): Auth, Body(new): Body<NewUser>) -> ApiResult<Json<UserDetail>> {
    Ok(Json(blocking(&uuis, move |u| u.user_create(&actor, new)).await?))
}

pub async fn user_update(
    State(uuis): State<Shared>,
    Auth(actor): Auth,
    Id(id): Id,
    Body(changes): Body<UserChanges>,
) -> ApiResult<Json<UserDetail>> {
    Ok(Json(blocking(&uuis, move |u| u.user_update(&actor, id, changes)).await?))
}

pub async fn user_delete(State(uuis): State<Shared>, Auth(actor): Auth, Id(id): Id) -> ApiResult<Json<serde_json::Value>> {
    blocking(&uuis, move |u| u.user_delete(&actor, id)).await?;
    Ok(Json(serde_json::json!({ "deleted": id })))
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct AccessSummary {
    pub user_id: i64,
    pub level: Level,
    pub scope: BTreeSet<i64>,
}

/// Users may inspect their own access; level-3 users may inspect anyone's.
fn may_inspect(u: &Uuis, actor: &Actor, target: i64) -> uuis_core::Result<()> {
    if actor.user_id == target || u.level_of(actor.user_id)? == Level::Institution {
        Ok(())
    } else {
        Err(Error::forbidden(format!("{} may not inspect user {target}", actor.username)))
    }
}

pub async fn user_access(State(uuis): State<Shared>, Auth(actor): Auth, Id(id): Id) -> ApiResult<Json<AccessSummary>> {
    let summary = blocking(&uuis, move |u| {
        may_inspect(u, &actor, id)?;
        Ok(AccessSummary {
            user_id: id,
            level: u.level_of(id)?,
            scope: u.scope_of(id)?,
        })
    })
    .await?;
    Ok(Json(summary))
}

#[derive(Debug, Deserialize)]
pub struct PermissionQuery {
    pub action: String,
    pub part: i64,
}

pub async fn user_check_permission(
    State(uuis): State<Shared>,
    Auth(actor): Auth,
    Id(id): Id,
    Params(q): Params<PermissionQuery>,
) -> ApiResult<Json<serde_json::Value>> {
    let perm: Permission = q.action.parse().map_err(ApiError::bad_request)?;
    let allowed = blocking(&uuis, move |u| {
        may_inspect(u, &actor, id)?;
        u.check_permission(id, perm, q.part)
    })
    .await?;
    Ok(Json(serde_json::json!({ "allowed": allowed })))
}

pub async fn role_list(State(uuis): State<Shared>, Auth(actor): Auth) -> ApiResult<Json<Vec<Role>>> {
    Ok(Json(blocking(&uuis, move |u| u.role_list(&actor)).await?))
}

pub async fn role_show(State(uuis): State<Shared>, Auth(actor): Auth, Id(id): Id) -> ApiResult<Json<Role>> {
    Ok(Json(blocking(&uuis, move |u| u.role_show(&actor, id)).await?))
}

pub async fn role_users(State(uuis): State<Shared>, Auth(actor): Auth, Id(id): Id) -> ApiResult<Json<Vec<User>>> {
    Ok(Json(blocking(&uuis, move |u| u.role_users(&actor, id)).await?))
}

pub async fn role_save(State(uuis): State<Shared>, Auth(actor): Auth, Body(new): Body<NewRole>) -> ApiResult<Json<Role>> {
    Ok(Json(blocking(&uuis, move |u| u.role_create(&actor, new)).await?))
}

pub async fn role_update(
    State(uuis): State<Shared>,
    Auth(actor): Auth,
    Id(id): Id,
    Body(changes): Body<RoleChanges>,
) -> ApiResult<Json<Role>> {
    Ok(Json(blocking(&uuis, move |u| u.role_update(&actor, id, changes)).await?))
}

pub async fn role_delete(State(uuis): State<Shared>, Auth(actor): Auth, Id(id): Id) -> ApiResult<Json<serde_json::Value>> {
    blocking(&uuis, move |u| u.role_delete(&actor, id)).await?;
    Ok(Json(serde_json::json!({ "deleted": id })))
}
