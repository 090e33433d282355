use axum::extract::State;
use axum::Json;
use serde::Deserialize;

use uuis_core::inventory::{
    Asset, AssetChanges, AssetFilter, AssetType, Location, LocationChanges, LocationFilter, LocationType, NewAsset,
    NewLocation, NewType,
};
use uuis_core::paging::Page;

use crate::error::ApiResult;
use crate::extract::{blocking, Auth, Body, Id, Params, Paging, Shared};

#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AssetQuery {
    pub page: Option<u32>,
    #[serde(alias = "per_page", alias = "max")]
    pub per_page: Option<u32>,
    pub location_id: Option<i64>,
    pub owner_id: Option<i64>,
    pub type_id: Option<i64>,
}

pub async fn asset_list(
    State(uuis): State<Shared>,
    Auth(actor): Auth,
    Params(q): Params<AssetQuery>,
) -> ApiResult<Json<Page<Asset>>> {
    let page = Paging { page: q.page, per_page: q.per_page }.request()?;
    let filter = AssetFilter {
        location_id: q.location_id,
        owner_id: q.owner_id,
        type_id: q.type_id,
    };
    Ok(Json(blocking(&uuis, move |u| u.asset_list(&actor, filter, page)).await?))
}

pub async fn asset_show(State(uuis): State<Shared>, Auth(actor): Auth, Id(id): Id) -> ApiResult<Json<Asset>> {
    Ok(Json(blocking(&uuis, move |u| u.asset_show(&actor, id)).await?))
}

pub async fn asset_save(State(uuis): State<Shared>, Auth(actor): Auth, Body(new): Body<NewAsset>) -> ApiResult<Json<Asset>> {
    Ok(Json(blocking(&uuis, move |u| u.asset_create(&actor, new)).await?))
}

pub async fn asset_update(
    State(uuis): State<Shared>,
    Auth(actor): Auth,
    Id(id): Id,
    Body(changes): Body<AssetChanges>,
) -> ApiResult<Json<Asset>> {
    Ok(Json(blocking(&uuis, move |u| u.asset_edit(&actor, id, changes)).await?))
}

pub async fn asset_type_list(State(uuis): State<Shared>, Auth(actor): Auth) -> ApiResult<Json<Vec<AssetType>>> {
    Ok(Json(blocking(&uuis, move |u| u.asset_type_list(&actor)).await?))
}

pub async fn asset_type_show(State(uuis): State<Shared>, Auth(actor): Auth, Id(id): Id) -> ApiResult<Json<AssetType>> {
    Ok(Json(blocking(&uuis, move |u| u.asset_type_show(&actor, id)).await?))
}

pub async fn asset_type_save(
    State(uuis): State<Shared>,
    Auth(actor): Auth,
    Body(new): Body<NewType>,
) -> ApiResult<Json<AssetType>> {
    Ok(Json(blocking(&uuis, move |u| u.asset_type_create(&actor, new)).await?))
}

#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LocationQuery {
    pub page: Option<u32>,
    #[serde(alias = "per_page", alias = "max")]
    pub per_page: Option<u32>,
    pub parent_location_id: Option<i64>,
    pub type_id: Option<i64>,
}

pub async fn location_list(
    State(uuis): State<Shared>,
    Auth(actor): Auth,
    Params(q): Params<LocationQuery>,
) -> ApiResult<Json<Page<Location>>> {
    let page = Paging { page: q.page, per_page: q.per_page }.request()?;
    let filter = LocationFilter {
        parent_location_id: q.parent_location_id,
        type_id: q.type_id,
    };
    Ok(Json(blocking(&uuis, move |u| u.location_list(&actor, filter, page)).await?))
}

pub async fn location_show(State(uuis): State<Shared>, Auth(actor): Auth, Id(id): Id) -> ApiResult<Json<Location>> {
    Ok(Json(blocking(&uuis, move |u| u.location_show(&actor, id)).await?))
}

pub async fn location_save(
    State(uuis): State<Shared>,
    Auth(actor): Auth,
    Body(new): Body<NewLocation>,
) -> ApiResult<Json<Location>> {
    Ok(Json(blocking(&uuis, move |u| u.location_create(&actor, new)).await?))
}

pub async fn location_update(
    State(uuis): State<Shared>,
    Auth(actor): Auth,
    Id(id): Id,
    Body(changes): Body<LocationChanges>,
) -> ApiResult<Json<Location>> {
    Ok(Json(blocking(&uuis, move |u| u.location_edit(&actor, id, changes)).await?))
}

pub async fn location_delete(
    State(uuis): State<Shared>,
    Auth(actor): Auth,
    Id(id): Id,
) -> ApiResult<Json<serde_json::Value>> {
    blocking(&uuis, move |u| u.location_delete(&actor, id)).await?;
    Ok(Json(serde_json::json!({ "deleted": id })))
}

pub async fn location_type_list(State(uuis): State<Shared>, Auth(actor): Auth) -> ApiResult<Json<Vec<LocationType>>> {
    Ok(Json(blocking(&uuis, move |u| u.location_type_list(&actor)).await?))
}

pub async fn location_type_show(
    State(uuis): State<Shared>,
    Auth(actor): Auth,
    Id(id): Id,
) -> ApiResult<Json<LocationType>> {
    Ok(Json(blocking(&uuis, move |u| u.location_type_show(&actor, id)).await?))
}

pub async fn location_type_save(
    State(uuis): State<Shared>,
    Auth(actor): Auth,
    Body(new): Body<NewType>,
) -> ApiResult<Json<LocationType>> {
    Ok(Json(blocking(&uuis, move |u| u.location_type_create(&actor, new)).await?))
}
