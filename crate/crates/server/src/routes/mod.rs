//! HTTP routes under `/uuis/`, one per domain operation.

mod audit;
mod auth;
mod bulk;
mod inventory;
mod reports;
mod requests;
mod search;
mod structure;

use std::any::Any;

use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use tower_http::catch_panic::CatchPanicLayer;
use tower_http::trace::TraceLayer;

use crate::error::{internal_response, ApiError};
use crate::extract::Shared;

pub use bulk::BulkSummary;

/// Every API route, without middleware.
pub fn routes() -> Router<Shared> {
    Router::new()
        .route("/uuis/login", post(auth::login))
        .route("/uuis/logout", post(auth::logout))
        .route("/uuis/me", get(auth::me))
        .route("/uuis/request/list", get(requests::list))
        .route("/uuis/request/show/{id}", get(requests::show))
        .route("/uuis/request/save", post(requests::save))
        .route("/uuis/request/approve/{id}", post(requests::approve))
        .route("/uuis/request/reject/{id}", post(requests::reject))
        .route("/uuis/request/execute/{id}", post(requests::execute))
        .route("/uuis/request/notExecute/{id}", post(requests::not_execute))
        .route("/uuis/request/assign/{id}", post(requests::assign))
        .route("/uuis/asset/list", get(inventory::asset_list))
        .route("/uuis/asset/show/{id}", get(inventory::asset_show))
        .route("/uuis/asset/save", post(inventory::asset_save))
        .route("/uuis/asset/update/{id}", post(inventory::asset_update))
        .route("/uuis/assetType/list", get(inventory::asset_type_list))
        .route("/uuis/assetType/show/{id}", get(inventory::asset_type_show))
        .route("/uuis/assetType/save", post(inventory::asset_type_save))
        .route("/uuis/location/list", get(inventory::location_list))
        .route("/uuis/location/show/{id}", get(inventory::location_show))
        .route("/uuis/location/save", post(inventory::location_save))
        .route("/uuis/location/update/{id}", post(inventory::location_update))
        .route("/uuis/location/delete/{id}", post(inventory::location_delete))
        .route("/uuis/locationType/list", get(inventory::location_type_list))
        .route("/uuis/locationType/show/{id}", get(inventory::location_type_show))
        .route("/uuis/locationType/save", post(inventory::location_type_save))
        .route("/uuis/universityPart/list", get(structure::part_list))
        .route("/uuis/universityPart/show/{id}", get(structure::part_show))
        .route("/uuis/universityPart/heads/{id}", get(structure::part_heads))
        .route("/uuis/universityPart/create", post(structure::part_create))
        .route("/uuis/universityPart/update/{id}", post(structure::part_update))
        .route("/uuis/user/list", get(structure::user_list))
        .route("/uuis/user/show/{id}", get(structure::user_show))
        .route("/uuis/user/save", post(structure::user_save))
        .route("/uuis/user/update/{id}", post(structure::user_update))
        .route("/uuis/user/delete/{id}", post(structure::user_delete))
        .route("/uuis/user/access/{id}", get(structure::user_access))
        .route("/uuis/user/checkPermission/{id}", get(structure::user_check_permission))
        .route("/uuis/role/list", get(structure::role_list))
        .route("/uuis/role/show/{id}", get(structure::role_show))
        .route("/uuis/role/users/{id}", get(structure::role_users))
        .route("/uuis/role/save", post(structure::role_save))
        .route("/uuis/role/update/{id}", post(structure::role_update))
        .route("/uuis/role/delete/{id}", post(structure::role_delete))
        .route("/uuis/search", get(search::basic))
        .route("/uuis/search/advanced", post(search::advanced))
        .route("/uuis/bulkLoad/insert", post(bulk::insert))
        .route("/uuis/bulkLoad/update", post(bulk::update))
        .route("/uuis/report/assetsByLocation", get(reports::assets_by_location))
        .route("/uuis/report/assetsByLocation/csv", get(reports::assets_by_location_csv))
        .route("/uuis/report/requests", get(reports::requests))
        .route("/uuis/report/requests/csv", get(reports::requests_csv))
        .route("/uuis/report/userPermissions", get(reports::user_permissions))
        .route("/uuis/report/userPermissions/csv", get(reports::user_permissions_csv))
        .route("/uuis/auditLog/list", get(audit::list))
        .route("/uuis/auditLog/history/{class}/{id}", get(audit::history))
}

fn panic_response(payload: Box<dyn Any + Send + 'static>) -> Response {
    let detail = payload
        .downcast_ref::<String>()
        .cloned()
        .or_else(|| payload.downcast_ref::<&str>().map(|s| s.to_string()))
        .unwrap_or_else(|| "non-string panic payload".to_string());
    internal_response(&format!("handler panicked: {detail}"))
}

/// Adds the error fallbacks, panic backstop and request tracing to `routes`.
pub fn with_middleware(routes: Router<Shared>, state: Shared) -> Router {
    routes
        .fallback(|| async { ApiError::not_found("no such route") })
        .method_not_allowed_fallback(|| async {
            ApiError::new(StatusCode::METHOD_NOT_ALLOWED, "method_not_allowed", "method not allowed").into_response()
        })
        .layer(CatchPanicLayer::custom(panic_response))
        .layer(TraceLayer::new_for_http())
        .with_state(state)
}

pub fn app(state: Shared) -> Router {
    with_middleware(routes(), state)
}
