use axum::extract::rejection::PathRejection;
use axum::extract::{Path, State};
use axum::Json;
use serde::Deserialize;

use uuis_core::audit::{AuditEntry, SortOrder, AUDIT_PER_PAGE};
use uuis_core::paging::Page;

use crate::error::{ApiError, ApiResult};
use crate::extract::{blocking, Auth, Params, Paging, Shared};

#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AuditQuery {
    pub page: Option<u32>,
    #[serde(alias = "per_page", alias = "max")]
    pub per_page: Option<u32>,
    /// Only `lastUpdated` is sortable.
    pub sort: Option<String>,
    pub order: Option<SortOrder>,
}

pub async fn list(
    State(uuis): State<Shared>,
    Auth(actor): Auth,
    Params(q): Params<AuditQuery>,
) -> ApiResult<Json<Page<AuditEntry>>> {
    if let Some(sort) = q.sort.as_deref() {
        if sort != "lastUpdated" {
            return Err(ApiError::bad_request(format!("cannot sort by {sort:?}; only lastUpdated is sortable")));
        }
    }
    let page = Paging { page: q.page, per_page: q.per_page }.request_or(AUDIT_PER_PAGE)?;
    let order = q.order.unwrap_or_default();
    Ok(Json(blocking(&uuis, move |u| u.audit_list(&actor, page, order)).await?))
}

pub async fn history(
    State(uuis): State<Shared>,
    Auth(actor): Auth,
    path: Result<Path<(String, i64)>, PathRejection>,
) -> ApiResult<Json<Vec<AuditEntry>>> {
    let Path((class_name, id)) = path.map_err(|e| ApiError::bad_request(e.body_text()))?;
    Ok(Json(blocking(&uuis, move |u| u.audit_history(&actor, &class_name, id)).await?))
}
