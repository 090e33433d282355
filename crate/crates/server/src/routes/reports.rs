use axum::extract::State;
use axum::http::header::{CONTENT_DISPOSITION, CONTENT_TYPE};
use axum::response::{IntoResponse, Response};
use axum::Json;
use chrono::{DateTime, Utc};
use serde::Deserialize;

use uuis_core::paging::Page;
use uuis_core::reports::{export_csv, LocationReport, ReportFilter, RequestReportRow, Table, UserPermissionRow};
use uuis_core::workflow::RequestStatus;
use uuis_core::Uuis;

use crate::error::ApiResult;
use crate::extract::{blocking, Auth, Params, Shared};

#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ReportQuery {
    pub building: Option<i64>,
    pub room_type: Option<i64>,
    pub department: Option<i64>,
    /// Status name or two-letter code.
    pub status: Option<String>,
    pub date_from: Option<DateTime<Utc>>,
    pub date_to: Option<DateTime<Utc>>,
    pub page: Option<u32>,
    #[serde(alias = "per_page", alias = "max")]
    pub per_page: Option<u32>,
}

impl ReportQuery {
    fn into_filter(self) -> ApiResult<ReportFilter> {
        let status = self
            .status
            .as_deref()
            .filter(|s| !s.trim().is_empty())
            .map(str::parse::<RequestStatus>)
            .transpose()?;
        Ok(ReportFilter {
            building: self.building,
            room_type: self.room_type,
            department: self.department,
            status,
            date_from: self.date_from,
            date_to: self.date_to,
            page: self.page,
            per_page: self.per_page,
        })
    }
}

pub async fn assets_by_location(
    State(uuis): State<Shared>,
    Auth(actor): Auth,
    Params(q): Params<ReportQuery>,
) -> ApiResult<Json<LocationReport>> {
    let f = q.into_filter()?;
    Ok(Json(blocking(&uuis, move |u| u.report_assets_by_location(&actor, &f)).await?))
}

pub async fn requests(
    State(uuis): State<Shared>,
    Auth(actor): Auth,
    Params(q): Params<ReportQuery>,
) -> ApiResult<Json<Page<RequestReportRow>>> {
    let f = q.into_filter()?;
    Ok(Json(blocking(&uuis, move |u| u.report_requests(&actor, &f)).await?))
}

pub async fn user_permissions(
    State(uuis): State<Shared>,
    Auth(actor): Auth,
    Params(q): Params<ReportQuery>,
) -> ApiResult<Json<Page<UserPermissionRow>>> {
    let f = q.into_filter()?;
    Ok(Json(blocking(&uuis, move |u| u.report_user_permissions(&actor, &f)).await?))
}

async fn csv_download(
    uuis: Shared,
    q: ReportQuery,
    name: &'static str,
    table: impl FnOnce(&Uuis, &ReportFilter) -> uuis_core::Result<Table> + Send + 'static,
) -> ApiResult<Response> {
    let f = q.into_filter()?;
    let bytes = blocking(&uuis, move |u| export_csv(&table(u, &f)?)).await?;
    Ok((
        [
            (CONTENT_TYPE, "text/csv; charset=utf-8".to_string()),
            (CONTENT_DISPOSITION, format!("attachment; filename=\"{name}.csv\"")),
        ],
        bytes,
    )
        .into_response())
}

pub async fn assets_by_location_csv(
    State(uuis): State<Shared>,
    Auth(actor): Auth,
    Params(q): Params<ReportQuery>,
) -> ApiResult<Response> {
    csv_download(uuis, q, "assets-by-location", move |u, f| u.table_assets_by_location(&actor, f)).await
}

pub async fn requests_csv(
    State(uuis): State<Shared>,
    Auth(actor): Auth,
    Params(q): Params<ReportQuery>,
) -> ApiResult<Response> {
    csv_download(uuis, q, "requests", move |u, f| u.table_requests(&actor, f)).await
}

pub async fn user_permissions_csv(
    State(uuis): State<Shared>,
    Auth(actor): Auth,
    Params(q): Params<ReportQuery>,
) -> ApiResult<Response> {
    csv_download(uuis, q, "user-permissions", move |u, f| u.table_user_permissions(&actor, f)).await
}
