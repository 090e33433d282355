use axum::extract::State;
use axum::Json;
use serde::Deserialize;

use uuis_core::search::{normalize_query, AdvancedCriteria, Clause, EntityKind, SearchResults};

use crate::error::ApiResult;
use crate::extract::{blocking, Auth, Body, Params, Paging, Shared};

#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BasicQuery {
    #[serde(default)]
    pub q: String,
    pub kind: Option<String>,
    pub page: Option<u32>,
    #[serde(alias = "per_page", alias = "max")]
    pub per_page: Option<u32>,
}

pub async fn basic(
    State(uuis): State<Shared>,
    Auth(actor): Auth,
    Params(q): Params<BasicQuery>,
) -> ApiResult<Json<SearchResults>> {
    let page = Paging { page: q.page, per_page: q.per_page }.request()?;
    let kind = q.kind.as_deref().map(str::parse::<EntityKind>).transpose()?;
    let query = normalize_query(&q.q);
    Ok(Json(blocking(&uuis, move |u| u.basic_search(&actor, &query, kind, page)).await?))
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AdvancedBody {
    pub entity: EntityKind,
    #[serde(default)]
    pub clauses: Vec<Clause>,
    pub page: Option<u32>,
    #[serde(alias = "per_page")]
    pub per_page: Option<u32>,
}

pub async fn advanced(
    State(uuis): State<Shared>,
    Auth(actor): Auth,
    Body(b): Body<AdvancedBody>,
) -> ApiResult<Json<SearchResults>> {
    let page = Paging { page: b.page, per_page: b.per_page }.request()?;
    let criteria = AdvancedCriteria {
        entity: b.entity,
        clauses: b.clauses,
    };
    Ok(Json(blocking(&uuis, move |u| u.advanced_search(&actor, &criteria, page)).await?))
}
