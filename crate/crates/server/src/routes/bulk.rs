use axum::extract::{Multipart, State};
use axum::Json;
use serde::Serialize;

use uuis_core::bulkload::{parse_csv, RowOutcome, RowResult};

use crate::error::{ApiError, ApiResult};
use crate::extract::{blocking, Auth, Shared};

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BulkSummary {
    pub created: usize,
    pub updated: usize,
    pub failed: usize,
    pub rows: Vec<RowOutcome>,
}

impl BulkSummary {
    fn from_rows(rows: Vec<RowOutcome>) -> Self {
        let n = |r: RowResult| rows.iter().filter(|o| o.result == r).count();
        BulkSummary {
            created: n(RowResult::Created),
            updated: n(RowResult::Updated),
            failed: n(RowResult::Failed),
            rows,
        }
    }
}

/// Takes the part named `file`, or the only part when there is no such name.
async fn upload(mut form: Multipart) -> ApiResult<Vec<u8>> {
    let mut fallback = None;
    while let Some(field) = form
        .next_field()
        .await
        .map_err(|e| ApiError::bad_request(format!("malformed upload: {e}")))?
    {
        let is_file = field.name() == Some("file");
        let bytes = field
            .bytes()
            .await
            .map_err(|e| ApiError::bad_request(format!("malformed upload: {e}")))?;
        if is_file {
            return Ok(bytes.to_vec());
        }
        fallback.get_or_insert(bytes.to_vec());
    }
    fallback.ok_or_else(|| ApiError::bad_request("upload contains no file"))
}

pub async fn insert(State(uuis): State<Shared>, Auth(actor): Auth, form: Multipart) -> ApiResult<Json<BulkSummary>> {
    let bytes = upload(form).await?;
    let rows = blocking(&uuis, move |u| u.bulk_insert(&actor, &parse_csv(&bytes)?)).await?;
    Ok(Json(BulkSummary::from_rows(rows)))
}

pub async fn update(State(uuis): State<Shared>, Auth(actor): Auth, form: Multipart) -> ApiResult<Json<BulkSummary>> {
    let bytes = upload(form).await?;
    let rows = blocking(&uuis, move |u| u.bulk_update(&actor, &parse_csv(&bytes)?)).await?;
    Ok(Json(BulkSummary::from_rows(rows)))
}
