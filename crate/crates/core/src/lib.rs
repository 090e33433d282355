//! Domain core of the university inventory service: storage, access control,
//! inventory, request workflow, search, bulk load, reports and the audit trail.

pub mod audit;
pub mod bulkload;
pub mod error;
pub mod inventory;
pub mod paging;
pub mod reports;
pub mod search;
pub mod security;
mod serde_util;
pub mod service;
pub mod storage;
pub mod text;
pub mod workflow;

use serde::Serialize;

pub use error::{Error, Result};
pub use service::{Actor, Uuis};

/// An id with its display name, used wherever a reference is shown to people.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct NamedRef {
    pub id: i64,
    pub name: String,
}

/// Optimistic lock check against the stored `version` column.
pub(crate) fn check_version(kind: &'static str, id: i64, expected: Option<i64>, actual: i64) -> Result<()> {
    match expected {
        Some(v) if v != actual => Err(Error::StaleVersion {
            kind,
            id,
            expected: v,
            actual,
        }),
        _ => Ok(()),
    }
}
