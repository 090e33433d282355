use thiserror::Error;

use crate::storage::StorageError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure a domain operation can report.
///
/// Variants map one-to-one onto the client-visible error classes
/// (authentication, authorization, validation, not-found, conflict);
/// only [`Error::Storage`] denotes an internal fault.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid credentials")]
    InvalidCredentials,

    #[error("authentication required")]
    Unauthenticated,

    #[error("not authorized: {0}")]
    Forbidden(String),

    #[error("{kind} {id} not found")]
    NotFound { kind: &'static str, id: String },

    #[error("{0}")]
    Validation(String),

    #[error("{0} already exists")]
    Duplicate(String),

    #[error("{kind} {id} was modified concurrently (expected version {expected}, found {actual})")]
    StaleVersion {
        kind: &'static str,
        id: i64,
        expected: i64,
        actual: i64,
    },

    #[error("cannot {action} a request in status {status}")]
    IllegalTransition {
        action: &'static str,
        status: &'static str,
    },

    #[error("cannot delete {kind} {id}: {reason}")]
    GuardedDelete {
        kind: &'static str,
        id: i64,
        reason: String,
    },

    #[error("{0}")]
    Cycle(String),

    #[error("asset id {0} does not fit in a 10-digit IUFAID")]
    Capacity(i64),

    #[error(transparent)]
    Storage(#[from] StorageError),
}

impl Error {
    pub fn not_found(kind: &'static str, id: impl ToString) -> Self {
        Error::NotFound {
            kind,
            id: id.to_string(),
        }
    }

    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn forbidden(msg: impl Into<String>) -> Self {
        Error::Forbidden(msg.into())
    }

    /// Stable machine-readable code for API clients.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidCredentials => "invalid_credentials",
            Error::Unauthenticated => "unauthenticated",
            Error::Forbidden(_) => "forbidden",
            Error::NotFound { .. } => "not_found",
            Error::Validation(_) => "validation",
            Error::Duplicate(_) => "duplicate",
            Error::StaleVersion { .. } => "stale_version",
            Error::IllegalTransition { .. } => "illegal_transition",
            Error::GuardedDelete { .. } => "guarded_delete",
            Error::Cycle(_) => "cycle",
            Error::Capacity(_) => "capacity",
            Error::Storage(_) => "internal",
        }
    }
}

impl From<rusqlite::Error> for Error {
    fn from(err: rusqlite::Error) -> Self {
        use rusqlite::ffi::{
            SQLITE_CONSTRAINT_CHECK, SQLITE_CONSTRAINT_FOREIGNKEY, SQLITE_CONSTRAINT_NOTNULL,
            SQLITE_CONSTRAINT_PRIMARYKEY, SQLITE_CONSTRAINT_UNIQUE,
        };
        // Constraint failures are caused by caller input, never by the store itself.
        if let rusqlite::Error::SqliteFailure(ref f, ref msg) = err {
            let detail = msg.clone().unwrap_or_default();
            match f.extended_code {
                SQLITE_CONSTRAINT_UNIQUE | SQLITE_CONSTRAINT_PRIMARYKEY => {
                    return Error::Duplicate(unique_subject(&detail));
                }
                SQLITE_CONSTRAINT_FOREIGNKEY => {
                    return Error::Validation("referenced record does not exist".into());
                }
                SQLITE_CONSTRAINT_NOTNULL | SQLITE_CONSTRAINT_CHECK => {
                    return Error::Validation(format!("constraint violated: {detail}"));
                }
                _ => {}
            }
        }
        Error::Storage(StorageError::Sqlite(err))
    }
}

// "UNIQUE constraint failed: user.username" -> "user.username"
fn unique_subject(detail: &str) -> String {
    detail
        .rsplit(": ")
        .next()
        .filter(|s| !s.is_empty())
        .unwrap_or("record")
        .to_string()
}
