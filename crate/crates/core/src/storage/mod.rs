//! Embedded relational store.
//!
//! The schema lives in `sql/schema.sql` and is applied idempotently on open.
//! All domain writes go through [`Store::write`], which runs the closure in a
//! single `BEGIN IMMEDIATE` transaction on the one writer connection; the
//! closure's error rolls everything back, audit rows included. Reads go
//! through [`Store::read`] and see one consistent snapshot for their whole
//! duration. File-backed stores run in WAL mode with a small pool of reader
//! connections so reads do not queue behind writers.

mod seed;

use std::ops::Deref;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Duration;

use chrono::{DateTime, NaiveDateTime, Utc};
use parking_lot::Mutex;
use rusqlite::{Connection, OpenFlags, Transaction, TransactionBehavior};
use thiserror::Error;

pub use seed::{seed_fixture, SEED_PASSWORD};

/// DDL for the full schema, shipped as `crates/core/sql/schema.sql`.
pub const SCHEMA_SQL: &str = include_str!("../../sql/schema.sql");

/// The twenty tables of the data dictionary.
pub const TABLES: [&str; 20] = [
    "asset",
    "asset_property",
    "asset_type",
    "asset_type_asset_type_properties",
    "asset_type_property",
    "audit_log",
    "location",
    "location_property",
    "location_type",
    "location_type_location_type_properties",
    "location_type_property",
    "request",
    "role",
    "role_permissions",
    "university_part",
    "user",
    "user_managed_parts",
    "user_permissions",
    "user_roles",
    "user_staff_membership_parts",
];

const MAX_IDLE_READERS: usize = 8;
const TIMESTAMP_FORMAT: &str = "%Y-%m-%d %H:%M:%S%.6f";

#[derive(Debug, Error)]
pub enum StorageError {
    #[error("cannot open store at {path}: {source}")]
    Open {
        path: PathBuf,
        #[source]
        source: rusqlite::Error,
    },

    #[error("store at {path} is not a readable UUIS database ({detail}); restore it from backup or point --store at a new file")]
    Corrupt { path: PathBuf, detail: String },

    #[error("store already contains data; seeding requires an empty store")]
    NotEmpty,

    #[error("malformed timestamp in store: {0:?}")]
    BadTimestamp(String),

    #[error("injected fault: {0}")]
    InjectedFault(&'static str),

    #[error(transparent)]
    Sqlite(#[from] rusqlite::Error),
}

pub struct Store {
    writer: Mutex<Connection>,
    path: Option<PathBuf>,
    readers: Mutex<Vec<Connection>>,
    audit_fault: AtomicBool,
}

impl std::fmt::Debug for Store {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Store").field("path", &self.path).finish()
    }
}

impl Store {
    /// Opens (creating if absent) a file-backed store and applies the schema.
    pub fn open(path: impl AsRef<Path>) -> Result<Store, StorageError> {
        let path = path.as_ref().to_path_buf();
        let mut conn = Connection::open(&path).map_err(|source| StorageError::Open {
            path: path.clone(),
            source,
        })?;
        configure(&conn, true).map_err(|e| classify_open_error(&path, e))?;
        check_integrity(&conn).map_err(|e| classify_open_error(&path, e))?;
        migrate(&mut conn).map_err(|e| classify_open_error(&path, e))?;
        Ok(Store {
            writer: Mutex::new(conn),
            path: Some(path),
            readers: Mutex::new(Vec::new()),
            audit_fault: AtomicBool::new(false),
        })
    }

    /// A private in-memory store; reads share the writer connection.
    pub fn open_in_memory() -> Result<Store, StorageError> {
        let mut conn = Connection::open_in_memory()?;
        configure(&conn, false)?;
        migrate(&mut conn)?;
        Ok(Store {
            writer: Mutex::new(conn),
            path: None,
            readers: Mutex::new(Vec::new()),
            audit_fault: AtomicBool::new(false),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    /// Runs `f` inside one write transaction. Any error rolls back every
    /// statement issued through the transaction.
    pub fn write<T, E>(&self, f: impl FnOnce(&WriteTx<'_>) -> Result<T, E>) -> Result<T, E>
    where
        E: From<StorageError>,
    {
        let mut conn = self.writer.lock();
        let tx = conn
            .transaction_with_behavior(TransactionBehavior::Immediate)
            .map_err(StorageError::from)?;
        let wtx = WriteTx {
            tx,
            now: Utc::now(),
            audit_fault: &self.audit_fault,
        };
        let out = f(&wtx)?;
        wtx.tx.commit().map_err(StorageError::from)?;
        Ok(out)
    }

    /// Runs `f` against one consistent read snapshot.
    pub fn read<T, E>(&self, f: impl FnOnce(&ReadTx<'_>) -> Result<T, E>) -> Result<T, E>
    where
        E: From<StorageError>,
    {
        let Some(path) = &self.path else {
            let mut conn = self.writer.lock();
            let tx = conn
                .transaction_with_behavior(TransactionBehavior::Deferred)
                .map_err(StorageError::from)?;
            return f(&ReadTx { tx });
        };

        let mut conn = match self.readers.lock().pop() {
            Some(conn) => conn,
            None => open_reader(path)?,
        };
        let out = {
            let tx = conn
                .transaction_with_behavior(TransactionBehavior::Deferred)
                .map_err(StorageError::from)?;
            f(&ReadTx { tx })
        };
        let mut idle = self.readers.lock();
        if idle.len() < MAX_IDLE_READERS {
            idle.push(conn);
        }
        out
    }

    /// Names of the user tables currently present.
    pub fn table_names(&self) -> Result<Vec<String>, StorageError> {
        self.read(|tx| {
            let mut stmt = tx.prepare(
                "SELECT name FROM sqlite_master WHERE type = 'table' \
                 AND name NOT LIKE 'sqlite_%' ORDER BY name",
            )?;
            let names = stmt
                .query_map([], |r| r.get::<_, String>(0))?
                .collect::<Result<Vec<_>, _>>()?;
            Ok(names)
        })
    }

    /// True when no domain rows exist (audit rows excluded).
    pub fn is_empty(&self) -> Result<bool, StorageError> {
        self.read(|tx| {
            for table in TABLES.iter().filter(|t| **t != "audit_log") {
                let n: i64 =
                    tx.query_row(&format!("SELECT COUNT(*) FROM \"{table}\""), [], |r| r.get(0))?;
                if n > 0 {
                    return Ok(false);
                }
            }
            Ok(true)
        })
    }

    /// Makes the next audit write fail, for atomicity testing.
    #[doc(hidden)]
    pub fn inject_audit_fault(&self) {
        self.audit_fault.store(true, Ordering::SeqCst);
    }
}

/// Read-only snapshot. Derefs to the underlying connection for queries.
pub struct ReadTx<'c> {
    tx: Transaction<'c>,
}

impl Deref for ReadTx<'_> {
    type Target = Connection;

    fn deref(&self) -> &Connection {
        &self.tx
    }
}

/// An open write transaction. Audit records can only be written through one.
pub struct WriteTx<'c> {
    tx: Transaction<'c>,
    now: DateTime<Utc>,
    audit_fault: &'c AtomicBool,
}

impl WriteTx<'_> {
    /// Timestamp shared by every row this transaction writes.
    pub fn now(&self) -> DateTime<Utc> {
        self.now
    }

    pub(crate) fn take_audit_fault(&self) -> bool {
        self.audit_fault.swap(false, Ordering::SeqCst)
    }
}

impl Deref for WriteTx<'_> {
    type Target = Connection;

    fn deref(&self) -> &Connection {
        &self.tx
    }
}

pub fn format_timestamp(ts: DateTime<Utc>) -> String {
    ts.format(TIMESTAMP_FORMAT).to_string()
}

pub fn parse_timestamp(raw: &str) -> Result<DateTime<Utc>, StorageError> {
    NaiveDateTime::parse_from_str(raw, TIMESTAMP_FORMAT)
        .or_else(|_| NaiveDateTime::parse_from_str(raw, "%Y-%m-%d %H:%M:%S"))
        .map(|naive| naive.and_utc())
        .map_err(|_| StorageError::BadTimestamp(raw.to_string()))
}

/// Column reader for timestamps stored by [`format_timestamp`].
pub(crate) fn timestamp_column(row: &rusqlite::Row<'_>, idx: usize) -> rusqlite::Result<DateTime<Utc>> {
    let raw: String = row.get(idx)?;
    parse_timestamp(&raw).map_err(|e| {
        rusqlite::Error::FromSqlConversionFailure(idx, rusqlite::types::Type::Text, Box::new(e))
    })
}

fn configure(conn: &Connection, file_backed: bool) -> rusqlite::Result<()> {
    conn.busy_timeout(Duration::from_secs(5))?;
    conn.pragma_update(None, "foreign_keys", "ON")?;
    if file_backed {
        conn.pragma_update(None, "journal_mode", "WAL")?;
        conn.pragma_update(None, "synchronous", "NORMAL")?;
    }
    Ok(())
}

fn check_integrity(conn: &Connection) -> rusqlite::Result<()> {
    let verdict: String = conn.query_row("PRAGMA quick_check", [], |r| r.get(0))?;
    if verdict == "ok" {
        Ok(())
    } else {
        Err(rusqlite::Error::SqliteFailure(
            rusqlite::ffi::Error::new(rusqlite::ffi::SQLITE_CORRUPT),
            Some(verdict),
        ))
    }
}

fn migrate(conn: &mut Connection) -> rusqlite::Result<()> {
    let tx = conn.transaction()?;
    tx.execute_batch(SCHEMA_SQL)?;
    tx.commit()
}

fn open_reader(path: &Path) -> Result<Connection, StorageError> {
    let conn = Connection::open_with_flags(
        path,
        OpenFlags::SQLITE_OPEN_READ_WRITE | OpenFlags::SQLITE_OPEN_NO_MUTEX,
    )?;
    conn.busy_timeout(Duration::from_secs(5))?;
    conn.pragma_update(None, "foreign_keys", "ON")?;
    conn.pragma_update(None, "query_only", "ON")?;
    Ok(conn)
}

fn classify_open_error(path: &Path, err: rusqlite::Error) -> StorageError {
    use rusqlite::ErrorCode;
    match err.sqlite_error_code() {
        Some(ErrorCode::NotADatabase) | Some(ErrorCode::DatabaseCorrupt) => StorageError::Corrupt {
            path: path.to_path_buf(),
            detail: err.to_string(),
        },
        _ => StorageError::Open {
            path: path.to_path_buf(),
            source: err,
        },
    }
}
