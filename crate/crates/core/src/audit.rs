//! Property-level change trail.
//!
//! Every mutating operation calls [`record_change`] with the same
//! [`WriteTx`] it used for the mutation, so the trail and the data commit or
//! roll back together. Rows are only ever inserted.

use std::collections::BTreeSet;
use std::fmt;

use chrono::{DateTime, Utc};
use rusqlite::params;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::paging::{Page, PageRequest};
use crate::security::{AccessContext, PartTree, Permission};
use crate::service::{Actor, Uuis};
use crate::storage::{format_timestamp, timestamp_column, StorageError, WriteTx};
use crate::text::truncate_chars;

pub const AUDIT_PER_PAGE: u32 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum AuditEvent {
    Insert,
    Update,
    Delete,
}

impl AuditEvent {
    pub fn as_str(self) -> &'static str {
        match self {
            AuditEvent::Insert => "INSERT",
            AuditEvent::Update => "UPDATE",
            AuditEvent::Delete => "DELETE",
        }
    }
}

impl fmt::Display for AuditEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct AuditEntry {
    pub id: i64,
    pub version: Option<i64>,
    pub actor: Option<String>,
    pub event_name: Option<String>,
    pub class_name: Option<String>,
    pub persisted_object_id: Option<i64>,
    pub persisted_object_version: Option<i64>,
    pub property_name: Option<String>,
    pub old_value: Option<String>,
    pub new_value: Option<String>,
    pub uri: Option<String>,
    pub date_created: DateTime<Utc>,
    pub last_updated: DateTime<Utc>,
}

/// One property's before/after values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Change {
    pub property: String,
    pub old: Option<String>,
    pub new: Option<String>,
}

/// Accumulates changed properties; unchanged ones are dropped on the way in.
#[derive(Debug, Default, Clone)]
pub struct Diff {
    changes: Vec<Change>,
}

impl Diff {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn field(&mut self, property: impl Into<String>, old: Option<String>, new: Option<String>) -> &mut Self {
        if old != new {
            self.changes.push(Change {
                property: property.into(),
                old,
                new,
            });
        }
        self
    }

    pub fn text(&mut self, property: &str, old: &str, new: &str) -> &mut Self {
        self.field(property, Some(old.to_string()), Some(new.to_string()))
    }

    pub fn is_empty(&self) -> bool {
        self.changes.is_empty()
    }

    pub fn changes(&self) -> &[Change] {
        &self.changes
    }

    pub fn into_changes(self) -> Vec<Change> {
        self.changes
    }
}

/// What happened to which object, and who did it.
#[derive(Debug, Clone)]
pub struct ChangeSet<'a> {
    /// `None` for system-generated follow-up writes.
    pub actor: Option<&'a str>,
    pub uri: Option<&'a str>,
    pub event: AuditEvent,
    pub class_name: &'a str,
    pub object_id: i64,
    pub object_version: Option<i64>,
    pub changes: Vec<Change>,
}

impl<'a> ChangeSet<'a> {
    pub fn new(actor: &'a Actor, event: AuditEvent, class_name: &'a str, object_id: i64, object_version: i64) -> Self {
        ChangeSet {
            actor: Some(actor.username.as_str()),
            uri: actor.uri.as_deref(),
            event,
            class_name,
            object_id,
            object_version: Some(object_version),
            changes: Vec::new(),
        }
    }

    pub fn system(mut self) -> Self {
        self.actor = None;
        self
    }

    pub fn with_changes(mut self, changes: Vec<Change>) -> Self {
        self.changes = changes;
        self
    }
}

/// Appends audit rows for one change set.
///
/// INSERT and DELETE produce a single row without a property name. UPDATE
/// produces one row per property whose value actually changed, so a no-op
/// update writes nothing.
pub fn record_change(tx: &WriteTx<'_>, set: &ChangeSet<'_>) -> Result<Vec<AuditEntry>> {
    if tx.take_audit_fault() {
        return Err(StorageError::InjectedFault("audit write").into());
    }
    let now = tx.now();
    let stamp = format_timestamp(now);
    let rows: Vec<(Option<&str>, Option<String>, Option<String>)> = match set.event {
        AuditEvent::Insert | AuditEvent::Delete => vec![(None, None, None)],
        AuditEvent::Update => set
            .changes
            .iter()
            .filter(|c| c.old != c.new)
            .map(|c| {
                (
                    Some(c.property.as_str()),
                    c.old.as_deref().map(|v| truncate_chars(v, 255).to_string()),
                    c.new.as_deref().map(|v| truncate_chars(v, 255).to_string()),
                )
            })
            .collect(),
    };

    let mut stmt = tx.prepare_cached(
        "INSERT INTO audit_log (property_name, last_updated, old_value, actor, uri, new_value, \
         persisted_object_version, date_created, class_name, event_name, persisted_object_id, version) \
         VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?2, ?8, ?9, ?10, 0)",
    )?;
    let mut out = Vec::with_capacity(rows.len());
    for (property, old, new) in rows {
        stmt.execute(params![
            property,
            stamp,
            old,
            set.actor,
            set.uri.map(|u| truncate_chars(u, 255)),
            new,
            set.object_version,
            set.class_name,
            set.event.as_str(),
            set.object_id,
        ])?;
        out.push(AuditEntry {
            id: tx.last_insert_rowid(),
            version: Some(0),
            actor: set.actor.map(str::to_string),
            event_name: Some(set.event.as_str().to_string()),
            class_name: Some(set.class_name.to_string()),
            persisted_object_id: Some(set.object_id),
            persisted_object_version: set.object_version,
            property_name: property.map(str::to_string),
            old_value: old,
            new_value: new,
            uri: set.uri.map(|u| truncate_chars(u, 255).to_string()),
            date_created: now,
            last_updated: now,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SortOrder {
    Asc,
    #[default]
    Desc,
}

const ENTRY_COLUMNS: &str = "a.id, a.version, a.actor, a.event_name, a.class_name, a.persisted_object_id, \
     a.persisted_object_version, a.property_name, a.old_value, a.new_value, a.uri, a.date_created, a.last_updated";

fn entry_from_row(r: &rusqlite::Row<'_>) -> rusqlite::Result<AuditEntry> {
    Ok(AuditEntry {
        id: r.get(0)?,
        version: r.get(1)?,
        actor: r.get(2)?,
        event_name: r.get(3)?,
        class_name: r.get(4)?,
        persisted_object_id: r.get(5)?,
        persisted_object_version: r.get(6)?,
        property_name: r.get(7)?,
        old_value: r.get(8)?,
        new_value: r.get(9)?,
        uri: r.get(10)?,
        date_created: timestamp_column(r, 11)?,
        last_updated: timestamp_column(r, 12)?,
    })
}

/// Owning part of the audited object, where the object kind has one.
/// Assets and locations use `owner_id`, requests use `part_assigned_id`.
const OWNER_EXPR: &str = "CASE a.class_name \
     WHEN 'Asset' THEN (SELECT owner_id FROM asset WHERE id = a.persisted_object_id) \
     WHEN 'Location' THEN (SELECT owner_id FROM location WHERE id = a.persisted_object_id) \
     WHEN 'Request' THEN (SELECT part_assigned_id FROM request WHERE id = a.persisted_object_id) \
     END";

impl Uuis {
    /// Browses the trail, newest first by default (ties broken by id).
    ///
    /// Level-3 actors see every entry. Everyone else sees entries whose
    /// object's owning part lies in their scope; objects without an owner
    /// (users, roles, parts, types) are level-3 only.
    pub fn audit_list(&self, actor: &Actor, page: PageRequest, order: SortOrder) -> Result<Page<AuditEntry>> {
        self.store().read(|tx| {
            let tree = PartTree::load(tx)?;
            let ctx = AccessContext::load_with_tree(tx, &tree, actor.user_id)?;
            if !ctx.has(Permission::AuditView) {
                return Err(crate::Error::forbidden(format!(
                    "{} lacks permission {}",
                    ctx.username,
                    Permission::AuditView
                )));
            }
            let dir = match order {
                SortOrder::Asc => "ASC",
                SortOrder::Desc => "DESC",
            };
            let filter = if ctx.is_institution() {
                String::new()
            } else {
                format!("WHERE ({OWNER_EXPR}) IN {}", id_list(&ctx.scope))
            };
            let total: i64 =
                tx.query_row(&format!("SELECT COUNT(*) FROM audit_log a {filter}"), [], |r| r.get(0))?;
            let sql = format!(
                "SELECT {ENTRY_COLUMNS} FROM audit_log a {filter} \
                 ORDER BY a.last_updated {dir}, a.id {dir} LIMIT ?1 OFFSET ?2"
            );
            let mut stmt = tx.prepare(&sql)?;
            let rows = stmt
                .query_map(params![page.per_page, page.offset() as i64], entry_from_row)?
                .collect::<rusqlite::Result<Vec<_>>>()?;
            Ok(Page {
                rows,
                page: page.page,
                per_page: page.per_page,
                total: total as u64,
            })
        })
    }

    /// Full trail for one object in insertion order. Level 3 only.
    pub fn audit_history(&self, actor: &Actor, class_name: &str, object_id: i64) -> Result<Vec<AuditEntry>> {
        self.store().read(|tx| {
            let ctx = AccessContext::load(tx, actor.user_id)?;
            ctx.require_institution(Permission::AuditView)?;
            let mut stmt = tx.prepare(&format!(
                "SELECT {ENTRY_COLUMNS} FROM audit_log a \
                 WHERE a.class_name = ?1 AND a.persisted_object_id = ?2 ORDER BY a.id"
            ))?;
            let rows = stmt
                .query_map(params![class_name, object_id], entry_from_row)?
                .collect::<rusqlite::Result<Vec<_>>>()?;
            Ok(rows)
        })
    }
}

/// SQL `IN` list for integer ids; `(NULL)` matches nothing.
pub(crate) fn id_list(ids: &BTreeSet<i64>) -> String {
    if ids.is_empty() {
        return "(NULL)".to_string();
    }
    let joined: Vec<String> = ids.iter().map(|id| id.to_string()).collect();
    format!("({})", joined.join(","))
}
