//! Header-driven CSV insert and update of assets.
//!
//! The header is validated up front and a bad header rejects the whole
//! file. Rows then run one transaction each, so a failing row leaves no
//! trace while its neighbours go through.

use std::collections::{BTreeMap, BTreeSet};

use rusqlite::{params, Connection};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::inventory::{create_asset_in, edit_asset_in, AssetChanges, AssetStatus, NewAsset};
use crate::security::{AccessContext, Permission};
use crate::service::{Actor, Uuis};

pub const PROP_PREFIX: &str = "prop:";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BulkFile {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

/// Parses UTF-8 CSV whose first record is the header. Blank lines are skipped.
pub fn parse_csv(bytes: &[u8]) -> Result<BulkFile> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::validation(format!("file is not UTF-8: {e}")))?;
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut records = reader.records();
    let header: Vec<String> = match records.next() {
        Some(rec) => rec
            .map_err(|e| Error::validation(format!("malformed CSV header: {e}")))?
            .iter()
            .map(|c| c.trim().to_string())
            .collect(),
        None => return Err(Error::validation("file is empty")),
    };
    if header.iter().all(String::is_empty) {
        return Err(Error::validation("header line is empty"));
    }
    let mut rows = Vec::new();
    for (idx, rec) in records.enumerate() {
        let row = idx + 1;
        let rec = rec.map_err(|e| Error::validation(format!("malformed CSV at row {row}: {e}")))?;
        if rec.len() != header.len() {
            return Err(Error::validation(format!(
                "row {row} has {} cells but the header has {}",
                rec.len(),
                header.len()
            )));
        }
        rows.push(rec.iter().map(str::to_string).collect());
    }
    Ok(BulkFile { header, rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RowResult {
    Created,
    Updated,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RowOutcome {
    /// 1-based, not counting the header.
    pub row_index: usize,
    pub result: RowResult,
    pub asset_id: Option<i64>,
    pub message: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Column {
    Iufaid,
    Legacyid,
    Type,
    Name,
    Details,
    SerialNumber,
    Location,
    Owner,
    Status,
    Assignee,
    Parent,
    Prop(String),
}

impl Column {
    fn parse(raw: &str) -> Option<Column> {
        let lower = raw.trim().to_lowercase();
        if let Some(name) = lower.strip_prefix(PROP_PREFIX) {
            let original = &raw.trim()[PROP_PREFIX.len()..];
            return (!name.trim().is_empty()).then(|| Column::Prop(original.trim().to_string()));
        }
        Some(match lower.as_str() {
            "iufaid" => Column::Iufaid,
            "legacyid" => Column::Legacyid,
            "type" => Column::Type,
            "name" => Column::Name,
            "details" => Column::Details,
            "serial_number" => Column::SerialNumber,
            "location" => Column::Location,
            "owner" => Column::Owner,
            "status" => Column::Status,
            "assignee" => Column::Assignee,
            "parent" => Column::Parent,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mode {
    Insert,
    Update,
}

fn plan_columns(conn: &Connection, header: &[String], mode: Mode) -> Result<Vec<Column>> {
    let mut columns = Vec::with_capacity(header.len());
    let mut seen = BTreeSet::new();
    let known_props: BTreeSet<String> = {
        let mut stmt = conn.prepare("SELECT name FROM asset_type_property")?;
        let names = stmt
            .query_map([], |r| r.get::<_, String>(0))?
            .collect::<rusqlite::Result<Vec<_>>>()?;
        names.into_iter().map(|n| n.to_lowercase()).collect()
    };
    for raw in header {
        let col = Column::parse(raw).ok_or_else(|| Error::validation(format!("unknown column {raw:?}")))?;
        if col == Column::Iufaid && mode == Mode::Insert {
            return Err(Error::validation("iufaid is generated and cannot be supplied on insert"));
        }
        if let Column::Prop(name) = &col {
            if !known_props.contains(&name.to_lowercase()) {
                return Err(Error::validation(format!("column {raw:?} names no asset type property")));
            }
        }
        if !seen.insert(raw.trim().to_lowercase()) {
            return Err(Error::validation(format!("column {raw:?} appears twice")));
        }
        columns.push(col);
    }
    match mode {
        Mode::Insert => {
            for (required, col) in [
                ("name", Column::Name),
                ("type", Column::Type),
                ("location", Column::Location),
                ("owner", Column::Owner),
            ] {
                if !columns.contains(&col) {
                    return Err(Error::validation(format!("required column {required:?} is missing")));
                }
            }
        }
        Mode::Update => match (columns.contains(&Column::Iufaid), columns.contains(&Column::Legacyid)) {
            (true, true) => {
                return Err(Error::validation(
                    "file is keyed by both iufaid and legacyid; keep exactly one key column",
                ))
            }
            (false, false) => return Err(Error::validation("a key column (iufaid or legacyid) is required")),
            _ => {}
        },
    }
    Ok(columns)
}

/// Looks up a row id by exact name; zero or several matches fail the row.
fn by_name(conn: &Connection, sql: &str, what: &str, value: &str) -> Result<i64> {
    let mut stmt = conn.prepare_cached(sql)?;
    let ids = stmt
        .query_map(params![value], |r| r.get::<_, i64>(0))?
        .collect::<rusqlite::Result<Vec<_>>>()?;
    match ids.as_slice() {
        [id] => Ok(*id),
        [] => Err(Error::validation(format!("unknown {what} {value:?}"))),
        _ => Err(Error::validation(format!("{what} {value:?} is ambiguous"))),
    }
}

fn type_id(conn: &Connection, v: &str) -> Result<i64> {
    by_name(conn, "SELECT id FROM asset_type WHERE name = ?1", "asset type", v)
}
fn location_id(conn: &Connection, v: &str) -> Result<i64> {
    by_name(conn, "SELECT id FROM location WHERE name = ?1", "location", v)
}
fn owner_id(conn: &Connection, v: &str) -> Result<i64> {
    by_name(conn, "SELECT id FROM university_part WHERE name = ?1", "university part", v)
}
fn user_id(conn: &Connection, v: &str) -> Result<i64> {
    by_name(conn, "SELECT id FROM \"user\" WHERE username = ?1", "user", v)
}
fn asset_by_iufaid(conn: &Connection, v: &str) -> Result<i64> {
    by_name(conn, "SELECT id FROM asset WHERE iufaid = ?1", "asset", v)
}
fn asset_by_legacyid(conn: &Connection, v: &str) -> Result<i64> {
    by_name(conn, "SELECT id FROM asset WHERE legacyid = ?1", "asset", v)
}

fn row_new_asset(conn: &Connection, columns: &[Column], cells: &[String]) -> Result<NewAsset> {
    let mut new = NewAsset::default();
    for (col, cell) in columns.iter().zip(cells) {
        let v = cell.trim();
        match col {
            Column::Name => new.name = v.to_string(),
            Column::Type => new.type_id = type_id(conn, v)?,
            Column::Location => new.location_id = location_id(conn, v)?,
            Column::Owner => new.owner_id = owner_id(conn, v)?,
            _ if v.is_empty() => {}
            Column::Legacyid => new.legacyid = Some(v.to_string()),
            Column::Details => new.details = Some(v.to_string()),
            Column::SerialNumber => new.serial_number = Some(v.to_string()),
            Column::Status => new.status = Some(v.parse::<AssetStatus>()?),
            Column::Assignee => new.assignee_id = Some(user_id(conn, v)?),
            Column::Parent => new.parent_id = Some(asset_by_iufaid(conn, v)?),
            Column::Prop(name) => {
                new.properties.insert(name.clone(), v.to_string());
            }
            Column::Iufaid => {}
        }
    }
    Ok(new)
}

fn row_changes(conn: &Connection, columns: &[Column], cells: &[String]) -> Result<(i64, AssetChanges)> {
    let mut key = None;
    let mut changes = AssetChanges::default();
    let mut props = BTreeMap::new();
    for (col, cell) in columns.iter().zip(cells) {
        let v = cell.trim();
        match col {
            Column::Iufaid => key = Some(asset_by_iufaid(conn, v)?),
            Column::Legacyid => key = Some(asset_by_legacyid(conn, v)?),
            _ if v.is_empty() => {}
            Column::Name => changes.name = Some(v.to_string()),
            Column::Type => changes.type_id = Some(type_id(conn, v)?),
            Column::Location => changes.location_id = Some(location_id(conn, v)?),
            Column::Owner => changes.owner_id = Some(owner_id(conn, v)?),
            Column::Details => changes.details = Some(v.to_string()),
            Column::SerialNumber => changes.serial_number = Some(v.to_string()),
            Column::Status => changes.status = Some(v.parse::<AssetStatus>()?),
            Column::Assignee => changes.assignee_id = Some(Some(user_id(conn, v)?)),
            Column::Parent => changes.parent_id = Some(Some(asset_by_iufaid(conn, v)?)),
            Column::Prop(name) => {
                props.insert(name.clone(), v.to_string());
            }
        }
    }
    changes.properties = props;
    let key = key.ok_or_else(|| Error::validation("key cell is empty"))?;
    Ok((key, changes))
}

fn failed(row_index: usize, err: &Error) -> RowOutcome {
    RowOutcome {
        row_index,
        result: RowResult::Failed,
        asset_id: None,
        message: Some(err.to_string()),
    }
}

impl Uuis {
    /// Creates one asset per row. Each row behaves exactly like `asset_create`.
    pub fn bulk_insert(&self, actor: &Actor, file: &BulkFile) -> Result<Vec<RowOutcome>> {
        let columns = self.bulk_prepare(actor, file, Mode::Insert)?;
        let mut out = Vec::with_capacity(file.rows.len());
        for (idx, cells) in file.rows.iter().enumerate() {
            let res = self.store().write(|tx| {
                let ctx = AccessContext::load(tx, actor.user_id)?;
                let new = row_new_asset(tx, &columns, cells)?;
                create_asset_in(tx, &ctx, actor, &new)
            });
            out.push(match res {
                Ok(asset) => RowOutcome {
                    row_index: idx + 1,
                    result: RowResult::Created,
                    asset_id: Some(asset.id),
                    message: asset.iufaid,
                },
                Err(e) => failed(idx + 1, &e),
            });
        }
        Ok(out)
    }

    /// Edits the asset named by each row's key; blank cells leave fields unchanged.
    pub fn bulk_update(&self, actor: &Actor, file: &BulkFile) -> Result<Vec<RowOutcome>> {
        let columns = self.bulk_prepare(actor, file, Mode::Update)?;
        let mut out = Vec::with_capacity(file.rows.len());
        for (idx, cells) in file.rows.iter().enumerate() {
            let res = self.store().write(|tx| {
                let ctx = AccessContext::load(tx, actor.user_id)?;
                let (id, changes) = row_changes(tx, &columns, cells)?;
                edit_asset_in(tx, &ctx, actor, id, &changes)
            });
            out.push(match res {
                Ok((asset, changed)) => RowOutcome {
                    row_index: idx + 1,
                    result: RowResult::Updated,
                    asset_id: Some(asset.id),
                    message: (!changed).then(|| "no changes".to_string()),
                },
                Err(e) => failed(idx + 1, &e),
            });
        }
        Ok(out)
    }

    fn bulk_prepare(&self, actor: &Actor, file: &BulkFile, mode: Mode) -> Result<Vec<Column>> {
        self.store().read(|tx| {
            let ctx = AccessContext::load(tx, actor.user_id)?;
            let perm = match mode {
                Mode::Insert => Permission::AssetCreate,
                Mode::Update => Permission::AssetEdit,
            };
            if !ctx.has(perm) {
                return Err(Error::forbidden(format!("{} lacks permission {perm}", ctx.username)));
            }
            plan_columns(tx, &file.header, mode)
        })
    }
}
