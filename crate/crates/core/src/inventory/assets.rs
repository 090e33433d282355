use std::collections::{BTreeMap, BTreeSet};

use rusqlite::{params, params_from_iter, Connection, OptionalExtension};
use serde::{Deserialize, Serialize};

use super::types::{asset_type_properties, TypeProperty};
use super::{generate_iufaid, location_name, opt_name, part_name, user_ref, AssetStatus, PropertyValue};
use crate::audit::{id_list, record_change, AuditEvent, ChangeSet, Diff};
use crate::check_version;
use crate::error::{Error, Result};
use crate::paging::{Page, PageRequest};
use crate::security::{AccessContext, Permission};
use crate::service::{Actor, Uuis};
use crate::storage::WriteTx;
use crate::text;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Asset {
    pub id: i64,
    pub version: i64,
    pub iufaid: Option<String>,
    pub legacyid: Option<String>,
    pub status: AssetStatus,
    pub name: String,
    pub details: Option<String>,
    pub serial_number: Option<String>,
    pub type_id: i64,
    pub type_name: String,
    pub location_id: i64,
    pub location_name: String,
    pub owner_id: i64,
    pub owner_name: String,
    pub assignee_id: Option<i64>,
    pub assignee: Option<String>,
    pub parent_id: Option<i64>,
    pub parent_iufaid: Option<String>,
    pub properties: Vec<PropertyValue>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct NewAsset {
    pub type_id: i64,
    pub name: String,
    pub location_id: i64,
    pub owner_id: i64,
    #[serde(default)]
    pub legacyid: Option<String>,
    #[serde(default)]
    pub details: Option<String>,
    #[serde(default)]
    pub serial_number: Option<String>,
    #[serde(default)]
    pub status: Option<AssetStatus>,
    #[serde(default)]
    pub assignee_id: Option<i64>,
    #[serde(default)]
    pub parent_id: Option<i64>,
    /// Values keyed by property name of the asset's type.
    #[serde(default)]
    pub properties: BTreeMap<String, String>,
}

/// Partial update. Absent fields stay unchanged; an empty string clears an
/// optional text field; `null` clears an optional reference.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct AssetChanges {
    pub version: Option<i64>,
    pub name: Option<String>,
    pub details: Option<String>,
    pub serial_number: Option<String>,
    pub legacyid: Option<String>,
    pub status: Option<AssetStatus>,
    pub type_id: Option<i64>,
    pub location_id: Option<i64>,
    pub owner_id: Option<i64>,
    #[serde(deserialize_with = "crate::serde_util::double_option")]
    pub assignee_id: Option<Option<i64>>,
    #[serde(deserialize_with = "crate::serde_util::double_option")]
    pub parent_id: Option<Option<i64>>,
    /// Values keyed by property name; an empty value removes the property.
    pub properties: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct AssetFilter {
    pub location_id: Option<i64>,
    pub owner_id: Option<i64>,
    pub type_id: Option<i64>,
}

const ASSET_SELECT: &str = "SELECT a.id, a.version, a.iufaid, a.legacyid, a.status, a.name, a.details, a.serial_number, \
     a.type_id, t.name, a.location_id, l.name, a.owner_id, o.name, a.assignee_id, u.username, a.parent_id, p.iufaid \
     FROM asset a JOIN asset_type t ON t.id = a.type_id JOIN location l ON l.id = a.location_id \
     JOIN university_part o ON o.id = a.owner_id LEFT JOIN \"user\" u ON u.id = a.assignee_id \
     LEFT JOIN asset p ON p.id = a.parent_id";

fn asset_from_row(r: &rusqlite::Row<'_>) -> rusqlite::Result<Asset> {
    let status: String = r.get(4)?;
    Ok(Asset {
        id: r.get(0)?,
        version: r.get(1)?,
        iufaid: r.get(2)?,
        legacyid: r.get(3)?,
        status: status.parse().unwrap_or_default(),
        name: r.get(5)?,
        details: r.get(6)?,
        serial_number: r.get(7)?,
        type_id: r.get(8)?,
        type_name: r.get(9)?,
        location_id: r.get(10)?,
        location_name: r.get(11)?,
        owner_id: r.get(12)?,
        owner_name: r.get(13)?,
        assignee_id: r.get(14)?,
        assignee: r.get(15)?,
        parent_id: r.get(16)?,
        parent_iufaid: r.get(17)?,
        properties: Vec::new(),
    })
}

fn asset_properties(conn: &Connection, asset_id: i64) -> Result<Vec<PropertyValue>> {
    let mut stmt = conn.prepare_cached(
        "SELECT ap.asset_type_property_id, p.name, ap.value FROM asset_property ap \
         JOIN asset_type_property p ON p.id = ap.asset_type_property_id \
         WHERE ap.asset_id = ?1 ORDER BY ap.asset_type_property_id",
    )?;
    let rows = stmt
        .query_map(params![asset_id], |r| {
            Ok(PropertyValue {
                property_id: r.get(0)?,
                name: r.get(1)?,
                value: r.get(2)?,
            })
        })?
        .collect::<rusqlite::Result<_>>()?;
    Ok(rows)
}

pub(crate) fn load_asset(conn: &Connection, id: i64) -> Result<Asset> {
    let mut asset = conn
        .query_row(&format!("{ASSET_SELECT} WHERE a.id = ?1"), params![id], asset_from_row)
        .optional()?
        .ok_or_else(|| Error::not_found("asset", id))?;
    asset.properties = asset_properties(conn, id)?;
    Ok(asset)
}

fn require_exists(conn: &Connection, table: &str, kind: &str, id: i64) -> Result<()> {
    let found: Option<i64> = conn
        .query_row(&format!("SELECT id FROM \"{table}\" WHERE id = ?1"), params![id], |r| r.get(0))
        .optional()?;
    match found {
        Some(_) => Ok(()),
        None => Err(Error::validation(format!("{kind} {id} does not exist"))),
    }
}

fn require_unique_legacyid(conn: &Connection, legacyid: &str, except: Option<i64>) -> Result<()> {
    let holder: Option<i64> = conn
        .query_row("SELECT id FROM asset WHERE legacyid = ?1", params![legacyid], |r| r.get(0))
        .optional()?;
    match holder {
        Some(other) if Some(other) != except => Err(Error::Duplicate(format!("legacyid {legacyid:?}"))),
        _ => Ok(()),
    }
}

/// Rejects a parent link that would make `asset_id` its own ancestor.
fn check_parent(conn: &Connection, asset_id: Option<i64>, parent: i64) -> Result<()> {
    require_exists(conn, "asset", "parent asset", parent)?;
    let mut seen = BTreeSet::new();
    let mut cursor = Some(parent);
    while let Some(node) = cursor {
        if Some(node) == asset_id || !seen.insert(node) {
            return Err(Error::Cycle(format!("asset {parent} cannot become a parent of its own ancestor")));
        }
        cursor = conn
            .query_row("SELECT parent_id FROM asset WHERE id = ?1", params![node], |r| r.get(0))
            .optional()?
            .flatten();
    }
    Ok(())
}

fn resolve_property<'a>(props: &'a [TypeProperty], name: &str, type_name: &str) -> Result<&'a TypeProperty> {
    props
        .iter()
        .find(|p| p.name.eq_ignore_ascii_case(name.trim()))
        .ok_or_else(|| Error::validation(format!("property {name:?} does not belong to asset type {type_name:?}")))
}

fn type_name(conn: &Connection, id: i64) -> Result<String> {
    conn.query_row("SELECT name FROM asset_type WHERE id = ?1", params![id], |r| r.get(0))
        .optional()?
        .ok_or_else(|| Error::validation(format!("asset type {id} does not exist")))
}

fn parent_iufaid(conn: &Connection, id: i64) -> Result<String> {
    let code: Option<String> = conn
        .query_row("SELECT iufaid FROM asset WHERE id = ?1", params![id], |r| r.get(0))
        .optional()?
        .ok_or_else(|| Error::validation(format!("asset {id} does not exist")))?;
    Ok(code.unwrap_or_else(|| id.to_string()))
}

/// Creates an asset inside the caller's transaction: INSERT audit row by the
/// actor, then the system-assigned IUFAID as a separate UPDATE.
pub(crate) fn create_asset_in(tx: &WriteTx<'_>, ctx: &AccessContext, actor: &Actor, new: &NewAsset) -> Result<Asset> {
    let name = text::required("name", &new.name)?;
    let legacyid = text::optional("legacyid", new.legacyid.as_deref())?;
    let details = text::optional("details", new.details.as_deref())?;
    let serial = text::optional("serial number", new.serial_number.as_deref())?;
    let type_name = type_name(tx, new.type_id)?;
    require_exists(tx, "location", "location", new.location_id)?;
    require_exists(tx, "university_part", "university part", new.owner_id)?;
    ctx.require(Permission::AssetCreate, new.owner_id)?;
    if let Some(a) = new.assignee_id {
        require_exists(tx, "user", "user", a)?;
    }
    if let Some(p) = new.parent_id {
        check_parent(tx, None, p)?;
    }
    if let Some(l) = &legacyid {
        require_unique_legacyid(tx, l, None)?;
    }
    let props = asset_type_properties(tx, new.type_id)?;
    let mut values = BTreeMap::new();
    for (pname, value) in &new.properties {
        let prop = resolve_property(&props, pname, &type_name)?;
        let value = value.trim();
        if !value.is_empty() {
            values.insert(prop.id, text::bounded(&prop.name, value)?);
        }
    }
    let status = new.status.unwrap_or_default();

    tx.execute(
        "INSERT INTO asset (version, status, legacyid, location_id, assignee_id, parent_id, serial_number, type_id, \
         details, name, owner_id) VALUES (0, ?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8, ?9, ?10)",
        params![
            status.as_str(),
            legacyid,
            new.location_id,
            new.assignee_id,
            new.parent_id,
            serial,
            new.type_id,
            details,
            name,
            new.owner_id
        ],
    )?;
    let id = tx.last_insert_rowid();
    for (pid, value) in &values {
        tx.execute(
            "INSERT INTO asset_property (version, asset_id, value, asset_type_property_id) VALUES (0, ?1, ?2, ?3)",
            params![id, value, pid],
        )?;
    }
    record_change(tx, &ChangeSet::new(actor, AuditEvent::Insert, "Asset", id, 0))?;

    let iufaid = generate_iufaid(id)?;
    tx.execute("UPDATE asset SET iufaid = ?2, version = 1 WHERE id = ?1", params![id, iufaid])?;
    let mut diff = Diff::new();
    diff.field("iufaID", None, Some(iufaid));
    record_change(
        tx,
        &ChangeSet::new(actor, AuditEvent::Update, "Asset", id, 1)
            .system()
            .with_changes(diff.into_changes()),
    )?;
    load_asset(tx, id)
}

/// Applies `changes` inside the caller's transaction. Returns the asset and
/// whether anything actually changed.
pub(crate) fn edit_asset_in(
    tx: &WriteTx<'_>,
    ctx: &AccessContext,
    actor: &Actor,
    id: i64,
    changes: &AssetChanges,
) -> Result<(Asset, bool)> {
    let old = load_asset(tx, id)?;
    check_version("asset", id, changes.version, old.version)?;
    ctx.require(Permission::AssetEdit, old.owner_id)?;

    let name = match &changes.name {
        Some(n) => text::required("name", n)?,
        None => old.name.clone(),
    };
    let pick = |field: &str, change: &Option<String>, current: &Option<String>| -> Result<Option<String>> {
        match change {
            Some(v) => text::optional(field, Some(v)),
            None => Ok(current.clone()),
        }
    };
    let details = pick("details", &changes.details, &old.details)?;
    let serial = pick("serial number", &changes.serial_number, &old.serial_number)?;
    let legacyid = pick("legacyid", &changes.legacyid, &old.legacyid)?;
    if let Some(l) = &legacyid {
        if Some(l) != old.legacyid.as_ref() {
            require_unique_legacyid(tx, l, Some(id))?;
        }
    }
    let status = changes.status.unwrap_or(old.status);
    let type_id = changes.type_id.unwrap_or(old.type_id);
    let new_type_name = type_name(tx, type_id)?;
    let location_id = changes.location_id.unwrap_or(old.location_id);
    let new_location = location_name(tx, location_id)?;
    let owner_id = changes.owner_id.unwrap_or(old.owner_id);
    let new_owner = part_name(tx, owner_id)?;
    if owner_id != old.owner_id {
        ctx.require(Permission::AssetEdit, owner_id)?;
    }
    let assignee_id = changes.assignee_id.unwrap_or(old.assignee_id);
    let new_assignee = opt_name(tx, assignee_id, user_ref)?;
    let parent_id = changes.parent_id.unwrap_or(old.parent_id);
    if let Some(p) = parent_id {
        if parent_id != old.parent_id {
            check_parent(tx, Some(id), p)?;
        }
    }
    let new_parent = opt_name(tx, parent_id, parent_iufaid)?;

    // Property values keyed by property id, validated against the final type.
    let props = asset_type_properties(tx, type_id)?;
    let mut values: BTreeMap<i64, (String, String)> = old
        .properties
        .iter()
        .map(|p| (p.property_id, (p.name.clone(), p.value.clone())))
        .collect();
    for (pname, value) in &changes.properties {
        let value = value.trim();
        match props.iter().find(|p| p.name.eq_ignore_ascii_case(pname.trim())) {
            Some(prop) if value.is_empty() => {
                values.remove(&prop.id);
            }
            Some(prop) => {
                values.insert(prop.id, (prop.name.clone(), text::bounded(&prop.name, value)?));
            }
            None if value.is_empty() => {
                values.retain(|_, (n, _)| !n.eq_ignore_ascii_case(pname.trim()));
            }
            None => {
                return Err(Error::validation(format!(
                    "property {pname:?} does not belong to asset type {new_type_name:?}"
                )))
            }
        }
    }
    if let Some((_, (pname, _))) = values.iter().find(|(pid, _)| !props.iter().any(|p| p.id == **pid)) {
        return Err(Error::validation(format!(
            "property {pname:?} does not belong to asset type {new_type_name:?}; clear it before changing the type"
        )));
    }

    let mut diff = Diff::new();
    diff.text("name", &old.name, &name);
    diff.field("details", old.details.clone(), details.clone());
    diff.field("serialNumber", old.serial_number.clone(), serial.clone());
    diff.field("legacyID", old.legacyid.clone(), legacyid.clone());
    diff.text("status", old.status.as_str(), status.as_str());
    diff.text("type", &old.type_name, &new_type_name);
    if location_id != old.location_id {
        diff.text("location", &old.location_name, &new_location);
    }
    if owner_id != old.owner_id {
        diff.text("owner", &old.owner_name, &new_owner);
    }
    if assignee_id != old.assignee_id {
        diff.field("assignee", old.assignee.clone(), new_assignee);
    }
    if parent_id != old.parent_id {
        diff.field("parent", old.parent_iufaid.clone(), new_parent);
    }
    let old_values: BTreeMap<i64, &PropertyValue> = old.properties.iter().map(|p| (p.property_id, p)).collect();
    let mut touched: BTreeSet<i64> = old_values.keys().copied().collect();
    touched.extend(values.keys().copied());
    for pid in &touched {
        let before = old_values.get(pid);
        let after = values.get(pid);
        let label = before.map(|p| p.name.as_str()).or(after.map(|(n, _)| n.as_str())).unwrap_or_default();
        diff.field(
            format!("prop:{label}"),
            before.map(|p| p.value.clone()),
            after.map(|(_, v)| v.clone()),
        );
    }
    if diff.is_empty() {
        return Ok((old, false));
    }

    let version = old.version + 1;
    let updated = tx.execute(
        "UPDATE asset SET version = ?2, status = ?3, legacyid = ?4, location_id = ?5, assignee_id = ?6, parent_id = ?7, \
         serial_number = ?8, type_id = ?9, details = ?10, name = ?11, owner_id = ?12 WHERE id = ?1 AND version = ?13",
        params![
            id,
            version,
            status.as_str(),
            legacyid,
            location_id,
            assignee_id,
            parent_id,
            serial,
            type_id,
            details,
            name,
            owner_id,
            old.version
        ],
    )?;
    if updated == 0 {
        let actual = tx.query_row("SELECT version FROM asset WHERE id = ?1", params![id], |r| r.get(0))?;
        return Err(Error::StaleVersion {
            kind: "asset",
            id,
            expected: old.version,
            actual,
        });
    }
    for pid in &touched {
        match (old_values.get(pid), values.get(pid)) {
            (Some(_), None) => {
                tx.execute(
                    "DELETE FROM asset_property WHERE asset_id = ?1 AND asset_type_property_id = ?2",
                    params![id, pid],
                )?;
            }
            (None, Some((_, v))) => {
                tx.execute(
                    "INSERT INTO asset_property (version, asset_id, value, asset_type_property_id) VALUES (0, ?1, ?2, ?3)",
                    params![id, v, pid],
                )?;
            }
            (Some(before), Some((_, v))) if &before.value != v => {
                tx.execute(
                    "UPDATE asset_property SET value = ?3, version = version + 1 \
                     WHERE asset_id = ?1 AND asset_type_property_id = ?2",
                    params![id, pid, v],
                )?;
            }
            _ => {}
        }
    }
    record_change(
        tx,
        &ChangeSet::new(actor, AuditEvent::Update, "Asset", id, version).with_changes(diff.into_changes()),
    )?;
    Ok((load_asset(tx, id)?, true))
}

impl Uuis {
    pub fn asset_create(&self, actor: &Actor, new: NewAsset) -> Result<Asset> {
        self.store().write(|tx| {
            let ctx = AccessContext::load(tx, actor.user_id)?;
            create_asset_in(tx, &ctx, actor, &new)
        })
    }

    pub fn asset_edit(&self, actor: &Actor, id: i64, changes: AssetChanges) -> Result<Asset> {
        self.store().write(|tx| {
            let ctx = AccessContext::load(tx, actor.user_id)?;
            edit_asset_in(tx, &ctx, actor, id, &changes).map(|(asset, _)| asset)
        })
    }

    pub fn asset_show(&self, actor: &Actor, id: i64) -> Result<Asset> {
        self.store().read(|tx| {
            let ctx = AccessContext::load(tx, actor.user_id)?;
            let asset = load_asset(tx, id)?;
            ctx.require(Permission::AssetView, asset.owner_id)?;
            Ok(asset)
        })
    }

    /// Assets owned within the actor's scope, by id.
    pub fn asset_list(&self, actor: &Actor, filter: AssetFilter, page: PageRequest) -> Result<Page<Asset>> {
        self.store().read(|tx| {
            let ctx = AccessContext::load(tx, actor.user_id)?;
            if !ctx.has(Permission::AssetView) {
                return Err(Error::forbidden(format!(
                    "{} lacks permission {}",
                    ctx.username,
                    Permission::AssetView
                )));
            }
            let mut clauses: Vec<String> = Vec::new();
            let mut args: Vec<i64> = Vec::new();
            if !ctx.is_institution() {
                clauses.push(format!("a.owner_id IN {}", id_list(&ctx.scope)));
            }
            for (column, value) in [
                ("a.location_id", filter.location_id),
                ("a.owner_id", filter.owner_id),
                ("a.type_id", filter.type_id),
            ] {
                if let Some(v) = value {
                    args.push(v);
                    clauses.push(format!("{column} = ?{}", args.len()));
                }
            }
            let filter_sql = if clauses.is_empty() {
                String::new()
            } else {
                format!(" WHERE {}", clauses.join(" AND "))
            };
            let total: i64 = tx.query_row(
                &format!("SELECT COUNT(*) FROM asset a{filter_sql}"),
                params_from_iter(args.iter()),
                |r| r.get(0),
            )?;
            let mut stmt = tx.prepare(&format!(
                "{ASSET_SELECT}{filter_sql} ORDER BY a.id LIMIT {} OFFSET {}",
                page.per_page,
                page.offset()
            ))?;
            let mut rows = stmt
                .query_map(params_from_iter(args.iter()), asset_from_row)?
                .collect::<rusqlite::Result<Vec<_>>>()?;
            for a in &mut rows {
                a.properties = asset_properties(tx, a.id)?;
            }
            Ok(Page {
                rows,
                page: page.page,
                per_page: page.per_page,
                total: total as u64,
            })
        })
    }
}
