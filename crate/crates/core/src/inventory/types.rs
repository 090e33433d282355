use std::collections::BTreeSet;

use rusqlite::{params, Connection, OptionalExtension};
use serde::{Deserialize, Serialize};

use crate::audit::{record_change, AuditEvent, ChangeSet};
use crate::error::{Error, Result};
use crate::security::{AccessContext, Permission};
use crate::service::{Actor, Uuis};
use crate::text;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct TypeProperty {
    pub id: i64,
    pub version: i64,
    pub name: String,
    pub hint: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct AssetType {
    pub id: i64,
    pub version: i64,
    pub name: String,
    pub description: Option<String>,
    pub properties: Vec<TypeProperty>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct LocationType {
    pub id: i64,
    pub version: i64,
    pub name: String,
    pub description: Option<String>,
    pub properties: Vec<TypeProperty>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct NewTypeProperty {
    pub name: String,
    #[serde(default)]
    pub hint: Option<String>,
}

/// Input for both asset and location types.
#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct NewType {
    pub name: String,
    #[serde(default)]
    pub description: Option<String>,
    #[serde(default)]
    pub properties: Vec<NewTypeProperty>,
}

fn property_from_row(r: &rusqlite::Row<'_>) -> rusqlite::Result<TypeProperty> {
    Ok(TypeProperty {
        id: r.get(0)?,
        version: r.get(1)?,
        name: r.get(2)?,
        hint: r.get(3)?,
    })
}

/// Properties declared by an asset type; the owning-type column is authoritative.
pub(crate) fn asset_type_properties(conn: &Connection, type_id: i64) -> Result<Vec<TypeProperty>> {
    let mut stmt = conn.prepare_cached(
        "SELECT id, version, name, hint FROM asset_type_property WHERE asset_type_id = ?1 ORDER BY id",
    )?;
    let rows = stmt.query_map(params![type_id], property_from_row)?.collect::<rusqlite::Result<_>>()?;
    Ok(rows)
}

pub(crate) fn location_type_properties(conn: &Connection, type_id: i64) -> Result<Vec<TypeProperty>> {
    let mut stmt = conn.prepare_cached(
        "SELECT p.id, p.version, p.name, p.hint FROM location_type_property p \
         JOIN location_type_location_type_properties j ON j.location_type_property_id = p.id \
         WHERE j.location_type_id = ?1 ORDER BY p.id",
    )?;
    let rows = stmt.query_map(params![type_id], property_from_row)?.collect::<rusqlite::Result<_>>()?;
    Ok(rows)
}

pub(crate) fn load_asset_type(conn: &Connection, id: i64) -> Result<AssetType> {
    let (version, name, description) = conn
        .query_row(
            "SELECT version, name, description FROM asset_type WHERE id = ?1",
            params![id],
            |r| Ok((r.get(0)?, r.get(1)?, r.get(2)?)),
        )
        .optional()?
        .ok_or_else(|| Error::not_found("asset type", id))?;
    Ok(AssetType {
        id,
        version,
        name,
        description,
        properties: asset_type_properties(conn, id)?,
    })
}

pub(crate) fn load_location_type(conn: &Connection, id: i64) -> Result<LocationType> {
    let (version, name, description) = conn
        .query_row(
            "SELECT version, name, description FROM location_type WHERE id = ?1",
            params![id],
            |r| Ok((r.get(0)?, r.get(1)?, r.get(2)?)),
        )
        .optional()?
        .ok_or_else(|| Error::not_found("location type", id))?;
    Ok(LocationType {
        id,
        version,
        name,
        description,
        properties: location_type_properties(conn, id)?,
    })
}

struct CleanType {
    name: String,
    description: Option<String>,
    properties: Vec<(String, Option<String>)>,
}

fn clean(new: &NewType) -> Result<CleanType> {
    let name = text::required("name", &new.name)?;
    let description = text::optional("description", new.description.as_deref())?;
    let mut seen = BTreeSet::new();
    let mut properties = Vec::with_capacity(new.properties.len());
    for p in &new.properties {
        let pname = text::required("property name", &p.name)?;
        if !seen.insert(pname.to_lowercase()) {
            return Err(Error::validation(format!("property {pname:?} is declared twice")));
        }
        properties.push((pname, text::optional("hint", p.hint.as_deref())?));
    }
    Ok(CleanType {
        name,
        description,
        properties,
    })
}

fn all_ids(conn: &Connection, sql: &str) -> Result<Vec<i64>> {
    let mut stmt = conn.prepare(sql)?;
    let ids = stmt.query_map([], |r| r.get(0))?.collect::<rusqlite::Result<_>>()?;
    Ok(ids)
}

impl Uuis {
    pub fn asset_type_create(&self, actor: &Actor, new: NewType) -> Result<AssetType> {
        let t = clean(&new)?;
        self.store().write(|tx| {
            AccessContext::load(tx, actor.user_id)?.require_institution(Permission::AssetCreate)?;
            tx.execute(
                "INSERT INTO asset_type (version, name, description) VALUES (0, ?1, ?2)",
                params![t.name, t.description],
            )?;
            let id = tx.last_insert_rowid();
            record_change(tx, &ChangeSet::new(actor, AuditEvent::Insert, "AssetType", id, 0))?;
            for (name, hint) in &t.properties {
                tx.execute(
                    "INSERT INTO asset_type_property (version, name, hint, asset_type_id) VALUES (0, ?1, ?2, ?3)",
                    params![name, hint.as_deref().unwrap_or(""), id],
                )?;
                let pid = tx.last_insert_rowid();
                tx.execute(
                    "INSERT INTO asset_type_asset_type_properties (asset_type_property_id, asset_type_id) VALUES (?1, ?2)",
                    params![pid, id],
                )?;
                record_change(tx, &ChangeSet::new(actor, AuditEvent::Insert, "AssetTypeProperty", pid, 0))?;
            }
            load_asset_type(tx, id)
        })
    }

    pub fn asset_type_list(&self, actor: &Actor) -> Result<Vec<AssetType>> {
        self.store().read(|tx| {
            AccessContext::load(tx, actor.user_id)?;
            all_ids(tx, "SELECT id FROM asset_type ORDER BY id")?
                .into_iter()
                .map(|id| load_asset_type(tx, id))
                .collect()
        })
    }

    pub fn asset_type_show(&self, actor: &Actor, id: i64) -> Result<AssetType> {
        self.store().read(|tx| {
            AccessContext::load(tx, actor.user_id)?;
            load_asset_type(tx, id)
        })
    }

    /// Property names are global for location types, so an existing
    /// property of the same name is shared instead of duplicated.
    pub fn location_type_create(&self, actor: &Actor, new: NewType) -> Result<LocationType> {
        let t = clean(&new)?;
        self.store().write(|tx| {
            AccessContext::load(tx, actor.user_id)?.require_institution(Permission::LocationCreate)?;
            let taken: Option<i64> = tx
                .query_row("SELECT id FROM location_type WHERE name = ?1", params![t.name], |r| r.get(0))
                .optional()?;
            if taken.is_some() {
                return Err(Error::Duplicate(format!("location type {:?}", t.name)));
            }
            tx.execute(
                "INSERT INTO location_type (version, name, description) VALUES (0, ?1, ?2)",
                params![t.name, t.description],
            )?;
            let id = tx.last_insert_rowid();
            record_change(tx, &ChangeSet::new(actor, AuditEvent::Insert, "LocationType", id, 0))?;
            for (name, hint) in &t.properties {
                let existing: Option<i64> = tx
                    .query_row(
                        "SELECT id FROM location_type_property WHERE name = ?1",
                        params![name],
                        |r| r.get(0),
                    )
                    .optional()?;
                let pid = match existing {
                    Some(pid) => pid,
                    None => {
                        tx.execute(
                            "INSERT INTO location_type_property (version, name, hint) VALUES (0, ?1, ?2)",
                            params![name, hint],
                        )?;
                        let pid = tx.last_insert_rowid();
                        record_change(tx, &ChangeSet::new(actor, AuditEvent::Insert, "LocationTypeProperty", pid, 0))?;
                        pid
                    }
                };
                tx.execute(
                    "INSERT INTO location_type_location_type_properties (location_type_id, location_type_property_id) \
                     VALUES (?1, ?2)",
                    params![id, pid],
                )?;
            }
            load_location_type(tx, id)
        })
    }

    pub fn location_type_list(&self, actor: &Actor) -> Result<Vec<LocationType>> {
        self.store().read(|tx| {
            AccessContext::load(tx, actor.user_id)?;
            all_ids(tx, "SELECT id FROM location_type ORDER BY id")?
                .into_iter()
                .map(|id| load_location_type(tx, id))
                .collect()
        })
    }

    pub fn location_type_show(&self, actor: &Actor, id: i64) -> Result<LocationType> {
        self.store().read(|tx| {
            AccessContext::load(tx, actor.user_id)?;
            load_location_type(tx, id)
        })
    }
}
