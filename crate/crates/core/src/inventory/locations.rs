use std::collections::{BTreeMap, BTreeSet};

use rusqlite::{params, params_from_iter, Connection, OptionalExtension};
use serde::{Deserialize, Serialize};

use super::types::{location_type_properties, TypeProperty};
use super::{location_name, opt_name, part_name, user_ref, PropertyValue};
use crate::audit::{id_list, record_change, AuditEvent, ChangeSet, Diff};
use crate::check_version;
use crate::error::{Error, Result};
use crate::paging::{Page, PageRequest};
use crate::security::{AccessContext, Permission};
use crate::service::{Actor, Uuis};
use crate::text;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Location {
    pub id: i64,
    pub version: i64,
    pub name: String,
    pub description: Option<String>,
    pub type_id: i64,
    pub type_name: String,
    pub parent_location_id: Option<i64>,
    pub parent_name: Option<String>,
    pub owner_id: i64,
    pub owner_name: String,
    pub assignee_id: Option<i64>,
    pub assignee: Option<String>,
    pub capacity: i64,
    /// Opaque floor-plan bytes, base64 in JSON.
    #[serde(with = "crate::serde_util::base64_opt")]
    pub map: Option<Vec<u8>>,
    pub properties: Vec<PropertyValue>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct NewLocation {
    pub name: String,
    pub type_id: i64,
    pub owner_id: i64,
    pub capacity: i64,
    #[serde(default)]
    pub description: Option<String>,
    #[serde(default)]
    pub parent_location_id: Option<i64>,
    #[serde(default)]
    pub assignee_id: Option<i64>,
    #[serde(default, with = "crate::serde_util::base64_opt")]
    pub map: Option<Vec<u8>>,
    #[serde(default)]
    pub properties: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct LocationChanges {
    pub version: Option<i64>,
    pub name: Option<String>,
    pub description: Option<String>,
    pub type_id: Option<i64>,
    pub owner_id: Option<i64>,
    pub capacity: Option<i64>,
    #[serde(deserialize_with = "crate::serde_util::double_option")]
    pub parent_location_id: Option<Option<i64>>,
    #[serde(deserialize_with = "crate::serde_util::double_option")]
    pub assignee_id: Option<Option<i64>>,
    #[serde(deserialize_with = "crate::serde_util::base64_double_opt")]
    pub map: Option<Option<Vec<u8>>>,
    pub properties: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct LocationFilter {
    pub parent_location_id: Option<i64>,
    pub type_id: Option<i64>,
}

const LOCATION_SELECT: &str = "SELECT l.id, l.version, l.name, l.description, l.type_id, t.name, l.parent_location_id, \
     p.name, l.owner_id, o.name, l.assignee_id, u.username, l.capacity, l.map \
     FROM location l JOIN location_type t ON t.id = l.type_id JOIN university_part o ON o.id = l.owner_id \
     LEFT JOIN location p ON p.id = l.parent_location_id LEFT JOIN \"user\" u ON u.id = l.assignee_id";

fn location_from_row(r: &rusqlite::Row<'_>) -> rusqlite::Result<Location> {
    Ok(Location {
        id: r.get(0)?,
        version: r.get(1)?,
        name: r.get(2)?,
        description: r.get(3)?,
        type_id: r.get(4)?,
        type_name: r.get(5)?,
        parent_location_id: r.get(6)?,
        parent_name: r.get(7)?,
        owner_id: r.get(8)?,
        owner_name: r.get(9)?,
        assignee_id: r.get(10)?,
        assignee: r.get(11)?,
        capacity: r.get(12)?,
        map: r.get(13)?,
        properties: Vec::new(),
    })
}

fn location_properties(conn: &Connection, location_id: i64) -> Result<Vec<PropertyValue>> {
    let mut stmt = conn.prepare_cached(
        "SELECT lp.location_type_property_id, p.name, lp.value FROM location_property lp \
         JOIN location_type_property p ON p.id = lp.location_type_property_id \
         WHERE lp.location_id = ?1 ORDER BY lp.location_type_property_id",
    )?;
    let rows = stmt
        .query_map(params![location_id], |r| {
            Ok(PropertyValue {
                property_id: r.get(0)?,
                name: r.get(1)?,
                value: r.get(2)?,
            })
        })?
        .collect::<rusqlite::Result<_>>()?;
    Ok(rows)
}

pub(crate) fn load_location(conn: &Connection, id: i64) -> Result<Location> {
    let mut loc = conn
        .query_row(&format!("{LOCATION_SELECT} WHERE l.id = ?1"), params![id], location_from_row)
        .optional()?
        .ok_or_else(|| Error::not_found("location", id))?;
    loc.properties = location_properties(conn, id)?;
    Ok(loc)
}

fn type_name(conn: &Connection, id: i64) -> Result<String> {
    conn.query_row("SELECT name FROM location_type WHERE id = ?1", params![id], |r| r.get(0))
        .optional()?
        .ok_or_else(|| Error::validation(format!("location type {id} does not exist")))
}

fn check_capacity(capacity: i64) -> Result<i64> {
    if capacity < 0 {
        return Err(Error::validation("capacity must not be negative"));
    }
    Ok(capacity)
}

/// Rejects a parent link that would place `location_id` under itself.
fn check_parent(conn: &Connection, location_id: Option<i64>, parent: i64) -> Result<()> {
    location_name(conn, parent)?;
    let mut seen = BTreeSet::new();
    let mut cursor = Some(parent);
    while let Some(node) = cursor {
        if Some(node) == location_id || !seen.insert(node) {
            return Err(Error::Cycle(format!(
                "location {parent} cannot become the parent of its own ancestor"
            )));
        }
        cursor = conn
            .query_row("SELECT parent_location_id FROM location WHERE id = ?1", params![node], |r| r.get(0))
            .optional()?
            .flatten();
    }
    Ok(())
}

fn resolve_values(
    props: &[TypeProperty],
    type_name: &str,
    input: &BTreeMap<String, String>,
    mut values: BTreeMap<i64, (String, String)>,
) -> Result<BTreeMap<i64, (String, String)>> {
    for (pname, value) in input {
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
                    "property {pname:?} does not belong to location type {type_name:?}"
                )))
            }
        }
    }
    if let Some((_, (pname, _))) = values.iter().find(|(pid, _)| !props.iter().any(|p| p.id == **pid)) {
        return Err(Error::validation(format!(
            "property {pname:?} does not belong to location type {type_name:?}"
        )));
    }
    Ok(values)
}

fn describe_map(map: &Option<Vec<u8>>) -> Option<String> {
    map.as_ref().map(|m| format!("{} bytes", m.len()))
}

impl Uuis {
    pub fn location_create(&self, actor: &Actor, new: NewLocation) -> Result<Location> {
        let name = text::required("name", &new.name)?;
        let description = text::optional("description", new.description.as_deref())?;
        let capacity = check_capacity(new.capacity)?;
        self.store().write(|tx| {
            let ctx = AccessContext::load(tx, actor.user_id)?;
            let tname = type_name(tx, new.type_id)?;
            part_name(tx, new.owner_id)?;
            ctx.require(Permission::LocationCreate, new.owner_id)?;
            if let Some(p) = new.parent_location_id {
                check_parent(tx, None, p)?;
            }
            if let Some(a) = new.assignee_id {
                user_ref(tx, a)?;
            }
            let props = location_type_properties(tx, new.type_id)?;
            let values = resolve_values(&props, &tname, &new.properties, BTreeMap::new())?;
            tx.execute(
                "INSERT INTO location (version, assignee_id, parent_location_id, type_id, description, name, map, \
                 owner_id, capacity) VALUES (0, ?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8)",
                params![
                    new.assignee_id,
                    new.parent_location_id,
                    new.type_id,
                    description,
                    name,
                    new.map,
                    new.owner_id,
                    capacity
                ],
            )?;
            let id = tx.last_insert_rowid();
            for (pid, (_, value)) in &values {
                tx.execute(
                    "INSERT INTO location_property (version, location_id, value, location_type_property_id) \
                     VALUES (0, ?1, ?2, ?3)",
                    params![id, value, pid],
                )?;
            }
            record_change(tx, &ChangeSet::new(actor, AuditEvent::Insert, "Location", id, 0))?;
            load_location(tx, id)
        })
    }

    pub fn location_edit(&self, actor: &Actor, id: i64, changes: LocationChanges) -> Result<Location> {
        self.store().write(|tx| {
            let ctx = AccessContext::load(tx, actor.user_id)?;
            let old = load_location(tx, id)?;
            check_version("location", id, changes.version, old.version)?;
            ctx.require(Permission::LocationEdit, old.owner_id)?;

            let name = match &changes.name {
                Some(n) => text::required("name", n)?,
                None => old.name.clone(),
            };
            let description = match &changes.description {
                Some(d) => text::optional("description", Some(d))?,
                None => old.description.clone(),
            };
            let capacity = check_capacity(changes.capacity.unwrap_or(old.capacity))?;
            let type_id = changes.type_id.unwrap_or(old.type_id);
            let tname = type_name(tx, type_id)?;
            let owner_id = changes.owner_id.unwrap_or(old.owner_id);
            let owner_name = part_name(tx, owner_id)?;
            if owner_id != old.owner_id {
                ctx.require(Permission::LocationEdit, owner_id)?;
            }
            let parent = changes.parent_location_id.unwrap_or(old.parent_location_id);
            if let Some(p) = parent {
                if parent != old.parent_location_id {
                    check_parent(tx, Some(id), p)?;
                }
            }
            let parent_name = opt_name(tx, parent, location_name)?;
            let assignee_id = changes.assignee_id.unwrap_or(old.assignee_id);
            let assignee = opt_name(tx, assignee_id, user_ref)?;
            let map = changes.map.clone().unwrap_or_else(|| old.map.clone());

            let props = location_type_properties(tx, type_id)?;
            let current: BTreeMap<i64, (String, String)> = old
                .properties
                .iter()
                .map(|p| (p.property_id, (p.name.clone(), p.value.clone())))
                .collect();
            let values = resolve_values(&props, &tname, &changes.properties, current)?;

            let mut diff = Diff::new();
            diff.text("name", &old.name, &name);
            diff.field("description", old.description.clone(), description.clone());
            diff.text("capacity", &old.capacity.to_string(), &capacity.to_string());
            diff.text("type", &old.type_name, &tname);
            if owner_id != old.owner_id {
                diff.text("owner", &old.owner_name, &owner_name);
            }
            if parent != old.parent_location_id {
                diff.field("parent", old.parent_name.clone(), parent_name);
            }
            if assignee_id != old.assignee_id {
                diff.field("assignee", old.assignee.clone(), assignee);
            }
            if map != old.map {
                diff.field("map", describe_map(&old.map), describe_map(&map));
            }
            let old_values: BTreeMap<i64, &PropertyValue> =
                old.properties.iter().map(|p| (p.property_id, p)).collect();
            let mut touched: BTreeSet<i64> = old_values.keys().copied().collect();
            touched.extend(values.keys().copied());
            for pid in &touched {
                let before = old_values.get(pid);
                let after = values.get(pid);
                let label = before.map(|p| p.name.as_str()).or(after.map(|(n, _)| n.as_str())).unwrap_or_default();
                diff.field(format!("prop:{label}"), before.map(|p| p.value.clone()), after.map(|(_, v)| v.clone()));
            }
            if diff.is_empty() {
                return Ok(old);
            }

            let version = old.version + 1;
            tx.execute(
                "UPDATE location SET version = ?2, assignee_id = ?3, parent_location_id = ?4, type_id = ?5, \
                 description = ?6, name = ?7, map = ?8, owner_id = ?9, capacity = ?10 WHERE id = ?1 AND version = ?11",
                params![id, version, assignee_id, parent, type_id, description, name, map, owner_id, capacity, old.version],
            )?;
            for pid in &touched {
                match (old_values.get(pid), values.get(pid)) {
                    (Some(_), None) => {
                        tx.execute(
                            "DELETE FROM location_property WHERE location_id = ?1 AND location_type_property_id = ?2",
                            params![id, pid],
                        )?;
                    }
                    (None, Some((_, v))) => {
                        tx.execute(
                            "INSERT INTO location_property (version, location_id, value, location_type_property_id) \
                             VALUES (0, ?1, ?2, ?3)",
                            params![id, v, pid],
                        )?;
                    }
                    (Some(before), Some((_, v))) if &before.value != v => {
                        tx.execute(
                            "UPDATE location_property SET value = ?3, version = version + 1 \
                             WHERE location_id = ?1 AND location_type_property_id = ?2",
                            params![id, pid, v],
                        )?;
                    }
                    _ => {}
                }
            }
            record_change(
                tx,
                &ChangeSet::new(actor, AuditEvent::Update, "Location", id, version).with_changes(diff.into_changes()),
            )?;
            load_location(tx, id)
        })
    }

    /// Visible when the owning part is in the actor's scope.
    pub fn location_show(&self, actor: &Actor, id: i64) -> Result<Location> {
        self.store().read(|tx| {
            let ctx = AccessContext::load(tx, actor.user_id)?;
            let loc = load_location(tx, id)?;
            if !ctx.covers(loc.owner_id) {
                return Err(Error::forbidden(format!(
                    "location {id} is outside the scope of {}",
                    ctx.username
                )));
            }
            Ok(loc)
        })
    }

    pub fn location_list(&self, actor: &Actor, filter: LocationFilter, page: PageRequest) -> Result<Page<Location>> {
        self.store().read(|tx| {
            let ctx = AccessContext::load(tx, actor.user_id)?;
            let mut clauses = Vec::new();
            let mut args: Vec<i64> = Vec::new();
            if !ctx.is_institution() {
                clauses.push(format!("l.owner_id IN {}", id_list(&ctx.scope)));
            }
            for (column, value) in [
                ("l.parent_location_id", filter.parent_location_id),
                ("l.type_id", filter.type_id),
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
                &format!("SELECT COUNT(*) FROM location l{filter_sql}"),
                params_from_iter(args.iter()),
                |r| r.get(0),
            )?;
            let mut stmt = tx.prepare(&format!(
                "{LOCATION_SELECT}{filter_sql} ORDER BY l.id LIMIT {} OFFSET {}",
                page.per_page,
                page.offset()
            ))?;
            let mut rows = stmt
                .query_map(params_from_iter(args.iter()), location_from_row)?
                .collect::<rusqlite::Result<Vec<_>>>()?;
            for l in &mut rows {
                l.properties = location_properties(tx, l.id)?;
            }
            Ok(Page {
                rows,
                page: page.page,
                per_page: page.per_page,
                total: total as u64,
            })
        })
    }

    /// Level 3 only; refused while assets reside at the location or it has children.
    pub fn location_delete(&self, actor: &Actor, id: i64) -> Result<()> {
        self.store().write(|tx| {
            AccessContext::load(tx, actor.user_id)?.require_institution(Permission::LocationDelete)?;
            let loc = load_location(tx, id)?;
            let assets: i64 = tx.query_row("SELECT COUNT(*) FROM asset WHERE location_id = ?1", params![id], |r| {
                r.get(0)
            })?;
            if assets > 0 {
                return Err(Error::GuardedDelete {
                    kind: "location",
                    id,
                    reason: format!("{assets} asset(s) reside there"),
                });
            }
            let children: i64 = tx.query_row(
                "SELECT COUNT(*) FROM location WHERE parent_location_id = ?1",
                params![id],
                |r| r.get(0),
            )?;
            if children > 0 {
                return Err(Error::GuardedDelete {
                    kind: "location",
                    id,
                    reason: format!("{children} child location(s) exist"),
                });
            }
            tx.execute("DELETE FROM location_property WHERE location_id = ?1", params![id])?;
            tx.execute("DELETE FROM location WHERE id = ?1", params![id])?;
            record_change(tx, &ChangeSet::new(actor, AuditEvent::Delete, "Location", id, loc.version))?;
            Ok(())
        })
    }
}
