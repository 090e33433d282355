//! Read-only tabular reports and their CSV export.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, SecondsFormat, Utc};
use rusqlite::{params, Connection, OptionalExtension};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::paging::{Page, PageRequest, DEFAULT_PER_PAGE};
use crate::security::{AccessContext, Level, PartTree, Permission};
use crate::service::{Actor, Uuis};
use crate::workflow::{all_requests, RequestStatus};

#[derive(Debug, Clone, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct ReportFilter {
    /// Restricts to this location and everything under it.
    pub building: Option<i64>,
    pub room_type: Option<i64>,
    /// Restricts to this university part and everything under it.
    pub department: Option<i64>,
    pub status: Option<RequestStatus>,
    pub date_from: Option<DateTime<Utc>>,
    pub date_to: Option<DateTime<Utc>>,
    pub page: Option<u32>,
    pub per_page: Option<u32>,
}

impl ReportFilter {
    pub fn page_request(&self) -> Result<PageRequest> {
        PageRequest::new(self.page.unwrap_or(1), self.per_page.unwrap_or(DEFAULT_PER_PAGE))
    }

    fn validate(&self) -> Result<()> {
        if let (Some(from), Some(to)) = (self.date_from, self.date_to) {
            if from > to {
                return Err(Error::validation("date_from is after date_to"));
            }
        }
        self.page_request().map(|_| ())
    }
}

/// Header plus string cells, the shape shared by every report when exported.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

pub fn export_csv(table: &Table) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::validation(format!("CSV encoding failed: {e}"));
    w.write_record(&table.columns).map_err(csv_err)?;
    for row in &table.rows {
        w.write_record(row).map_err(csv_err)?;
    }
    w.into_inner()
        .map_err(|e| Error::validation(format!("CSV encoding failed: {e}")))
}

/// Renders as `2010-04-17T12:43:59Z`.
pub fn iso_utc(ts: DateTime<Utc>) -> String {
    ts.to_rfc3339_opts(SecondsFormat::Secs, true)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct LocationReportRow {
    pub id: i64,
    pub name: String,
    /// Parent location name, `-` at a root.
    pub located_at: String,
    pub location_type: String,
    pub capacity: i64,
    /// Directly resident assets per type, aligned with `LocationReport::asset_types`.
    pub counts: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct LocationReport {
    /// Asset type names in alphabetical order.
    pub asset_types: Vec<String>,
    #[serde(flatten)]
    pub page: Page<LocationReportRow>,
}

impl LocationReport {
    pub fn columns(asset_types: &[String]) -> Vec<String> {
        let mut cols: Vec<String> = ["ID", "Location", "Located At", "LocationType", "Capacity"]
            .map(String::from)
            .to_vec();
        cols.extend(asset_types.iter().map(|t| plural(t)));
        cols
    }
}

fn plural(name: &str) -> String {
    if name.ends_with('s') {
        name.to_string()
    } else {
        format!("{name}s")
    }
}

fn location_table(asset_types: &[String], rows: &[LocationReportRow]) -> Table {
    Table {
        columns: LocationReport::columns(asset_types),
        rows: rows
            .iter()
            .map(|r| {
                let mut cells = vec![
                    r.id.to_string(),
                    r.name.clone(),
                    r.located_at.clone(),
                    r.location_type.clone(),
                    r.capacity.to_string(),
                ];
                cells.extend(r.counts.iter().map(u64::to_string));
                cells
            })
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RequestReportRow {
    pub id: i64,
    pub requester: String,
    /// Assigned university part.
    pub property_of: String,
    pub description: String,
    pub comments: String,
    pub submission_date: String,
    pub status: String,
}

pub const REQUEST_REPORT_COLUMNS: [&str; 7] =
    ["ID", "Requester", "Property Of", "Description", "Comments", "Submission Date", "Status"];

fn request_table(rows: &[RequestReportRow]) -> Table {
    Table {
        columns: REQUEST_REPORT_COLUMNS.map(String::from).to_vec(),
        rows: rows
            .iter()
            .map(|r| {
                vec![
                    r.id.to_string(),
                    r.requester.clone(),
                    r.property_of.clone(),
                    r.description.clone(),
                    r.comments.clone(),
                    r.submission_date.clone(),
                    r.status.clone(),
                ]
            })
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct UserPermissionRow {
    pub user_id: i64,
    pub username: String,
    pub name: String,
    pub level: Level,
    pub roles: Vec<String>,
    pub permissions: Vec<String>,
    pub managed_parts: Vec<String>,
}

pub const USER_PERMISSION_COLUMNS: [&str; 6] =
    ["Username", "Name", "Level", "Roles", "Permissions", "Managed Parts"];

fn user_table(rows: &[UserPermissionRow]) -> Table {
    Table {
        columns: USER_PERMISSION_COLUMNS.map(String::from).to_vec(),
        rows: rows
            .iter()
            .map(|r| {
                vec![
                    r.username.clone(),
                    r.name.clone(),
                    r.level.value().to_string(),
                    r.roles.join(";"),
                    r.permissions.join(";"),
                    r.managed_parts.join(";"),
                ]
            })
            .collect(),
    }
}

fn location_subtree(conn: &Connection, root: i64) -> Result<BTreeSet<i64>> {
    let exists: Option<i64> = conn
        .query_row("SELECT id FROM location WHERE id = ?1", params![root], |r| r.get(0))
        .optional()?;
    if exists.is_none() {
        return Err(Error::not_found("location", root));
    }
    let mut children: BTreeMap<i64, Vec<i64>> = BTreeMap::new();
    let mut stmt = conn.prepare("SELECT id, parent_location_id FROM location WHERE parent_location_id IS NOT NULL")?;
    for pair in stmt.query_map([], |r| Ok((r.get::<_, i64>(0)?, r.get::<_, i64>(1)?)))? {
        let (id, parent) = pair?;
        children.entry(parent).or_default().push(id);
    }
    let mut out = BTreeSet::new();
    let mut stack = vec![root];
    while let Some(id) = stack.pop() {
        if out.insert(id) {
            stack.extend(children.get(&id).into_iter().flatten().copied());
        }
    }
    Ok(out)
}

fn department_subtree(tree: &PartTree, department: Option<i64>) -> Result<Option<BTreeSet<i64>>> {
    department
        .map(|d| {
            if tree.contains(d) {
                Ok(tree.subtree(d))
            } else {
                Err(Error::not_found("university part", d))
            }
        })
        .transpose()
}

fn assets_by_location(
    conn: &Connection,
    ctx: &AccessContext,
    tree: &PartTree,
    filter: &ReportFilter,
) -> Result<(Vec<String>, Vec<LocationReportRow>)> {
    let visible = ctx.visible_parts(tree);
    let within = filter.building.map(|b| location_subtree(conn, b)).transpose()?;
    let departments = department_subtree(tree, filter.department)?;

    let mut type_stmt = conn.prepare("SELECT id, name FROM asset_type ORDER BY name, id")?;
    let types: Vec<(i64, String)> = type_stmt
        .query_map([], |r| Ok((r.get(0)?, r.get(1)?)))?
        .collect::<rusqlite::Result<_>>()?;
    let column_of: BTreeMap<i64, usize> = types.iter().enumerate().map(|(i, (id, _))| (*id, i)).collect();

    let mut counts: BTreeMap<i64, Vec<u64>> = BTreeMap::new();
    let mut count_stmt = conn.prepare("SELECT location_id, type_id, COUNT(*) FROM asset GROUP BY location_id, type_id")?;
    for rec in count_stmt.query_map([], |r| Ok((r.get::<_, i64>(0)?, r.get::<_, i64>(1)?, r.get::<_, i64>(2)?)))? {
        let (loc, ty, n) = rec?;
        counts.entry(loc).or_insert_with(|| vec![0; types.len()])[column_of[&ty]] = n as u64;
    }

    let mut stmt = conn.prepare(
        "SELECT l.id, l.name, p.name, t.id, t.name, l.capacity, l.owner_id FROM location l \
         JOIN location_type t ON t.id = l.type_id LEFT JOIN location p ON p.id = l.parent_location_id \
         ORDER BY l.id",
    )?;
    let mut rows = Vec::new();
    let mapped = stmt.query_map([], |r| {
        Ok((
            r.get::<_, i64>(0)?,
            r.get::<_, String>(1)?,
            r.get::<_, Option<String>>(2)?,
            r.get::<_, i64>(3)?,
            r.get::<_, String>(4)?,
            r.get::<_, i64>(5)?,
            r.get::<_, i64>(6)?,
        ))
    })?;
    for rec in mapped {
        let (id, name, parent, type_id, type_name, capacity, owner) = rec?;
        let keep = visible.contains(&owner)
            && within.as_ref().is_none_or(|w| w.contains(&id))
            && filter.room_type.is_none_or(|t| t == type_id)
            && departments.as_ref().is_none_or(|d| d.contains(&owner));
        if !keep {
            continue;
        }
        rows.push(LocationReportRow {
            id,
            name,
            located_at: parent.unwrap_or_else(|| "-".to_string()),
            location_type: type_name,
            capacity,
            counts: counts.remove(&id).unwrap_or_else(|| vec![0; types.len()]),
        });
    }
    Ok((types.into_iter().map(|(_, n)| n).collect(), rows))
}

fn requests_report(
    conn: &Connection,
    ctx: &AccessContext,
    tree: &PartTree,
    filter: &ReportFilter,
) -> Result<Vec<RequestReportRow>> {
    let visible = ctx.visible_parts(tree);
    let departments = department_subtree(tree, filter.department)?;
    let rows = all_requests(conn)?
        .into_iter()
        .filter(|r| visible.contains(&r.part_assigned_id))
        .filter(|r| departments.as_ref().is_none_or(|d| d.contains(&r.part_assigned_id)))
        .filter(|r| filter.status.is_none_or(|s| s == r.status))
        .filter(|r| filter.date_from.is_none_or(|f| r.submission_date >= f))
        .filter(|r| filter.date_to.is_none_or(|t| r.submission_date <= t))
        .map(|r| RequestReportRow {
            id: r.id,
            requester: r.requester,
            property_of: r.part_assigned,
            description: r.description.unwrap_or_default(),
            comments: r.comments.unwrap_or_default(),
            submission_date: iso_utc(r.submission_date),
            status: r.status.code().to_string(),
        })
        .collect();
    Ok(rows)
}

fn user_permissions(
    conn: &Connection,
    ctx: &AccessContext,
    tree: &PartTree,
    filter: &ReportFilter,
) -> Result<Vec<UserPermissionRow>> {
    let visible = ctx.visible_parts(tree);
    let departments = department_subtree(tree, filter.department)?;
    let mut stmt = conn.prepare("SELECT id FROM \"user\" ORDER BY id")?;
    let ids: Vec<i64> = stmt.query_map([], |r| r.get(0))?.collect::<rusqlite::Result<_>>()?;
    let mut role_stmt = conn.prepare("SELECT id, name FROM role")?;
    let role_names: BTreeMap<i64, String> = role_stmt
        .query_map([], |r| Ok((r.get(0)?, r.get(1)?)))?
        .collect::<rusqlite::Result<_>>()?;

    let mut rows = Vec::new();
    for id in ids {
        let user = AccessContext::load_with_tree(conn, tree, id)?;
        let g = &user.grants;
        let attached: BTreeSet<i64> = g.member_parts.union(&g.managed_parts).copied().collect();
        let seen = ctx.is_institution() || id == ctx.user_id || !attached.is_disjoint(&visible);
        let matches = departments.as_ref().is_none_or(|d| !attached.is_disjoint(d));
        if !(seen && matches) {
            continue;
        }
        let name: String = conn.query_row("SELECT name FROM \"user\" WHERE id = ?1", params![id], |r| r.get(0))?;
        let mut roles: Vec<String> = g.roles.iter().filter_map(|r| role_names.get(r).cloned()).collect();
        roles.sort();
        rows.push(UserPermissionRow {
            user_id: id,
            username: user.username.clone(),
            name,
            level: user.level,
            roles,
            permissions: user.permissions.iter().map(|p| p.as_str().to_string()).collect(),
            managed_parts: g
                .managed_parts
                .iter()
                .filter_map(|p| tree.name(*p).map(String::from))
                .collect(),
        });
    }
    Ok(rows)
}

impl Uuis {
    fn report_read<T>(
        &self,
        actor: &Actor,
        filter: &ReportFilter,
        f: impl FnOnce(&Connection, &AccessContext, &PartTree) -> Result<T>,
    ) -> Result<T> {
        filter.validate()?;
        self.store().read(|tx| {
            let tree = PartTree::load(tx)?;
            let ctx = AccessContext::load_with_tree(tx, &tree, actor.user_id)?;
            if !ctx.has(Permission::ReportView) {
                return Err(Error::forbidden(format!("{} lacks permission report.view", ctx.username)));
            }
            f(tx, &ctx, &tree)
        })
    }

    /// One row per visible location with per-type counts of assets located directly there.
    pub fn report_assets_by_location(&self, actor: &Actor, filter: &ReportFilter) -> Result<LocationReport> {
        let (asset_types, rows) = self.report_read(actor, filter, |c, ctx, t| assets_by_location(c, ctx, t, filter))?;
        Ok(LocationReport {
            asset_types,
            page: filter.page_request()?.slice(rows),
        })
    }

    pub fn report_requests(&self, actor: &Actor, filter: &ReportFilter) -> Result<Page<RequestReportRow>> {
        let rows = self.report_read(actor, filter, |c, ctx, t| requests_report(c, ctx, t, filter))?;
        Ok(filter.page_request()?.slice(rows))
    }

    pub fn report_user_permissions(&self, actor: &Actor, filter: &ReportFilter) -> Result<Page<UserPermissionRow>> {
        let rows = self.report_read(actor, filter, |c, ctx, t| user_permissions(c, ctx, t, filter))?;
        Ok(filter.page_request()?.slice(rows))
    }

    /// The full filtered result, ignoring paging.
    pub fn table_assets_by_location(&self, actor: &Actor, filter: &ReportFilter) -> Result<Table> {
        let (types, rows) = self.report_read(actor, filter, |c, ctx, t| assets_by_location(c, ctx, t, filter))?;
        Ok(location_table(&types, &rows))
    }

    pub fn table_requests(&self, actor: &Actor, filter: &ReportFilter) -> Result<Table> {
        let rows = self.report_read(actor, filter, |c, ctx, t| requests_report(c, ctx, t, filter))?;
        Ok(request_table(&rows))
    }

    pub fn table_user_permissions(&self, actor: &Actor, filter: &ReportFilter) -> Result<Table> {
        let rows = self.report_read(actor, filter, |c, ctx, t| user_permissions(c, ctx, t, filter))?;
        Ok(user_table(&rows))
    }
}
