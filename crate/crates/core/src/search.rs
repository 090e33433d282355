//! Keyword and field-scoped search over assets, locations, requests and users.
//!
//! Matching is a case-insensitive substring test. Every call loads the
//! searchable records visible to the actor from one read snapshot, filters
//! them, and pages the result, so the total always agrees with the pages.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rusqlite::Connection;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::paging::{Page, PageRequest};
use crate::security::{AccessContext, PartTree, Permission};
use crate::service::{Actor, Uuis};
use crate::text::truncate_chars;

pub const MAX_QUERY_CHARS: usize = 1023;
pub const MAX_CLAUSES: usize = 4;
pub const NO_RESULTS_MESSAGE: &str = "No results match your criteria";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchQuery {
    pub raw: String,
    /// First [`MAX_QUERY_CHARS`] characters of `raw`.
    pub normalized: String,
    /// Non-empty and all whitespace: matches everything in scope.
    pub match_all: bool,
}

impl SearchQuery {
    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    fn term(&self) -> String {
        self.normalized.trim().to_lowercase()
    }
}

pub fn normalize_query(raw: &str) -> SearchQuery {
    let normalized = truncate_chars(raw, MAX_QUERY_CHARS).to_string();
    SearchQuery {
        raw: raw.to_string(),
        match_all: !raw.is_empty() && raw.chars().all(char::is_whitespace),
        normalized,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EntityKind {
    Asset,
    Location,
    Request,
    User,
}

impl EntityKind {
    pub const ALL: [EntityKind; 4] = [EntityKind::Asset, EntityKind::Location, EntityKind::Request, EntityKind::User];

    pub fn as_str(self) -> &'static str {
        match self {
            EntityKind::Asset => "ASSET",
            EntityKind::Location => "LOCATION",
            EntityKind::Request => "REQUEST",
            EntityKind::User => "USER",
        }
    }

    /// Attribute names accepted by advanced search, in display order.
    pub fn fields(self) -> &'static [&'static str] {
        match self {
            EntityKind::Asset => &[
                "iufaid",
                "legacyid",
                "name",
                "details",
                "serialNumber",
                "status",
                "type",
                "location",
                "owner",
            ],
            EntityKind::Location => &["name", "description", "type", "owner", "parent"],
            EntityKind::Request => &[
                "title",
                "description",
                "comments",
                "requestType",
                "status",
                "requester",
                "partAssigned",
                "subject",
            ],
            EntityKind::User => &["username", "name"],
        }
    }
}

impl fmt::Display for EntityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EntityKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EntityKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::validation(format!("unknown entity kind {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Connective {
    #[default]
    And,
    Or,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Clause {
    pub field: String,
    #[serde(default)]
    pub value: String,
    /// Joins this clause to the one before it; ignored on the first clause.
    #[serde(default)]
    pub connective: Connective,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AdvancedCriteria {
    pub entity: EntityKind,
    #[serde(default)]
    pub clauses: Vec<Clause>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SearchHit {
    pub kind: EntityKind,
    pub id: i64,
    pub label: String,
    pub owner_part_id: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SearchResults {
    #[serde(flatten)]
    pub page: Page<SearchHit>,
    /// Set when nothing matched.
    pub message: Option<String>,
}

impl SearchResults {
    fn from_page(page: Page<SearchHit>) -> Self {
        let message = (page.total == 0).then(|| NO_RESULTS_MESSAGE.to_string());
        SearchResults { page, message }
    }
}

struct Record {
    kind: EntityKind,
    id: i64,
    label: String,
    owner: Option<i64>,
    fields: Vec<(&'static str, String)>,
}

impl Record {
    fn hit(&self) -> SearchHit {
        SearchHit {
            kind: self.kind,
            id: self.id,
            label: self.label.clone(),
            owner_part_id: self.owner,
        }
    }

    fn field(&self, name: &str) -> Option<&str> {
        self.fields.iter().find(|(f, _)| *f == name).map(|(_, v)| v.as_str())
    }
}

fn contains_ci(haystack: &str, needle_lower: &str) -> bool {
    haystack.to_lowercase().contains(needle_lower)
}

fn text(v: Option<String>) -> String {
    v.unwrap_or_default()
}

/// Every searchable record the actor may see, in (kind, id) order.
fn visible_records(conn: &Connection, ctx: &AccessContext, tree: &PartTree, kinds: &[EntityKind]) -> Result<Vec<Record>> {
    let visible = ctx.visible_parts(tree);
    let mut out = Vec::new();

    if kinds.contains(&EntityKind::Asset) {
        let mut stmt = conn.prepare(
            "SELECT a.id, a.iufaid, a.legacyid, a.name, a.details, a.serial_number, a.status, t.name, l.name, o.name, \
             a.owner_id FROM asset a JOIN asset_type t ON t.id = a.type_id JOIN location l ON l.id = a.location_id \
             JOIN university_part o ON o.id = a.owner_id ORDER BY a.id",
        )?;
        let mut rows = stmt.query([])?;
        while let Some(r) = rows.next()? {
            let owner: i64 = r.get(10)?;
            if !visible.contains(&owner) {
                continue;
            }
            let iufaid: Option<String> = r.get(1)?;
            let name: String = r.get(3)?;
            out.push(Record {
                kind: EntityKind::Asset,
                id: r.get(0)?,
                label: iufaid.clone().unwrap_or_else(|| name.clone()),
                owner: Some(owner),
                fields: vec![
                    ("iufaid", text(iufaid)),
                    ("legacyid", text(r.get(2)?)),
                    ("name", name),
                    ("details", text(r.get(4)?)),
                    ("serialNumber", text(r.get(5)?)),
                    ("status", r.get(6)?),
                    ("type", r.get(7)?),
                    ("location", r.get(8)?),
                    ("owner", r.get(9)?),
                ],
            });
        }
    }

    if kinds.contains(&EntityKind::Location) {
        let mut stmt = conn.prepare(
            "SELECT l.id, l.name, l.description, t.name, o.name, p.name, l.owner_id FROM location l \
             JOIN location_type t ON t.id = l.type_id JOIN university_part o ON o.id = l.owner_id \
             LEFT JOIN location p ON p.id = l.parent_location_id ORDER BY l.id",
        )?;
        let mut rows = stmt.query([])?;
        while let Some(r) = rows.next()? {
            let owner: i64 = r.get(6)?;
            if !visible.contains(&owner) {
                continue;
            }
            let name: String = r.get(1)?;
            out.push(Record {
                kind: EntityKind::Location,
                id: r.get(0)?,
                label: name.clone(),
                owner: Some(owner),
                fields: vec![
                    ("name", name),
                    ("description", text(r.get(2)?)),
                    ("type", r.get(3)?),
                    ("owner", r.get(4)?),
                    ("parent", text(r.get(5)?)),
                ],
            });
        }
    }

    if kinds.contains(&EntityKind::Request) {
        let mut stmt = conn.prepare(
            "SELECT r.id, r.title, r.description, r.comments, r.request_type, r.status, q.username, p.name, a.iufaid, \
             r.part_assigned_id, r.requester_id FROM request r JOIN \"user\" q ON q.id = r.requester_id \
             JOIN university_part p ON p.id = r.part_assigned_id LEFT JOIN asset a ON a.id = r.subject_id \
             ORDER BY r.id",
        )?;
        let mut rows = stmt.query([])?;
        while let Some(r) = rows.next()? {
            let part: i64 = r.get(9)?;
            let requester: i64 = r.get(10)?;
            if !visible.contains(&part) && requester != ctx.user_id {
                continue;
            }
            let title: String = r.get(1)?;
            out.push(Record {
                kind: EntityKind::Request,
                id: r.get(0)?,
                label: title.clone(),
                owner: Some(part),
                fields: vec![
                    ("title", title),
                    ("description", text(r.get(2)?)),
                    ("comments", text(r.get(3)?)),
                    ("requestType", r.get(4)?),
                    ("status", r.get(5)?),
                    ("requester", r.get(6)?),
                    ("partAssigned", r.get(7)?),
                    ("subject", text(r.get(8)?)),
                ],
            });
        }
    }

    if kinds.contains(&EntityKind::User) {
        let mut parts: BTreeMap<i64, BTreeSet<i64>> = BTreeMap::new();
        let mut stmt = conn.prepare(
            "SELECT user_id, university_part_id FROM user_staff_membership_parts \
             UNION SELECT user_id, university_part_id FROM user_managed_parts",
        )?;
        let mut rows = stmt.query([])?;
        while let Some(r) = rows.next()? {
            parts.entry(r.get(0)?).or_default().insert(r.get(1)?);
        }
        let mut stmt = conn.prepare("SELECT id, username, name FROM \"user\" ORDER BY id")?;
        let mut rows = stmt.query([])?;
        while let Some(r) = rows.next()? {
            let id: i64 = r.get(0)?;
            let linked = parts.get(&id);
            let in_scope = linked.is_some_and(|ps| ps.iter().any(|p| visible.contains(p)));
            if id != ctx.user_id && !in_scope {
                continue;
            }
            let username: String = r.get(1)?;
            out.push(Record {
                kind: EntityKind::User,
                id,
                label: username.clone(),
                owner: linked.and_then(|ps| ps.iter().next().copied()),
                fields: vec![("username", username), ("name", r.get(2)?)],
            });
        }
    }
    Ok(out)
}

fn resolve_field(kind: EntityKind, name: &str) -> Result<&'static str> {
    kind.fields()
        .iter()
        .copied()
        .find(|f| f.eq_ignore_ascii_case(name.trim()))
        .ok_or_else(|| {
            Error::validation(format!(
                "{name:?} is not a searchable {} field (expected one of {})",
                kind.as_str().to_lowercase(),
                kind.fields().join(", ")
            ))
        })
}

/// Clause values reduced to lowercase search terms; blank values drop out.
fn compile(criteria: &AdvancedCriteria) -> Result<Vec<(&'static str, String, Connective)>> {
    if criteria.clauses.len() > MAX_CLAUSES {
        return Err(Error::validation(format!("at most {MAX_CLAUSES} search clauses are allowed")));
    }
    let mut out = Vec::new();
    for c in &criteria.clauses {
        let field = resolve_field(criteria.entity, &c.field)?;
        let term = truncate_chars(&c.value, MAX_QUERY_CHARS).trim().to_lowercase();
        if !term.is_empty() {
            out.push((field, term, c.connective));
        }
    }
    Ok(out)
}

/// Left to right, no precedence: `a OR b AND c` is `(a OR b) AND c`.
fn evaluate(record: &Record, clauses: &[(&'static str, String, Connective)]) -> bool {
    let mut iter = clauses.iter();
    let Some((field, term, _)) = iter.next() else {
        return true;
    };
    let test = |f: &str, t: &str| record.field(f).is_some_and(|v| contains_ci(v, t));
    let mut acc = test(field, term);
    for (field, term, connective) in iter {
        acc = match connective {
            Connective::And => acc && test(field, term),
            Connective::Or => acc || test(field, term),
        };
    }
    acc
}

impl Uuis {
    /// Keyword search over every visible record, optionally limited to one kind.
    pub fn basic_search(
        &self,
        actor: &Actor,
        query: &SearchQuery,
        kind: Option<EntityKind>,
        page: PageRequest,
    ) -> Result<SearchResults> {
        self.store().read(|tx| {
            let tree = PartTree::load(tx)?;
            let ctx = AccessContext::load_with_tree(tx, &tree, actor.user_id)?;
            if query.is_empty() {
                return Ok(SearchResults::from_page(page.slice(Vec::new())));
            }
            let kinds: Vec<EntityKind> = match kind {
                Some(k) => vec![k],
                None => EntityKind::ALL.to_vec(),
            };
            let records = visible_records(tx, &ctx, &tree, &kinds)?;
            let term = query.term();
            let hits: Vec<SearchHit> = records
                .iter()
                .filter(|r| query.match_all || r.fields.iter().any(|(_, v)| contains_ci(v, &term)))
                .map(Record::hit)
                .collect();
            Ok(SearchResults::from_page(page.slice(hits)))
        })
    }

    pub fn advanced_search(&self, actor: &Actor, criteria: &AdvancedCriteria, page: PageRequest) -> Result<SearchResults> {
        let clauses = compile(criteria)?;
        self.store().read(|tx| {
            let tree = PartTree::load(tx)?;
            let ctx = AccessContext::load_with_tree(tx, &tree, actor.user_id)?;
            if !ctx.has(Permission::SearchAdvanced) {
                return Err(Error::forbidden(format!(
                    "{} lacks permission {}",
                    ctx.username,
                    Permission::SearchAdvanced
                )));
            }
            let records = visible_records(tx, &ctx, &tree, &[criteria.entity])?;
            let hits: Vec<SearchHit> = records
                .iter()
                .filter(|r| evaluate(r, &clauses))
                .map(Record::hit)
                .collect();
            Ok(SearchResults::from_page(page.slice(hits)))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(fields: &[(&'static str, &str)]) -> Record {
        Record {
            kind: EntityKind::Asset,
            id: 1,
            label: String::new(),
            owner: None,
            fields: fields.iter().map(|(f, v)| (*f, v.to_string())).collect(),
        }
    }

    #[test]
    fn normalization() {
        let q = normalize_query(&"a".repeat(1024));
        assert_eq!(q.normalized.chars().count(), 1023);
        assert!(normalize_query("   ").match_all);
        let empty = normalize_query("");
        assert!(empty.is_empty() && !empty.match_all);
        assert!(!normalize_query(" x ").match_all);
    }

    #[test]
    fn left_to_right_without_precedence() {
        let r = record(&[("name", "xyz"), ("details", "abc")]);
        let c = |f: &'static str, t: &str, k| (f, t.to_string(), k);
        // Left to right: (T OR F) AND F is false. AND-first would give T OR (F AND F), true.
        let clauses = vec![
            c("name", "xy", Connective::And),
            c("details", "zz", Connective::Or),
            c("name", "q", Connective::And),
        ];
        assert!(!evaluate(&r, &clauses));
        let clauses = vec![
            c("name", "nope", Connective::And),
            c("name", "xy", Connective::Or),
            c("details", "ab", Connective::And),
        ];
        assert!(evaluate(&r, &clauses));
        assert!(evaluate(&r, &[]));
    }

    #[test]
    fn unknown_field_is_rejected() {
        let criteria = AdvancedCriteria {
            entity: EntityKind::User,
            clauses: vec![Clause {
                field: "colour".into(),
                value: "red".into(),
                connective: Connective::And,
            }],
        };
        assert!(matches!(compile(&criteria), Err(Error::Validation(_))));
    }
}
