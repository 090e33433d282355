//! Request lifecycle.
//!
//! ```text
//! WAITING_APPROVAL --approve--> WAITING_EXECUTION --execute-----> EXECUTED
//!        |                              |
//!        +--reject--> REJECTED          +--notExecute--> NOT_EXECUTED
//! ```
//!
//! `assign` moves a request to another university part without touching its
//! status and is only allowed while the request is not terminal.

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use rusqlite::{params, Connection, OptionalExtension};
use serde::{Deserialize, Serialize};

use crate::audit::{record_change, AuditEvent, ChangeSet, Diff};
use crate::error::{Error, Result};
use crate::inventory::part_name;
use crate::security::{AccessContext, PartTree, Permission};
use crate::service::{Actor, Uuis};
use crate::storage::timestamp_column;
use crate::storage::format_timestamp;
use crate::text;

pub const NO_REQUESTS_MESSAGE: &str = "No requests available";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RequestStatus {
    WaitingApproval,
    WaitingExecution,
    Executed,
    Rejected,
    NotExecuted,
}

impl RequestStatus {
    pub const ALL: [RequestStatus; 5] = [
        RequestStatus::WaitingApproval,
        RequestStatus::WaitingExecution,
        RequestStatus::Executed,
        RequestStatus::Rejected,
        RequestStatus::NotExecuted,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RequestStatus::WaitingApproval => "WAITING_APPROVAL",
            RequestStatus::WaitingExecution => "WAITING_EXECUTION",
            RequestStatus::Executed => "EXECUTED",
            RequestStatus::Rejected => "REJECTED",
            RequestStatus::NotExecuted => "NOT_EXECUTED",
        }
    }

    pub fn is_terminal(self) -> bool {
        matches!(
            self,
            RequestStatus::Executed | RequestStatus::Rejected | RequestStatus::NotExecuted
        )
    }

    /// Two-letter code used by the request report.
    pub fn code(self) -> &'static str {
        match self {
            RequestStatus::WaitingApproval => "WA",
            RequestStatus::WaitingExecution => "WX",
            RequestStatus::Executed => "EX",
            RequestStatus::Rejected => "RJ",
            RequestStatus::NotExecuted => "NE",
        }
    }
}

impl fmt::Display for RequestStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Accepts the full name or the two-letter report code.
impl FromStr for RequestStatus {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        RequestStatus::ALL
            .into_iter()
            .find(|st| st.as_str().eq_ignore_ascii_case(s) || st.code().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::validation(format!("unknown request status {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum RequestAction {
    Approve,
    Reject,
    Execute,
    NotExecute,
    Assign,
}

impl RequestAction {
    pub const ALL: [RequestAction; 5] = [
        RequestAction::Approve,
        RequestAction::Reject,
        RequestAction::Execute,
        RequestAction::NotExecute,
        RequestAction::Assign,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RequestAction::Approve => "approve",
            RequestAction::Reject => "reject",
            RequestAction::Execute => "execute",
            RequestAction::NotExecute => "notExecute",
            RequestAction::Assign => "assign",
        }
    }

    pub fn permission(self) -> Permission {
        match self {
            RequestAction::Approve | RequestAction::Reject | RequestAction::Assign => Permission::RequestApprove,
            RequestAction::Execute | RequestAction::NotExecute => Permission::RequestExecute,
        }
    }
}

/// Target status of a status-changing action, `None` when the pair is not a transition.
pub fn status_transition(from: RequestStatus, action: RequestAction) -> Option<RequestStatus> {
    use RequestAction::*;
    use RequestStatus::*;
    match (from, action) {
        (WaitingApproval, Approve) => Some(WaitingExecution),
        (WaitingApproval, Reject) => Some(Rejected),
        (WaitingExecution, Execute) => Some(Executed),
        (WaitingExecution, NotExecute) => Some(NotExecuted),
        _ => None,
    }
}

/// Whether `action` may be applied to a request in status `from`.
pub fn permits(from: RequestStatus, action: RequestAction) -> bool {
    match action {
        RequestAction::Assign => !from.is_terminal(),
        _ => status_transition(from, action).is_some(),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RequestType {
    Transfer,
    Repair,
    Acquisition,
    #[default]
    Other,
}

impl RequestType {
    pub const ALL: [RequestType; 4] = [
        RequestType::Transfer,
        RequestType::Repair,
        RequestType::Acquisition,
        RequestType::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RequestType::Transfer => "TRANSFER",
            RequestType::Repair => "REPAIR",
            RequestType::Acquisition => "ACQUISITION",
            RequestType::Other => "OTHER",
        }
    }
}

impl FromStr for RequestType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RequestType::ALL
            .into_iter()
            .find(|t| t.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::validation(format!("unknown request type {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Request {
    pub id: i64,
    pub version: i64,
    pub title: String,
    pub description: Option<String>,
    pub comments: Option<String>,
    pub request_type: RequestType,
    pub status: RequestStatus,
    pub requester_id: i64,
    pub requester: String,
    pub part_assigned_id: i64,
    pub part_assigned: String,
    pub user_assigned_id: Option<i64>,
    pub user_assigned: Option<String>,
    pub subject_id: Option<i64>,
    pub subject_iufaid: Option<String>,
    pub submission_date: DateTime<Utc>,
}

/// Basic requests carry only comments; advanced ones pick a type and a subject asset.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct NewRequest {
    pub title: Option<String>,
    pub description: Option<String>,
    pub comments: Option<String>,
    pub request_type: Option<RequestType>,
    pub subject_id: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RequestBuckets {
    pub waiting_approval: Vec<Request>,
    pub waiting_execution: Vec<Request>,
    pub mine: Vec<Request>,
}

const REQUEST_SELECT: &str = "SELECT r.id, r.version, r.title, r.description, r.comments, r.request_type, r.status, \
     r.requester_id, q.username, r.part_assigned_id, p.name, r.user_assigned_id, ua.username, r.subject_id, a.iufaid, \
     r.submission_date FROM request r JOIN \"user\" q ON q.id = r.requester_id \
     JOIN university_part p ON p.id = r.part_assigned_id LEFT JOIN \"user\" ua ON ua.id = r.user_assigned_id \
     LEFT JOIN asset a ON a.id = r.subject_id";

fn request_from_row(r: &rusqlite::Row<'_>) -> rusqlite::Result<Request> {
    let kind: String = r.get(5)?;
    let status: String = r.get(6)?;
    let bad = |idx: usize, v: &str| {
        rusqlite::Error::FromSqlConversionFailure(
            idx,
            rusqlite::types::Type::Text,
            format!("unexpected value {v:?}").into(),
        )
    };
    Ok(Request {
        id: r.get(0)?,
        version: r.get(1)?,
        title: r.get(2)?,
        description: r.get(3)?,
        comments: r.get(4)?,
        request_type: kind.parse().map_err(|_| bad(5, &kind))?,
        status: status.parse().map_err(|_| bad(6, &status))?,
        requester_id: r.get(7)?,
        requester: r.get(8)?,
        part_assigned_id: r.get(9)?,
        part_assigned: r.get(10)?,
        user_assigned_id: r.get(11)?,
        user_assigned: r.get(12)?,
        subject_id: r.get(13)?,
        subject_iufaid: r.get(14)?,
        submission_date: timestamp_column(r, 15)?,
    })
}

pub(crate) fn load_request(conn: &Connection, id: i64) -> Result<Request> {
    conn.query_row(&format!("{REQUEST_SELECT} WHERE r.id = ?1"), params![id], request_from_row)
        .optional()?
        .ok_or_else(|| Error::not_found("request", id))
}

pub(crate) fn all_requests(conn: &Connection) -> Result<Vec<Request>> {
    let mut stmt = conn.prepare(&format!("{REQUEST_SELECT} ORDER BY r.id"))?;
    let rows = stmt.query_map([], request_from_row)?.collect::<rusqlite::Result<_>>()?;
    Ok(rows)
}

/// Part a new request is routed to: the subject's owner, else the
/// requester's own member part, else a part they head, else the root.
fn route(conn: &Connection, tree: &PartTree, ctx: &AccessContext, subject_owner: Option<i64>) -> Result<i64> {
    subject_owner
        .or_else(|| ctx.grants.member_parts.iter().next().copied())
        .or_else(|| ctx.grants.managed_parts.iter().next().copied())
        .or_else(|| tree.first_root())
        .ok_or_else(|| Error::validation("no university part exists to receive the request"))
        .and_then(|p| part_name(conn, p).map(|_| p))
}

impl Uuis {
    pub fn request_create(&self, actor: &Actor, new: NewRequest) -> Result<Request> {
        let description = text::optional("description", new.description.as_deref())?;
        let comments = text::optional("comments", new.comments.as_deref())?;
        let title = match text::optional("title", new.title.as_deref())? {
            Some(t) => t,
            None => description
                .as_deref()
                .or(comments.as_deref())
                .map(|t| text::truncate_chars(t, text::MAX_TEXT).to_string())
                .ok_or_else(|| Error::validation("a request needs a title, description or comments"))?,
        };
        let request_type = new.request_type.unwrap_or_default();
        if request_type != RequestType::Other && new.subject_id.is_none() {
            return Err(Error::validation(format!(
                "a {} request must name a subject asset",
                request_type.as_str()
            )));
        }
        self.store().write(|tx| {
            let tree = PartTree::load(tx)?;
            let ctx = AccessContext::load_with_tree(tx, &tree, actor.user_id)?;
            let subject_owner = match new.subject_id {
                Some(sid) => Some(
                    tx.query_row("SELECT owner_id FROM asset WHERE id = ?1", params![sid], |r| r.get::<_, i64>(0))
                        .optional()?
                        .ok_or_else(|| Error::validation(format!("subject asset {sid} does not exist")))?,
                ),
                None => None,
            };
            let part = route(tx, &tree, &ctx, subject_owner)?;
            tx.execute(
                "INSERT INTO request (version, requester_id, status, part_assigned_id, subject_id, request_type, \
                 submission_date, title, description, comments) VALUES (0, ?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8, ?9)",
                params![
                    actor.user_id,
                    RequestStatus::WaitingApproval.as_str(),
                    part,
                    new.subject_id,
                    request_type.as_str(),
                    format_timestamp(tx.now()),
                    title,
                    description,
                    comments
                ],
            )?;
            let id = tx.last_insert_rowid();
            record_change(tx, &ChangeSet::new(actor, AuditEvent::Insert, "Request", id, 0))?;
            load_request(tx, id)
        })
    }

    pub fn request_show(&self, actor: &Actor, id: i64) -> Result<Request> {
        self.store().read(|tx| {
            let ctx = AccessContext::load(tx, actor.user_id)?;
            let req = load_request(tx, id)?;
            if req.requester_id != actor.user_id && !ctx.covers(req.part_assigned_id) {
                return Err(Error::forbidden(format!(
                    "request {id} is outside the scope of {}",
                    ctx.username
                )));
            }
            Ok(req)
        })
    }

    /// The three dashboard lists, each ordered by id.
    pub fn request_list(&self, actor: &Actor) -> Result<RequestBuckets> {
        self.store().read(|tx| {
            let tree = PartTree::load(tx)?;
            let ctx = AccessContext::load_with_tree(tx, &tree, actor.user_id)?;
            let visible = ctx.visible_parts(&tree);
            let all = all_requests(tx)?;
            let in_scope = |r: &&Request, st: RequestStatus| r.status == st && visible.contains(&r.part_assigned_id);
            Ok(RequestBuckets {
                waiting_approval: all
                    .iter()
                    .filter(|r| in_scope(r, RequestStatus::WaitingApproval))
                    .cloned()
                    .collect(),
                waiting_execution: all
                    .iter()
                    .filter(|r| in_scope(r, RequestStatus::WaitingExecution))
                    .cloned()
                    .collect(),
                mine: all.iter().filter(|r| r.requester_id == actor.user_id).cloned().collect(),
            })
        })
    }

    pub fn approve(&self, actor: &Actor, id: i64) -> Result<Request> {
        self.transition(actor, id, RequestAction::Approve)
    }

    pub fn reject(&self, actor: &Actor, id: i64) -> Result<Request> {
        self.transition(actor, id, RequestAction::Reject)
    }

    pub fn execute(&self, actor: &Actor, id: i64) -> Result<Request> {
        self.transition(actor, id, RequestAction::Execute)
    }

    pub fn not_execute(&self, actor: &Actor, id: i64) -> Result<Request> {
        self.transition(actor, id, RequestAction::NotExecute)
    }

    /// Applies a status-changing action as a compare-and-set on the status column.
    pub fn transition(&self, actor: &Actor, id: i64, action: RequestAction) -> Result<Request> {
        self.store().write(|tx| {
            let ctx = AccessContext::load(tx, actor.user_id)?;
            let req = load_request(tx, id)?;
            ctx.require(action.permission(), req.part_assigned_id)?;
            let illegal = Error::IllegalTransition {
                action: action.as_str(),
                status: req.status.as_str(),
            };
            let Some(next) = status_transition(req.status, action) else {
                return Err(illegal);
            };
            let changed = tx.execute(
                "UPDATE request SET status = ?2, version = version + 1 WHERE id = ?1 AND status = ?3",
                params![id, next.as_str(), req.status.as_str()],
            )?;
            if changed == 0 {
                return Err(illegal);
            }
            let mut diff = Diff::new();
            diff.text("status", req.status.as_str(), next.as_str());
            record_change(
                tx,
                &ChangeSet::new(actor, AuditEvent::Update, "Request", id, req.version + 1)
                    .with_changes(diff.into_changes()),
            )?;
            load_request(tx, id)
        })
    }

    /// Routes a pending request to another part.
    pub fn assign(&self, actor: &Actor, id: i64, new_part: i64) -> Result<Request> {
        self.store().write(|tx| {
            let ctx = AccessContext::load(tx, actor.user_id)?;
            let req = load_request(tx, id)?;
            ctx.require(RequestAction::Assign.permission(), req.part_assigned_id)?;
            if !permits(req.status, RequestAction::Assign) {
                return Err(Error::IllegalTransition {
                    action: RequestAction::Assign.as_str(),
                    status: req.status.as_str(),
                });
            }
            let target = part_name(tx, new_part)?;
            if new_part == req.part_assigned_id {
                return Ok(req);
            }
            let version = req.version + 1;
            tx.execute(
                "UPDATE request SET part_assigned_id = ?2, version = ?3 WHERE id = ?1 AND version = ?4",
                params![id, new_part, version, req.version],
            )?;
            let mut diff = Diff::new();
            diff.text("partAssigned", &req.part_assigned, &target);
            record_change(
                tx,
                &ChangeSet::new(actor, AuditEvent::Update, "Request", id, version).with_changes(diff.into_changes()),
            )?;
            load_request(tx, id)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn status_names_and_codes_parse() {
        for st in RequestStatus::ALL {
            assert_eq!(st.as_str().parse::<RequestStatus>().unwrap(), st);
            assert_eq!(st.code().parse::<RequestStatus>().unwrap(), st);
        }
        assert!("DONE".parse::<RequestStatus>().is_err());
    }

    #[test]
    fn assign_only_before_terminal() {
        assert!(permits(RequestStatus::WaitingApproval, RequestAction::Assign));
        assert!(permits(RequestStatus::WaitingExecution, RequestAction::Assign));
        assert!(!permits(RequestStatus::Executed, RequestAction::Assign));
        assert_eq!(status_transition(RequestStatus::WaitingApproval, RequestAction::Assign), None);
    }
}
