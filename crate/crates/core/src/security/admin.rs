use std::collections::BTreeSet;

use rusqlite::{params, Connection, OptionalExtension};
use serde::{Deserialize, Serialize};

use super::access::{load_grants, part_from_row, permission_set, role_permission_union};
use super::{
    join_permissions, AccessContext, Level, PartTree, PartType, Permission, Role, Session, UniversityPart, User,
    UserGrants,
};
use crate::audit::{record_change, AuditEvent, ChangeSet, Diff};
use crate::error::{Error, Result};
use crate::paging::{Page, PageRequest};
use crate::service::{Actor, Uuis};
use crate::storage::WriteTx;
use crate::text;
use crate::{check_version, NamedRef};

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct NewUser {
    pub username: String,
    pub name: String,
    pub password: String,
    #[serde(default)]
    pub roles: BTreeSet<i64>,
    #[serde(default)]
    pub permissions: BTreeSet<Permission>,
    #[serde(default)]
    pub member_parts: BTreeSet<i64>,
    #[serde(default)]
    pub managed_parts: BTreeSet<i64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct UserChanges {
    pub version: Option<i64>,
    pub name: Option<String>,
    pub password: Option<String>,
    pub roles: Option<BTreeSet<i64>>,
    pub permissions: Option<BTreeSet<Permission>>,
    pub member_parts: Option<BTreeSet<i64>>,
    pub managed_parts: Option<BTreeSet<i64>>,
}

/// A user with grants resolved to names, as shown on the user pages.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct UserDetail {
    #[serde(flatten)]
    pub user: User,
    pub level: Level,
    pub roles: Vec<NamedRef>,
    pub permissions: BTreeSet<Permission>,
    pub effective_permissions: BTreeSet<Permission>,
    pub managed_parts: Vec<NamedRef>,
    pub member_parts: Vec<NamedRef>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct NewRole {
    pub name: String,
    #[serde(default)]
    pub permissions: BTreeSet<Permission>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct RoleChanges {
    pub version: Option<i64>,
    pub name: Option<String>,
    pub permissions: Option<BTreeSet<Permission>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct NewPart {
    pub name: String,
    pub parent_id: Option<i64>,
    #[serde(rename = "type")]
    pub part_type: PartType,
    /// Users who will head the new part.
    #[serde(default)]
    pub heads: BTreeSet<i64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct PartChanges {
    pub version: Option<i64>,
    pub name: Option<String>,
    #[serde(deserialize_with = "crate::serde_util::double_option")]
    pub parent_id: Option<Option<i64>>,
    #[serde(rename = "type")]
    pub part_type: Option<PartType>,
    pub heads: Option<BTreeSet<i64>>,
}

const REDACTED: &str = "********";

pub(crate) fn load_user(conn: &Connection, id: i64) -> Result<User> {
    conn.query_row(
        "SELECT id, version, username, name, password_hash FROM \"user\" WHERE id = ?1",
        params![id],
        user_from_row,
    )
    .optional()?
    .ok_or_else(|| Error::not_found("user", id))
}

fn user_from_row(r: &rusqlite::Row<'_>) -> rusqlite::Result<User> {
    Ok(User {
        id: r.get(0)?,
        version: r.get(1)?,
        username: r.get(2)?,
        name: r.get(3)?,
        password_hash: r.get(4)?,
    })
}

pub(crate) fn username_of(conn: &Connection, id: i64) -> Result<String> {
    conn.query_row("SELECT username FROM \"user\" WHERE id = ?1", params![id], |r| r.get(0))
        .optional()?
        .ok_or_else(|| Error::not_found("user", id))
}

fn load_role(conn: &Connection, id: i64) -> Result<Role> {
    let (version, name): (i64, String) = conn
        .query_row("SELECT version, name FROM role WHERE id = ?1", params![id], |r| {
            Ok((r.get(0)?, r.get(1)?))
        })
        .optional()?
        .ok_or_else(|| Error::not_found("role", id))?;
    Ok(Role {
        id,
        version,
        name,
        permissions: permission_set(
            conn,
            "SELECT permissions_string FROM role_permissions WHERE role_id = ?1",
            id,
        )?,
    })
}

fn role_refs(conn: &Connection, ids: &BTreeSet<i64>) -> Result<Vec<NamedRef>> {
    ids.iter()
        .map(|id| {
            load_role(conn, *id).map(|r| NamedRef {
                id: r.id,
                name: r.name,
            })
        })
        .collect()
}

fn part_refs(tree: &PartTree, ids: &BTreeSet<i64>) -> Vec<NamedRef> {
    ids.iter()
        .filter_map(|id| {
            tree.get(*id).map(|p| NamedRef {
                id: p.id,
                name: p.name.clone(),
            })
        })
        .collect()
}

fn user_detail(conn: &Connection, tree: &PartTree, user: User) -> Result<UserDetail> {
    let grants = load_grants(conn, user.id)?;
    let mut effective = role_permission_union(conn, &grants.roles)?;
    effective.extend(grants.direct_permissions.iter().copied());
    Ok(UserDetail {
        level: super::compute_level(tree, &grants.managed_parts),
        roles: role_refs(conn, &grants.roles)?,
        permissions: grants.direct_permissions.clone(),
        effective_permissions: effective,
        managed_parts: part_refs(tree, &grants.managed_parts),
        member_parts: part_refs(tree, &grants.member_parts),
        user,
    })
}

fn names(refs: &[NamedRef]) -> String {
    refs.iter().map(|r| r.name.as_str()).collect::<Vec<_>>().join(",")
}

fn require_parts_exist(tree: &PartTree, ids: &BTreeSet<i64>) -> Result<()> {
    match ids.iter().find(|id| !tree.contains(**id)) {
        Some(id) => Err(Error::validation(format!("university part {id} does not exist"))),
        None => Ok(()),
    }
}

fn require_roles_exist(conn: &Connection, ids: &BTreeSet<i64>) -> Result<()> {
    for id in ids {
        let found: Option<i64> = conn
            .query_row("SELECT id FROM role WHERE id = ?1", params![id], |r| r.get(0))
            .optional()?;
        if found.is_none() {
            return Err(Error::validation(format!("role {id} does not exist")));
        }
    }
    Ok(())
}

fn require_users_exist(conn: &Connection, ids: &BTreeSet<i64>) -> Result<()> {
    for id in ids {
        if username_of(conn, *id).is_err() {
            return Err(Error::validation(format!("user {id} does not exist")));
        }
    }
    Ok(())
}

fn replace_ids(tx: &WriteTx<'_>, table: &str, column: &str, user_id: i64, ids: &BTreeSet<i64>) -> Result<()> {
    tx.execute(&format!("DELETE FROM {table} WHERE user_id = ?1"), params![user_id])?;
    for id in ids {
        tx.execute(
            &format!("INSERT INTO {table} ({column}, user_id) VALUES (?1, ?2)"),
            params![id, user_id],
        )?;
    }
    Ok(())
}

fn replace_permissions(tx: &WriteTx<'_>, table: &str, owner_col: &str, owner: i64, perms: &BTreeSet<Permission>) -> Result<()> {
    tx.execute(&format!("DELETE FROM {table} WHERE {owner_col} = ?1"), params![owner])?;
    for p in perms {
        tx.execute(
            &format!("INSERT INTO {table} ({owner_col}, permissions_string) VALUES (?1, ?2)"),
            params![owner, p.as_str()],
        )?;
    }
    Ok(())
}

fn heads_of(conn: &Connection, part_id: i64) -> Result<BTreeSet<i64>> {
    let mut stmt = conn.prepare("SELECT user_id FROM user_managed_parts WHERE university_part_id = ?1")?;
    let ids = stmt
        .query_map(params![part_id], |r| r.get(0))?
        .collect::<rusqlite::Result<BTreeSet<i64>>>()?;
    Ok(ids)
}

fn usernames(conn: &Connection, ids: &BTreeSet<i64>) -> Result<String> {
    let names = ids.iter().map(|id| username_of(conn, *id)).collect::<Result<Vec<_>>>()?;
    Ok(names.join(","))
}

impl Uuis {
    /// Checks credentials and opens a session.
    ///
    /// Unknown usernames and wrong passwords fail identically, and failures
    /// leave no state behind, so repeated attempts cannot degrade anything.
    pub fn authenticate(&self, username: &str, password: &str) -> Result<Session> {
        let stored = self.store().read(|tx| {
            Ok::<_, Error>(
                tx.query_row(
                    "SELECT id, password_hash FROM \"user\" WHERE username = ?1",
                    params![username],
                    |r| Ok((r.get::<_, i64>(0)?, r.get::<_, String>(1)?)),
                )
                .optional()?,
            )
        })?;
        match stored {
            Some((user_id, hash)) if self.passwords().verify(password, &hash) => Ok(self.sessions().create(user_id)),
            Some(_) => Err(Error::InvalidCredentials),
            None => {
                self.passwords().verify_dummy(password);
                Err(Error::InvalidCredentials)
            }
        }
    }

    /// Invalidates a token. Unknown tokens are accepted silently.
    pub fn logout(&self, token: &str) {
        self.sessions().revoke(token);
    }

    pub fn level_of(&self, user_id: i64) -> Result<Level> {
        self.store().read(|tx| {
            let tree = PartTree::load(tx)?;
            let grants = load_grants(tx, user_id)?;
            Ok(super::compute_level(&tree, &grants.managed_parts))
        })
    }

    pub fn scope_of(&self, user_id: i64) -> Result<BTreeSet<i64>> {
        self.store().read(|tx| {
            let tree = PartTree::load(tx)?;
            let grants = load_grants(tx, user_id)?;
            Ok(super::resolve_scope(&tree, &grants.managed_parts))
        })
    }

    pub fn grants_of(&self, user_id: i64) -> Result<UserGrants> {
        self.store().read(|tx| {
            load_user(tx, user_id)?;
            load_grants(tx, user_id)
        })
    }

    pub fn check_permission(&self, user_id: i64, action: Permission, target_part: i64) -> Result<bool> {
        self.store().read(|tx| {
            let tree = PartTree::load(tx)?;
            let grants = load_grants(tx, user_id)?;
            let roles = role_permission_union(tx, &grants.roles)?;
            Ok(super::check_permission(&tree, &grants, &roles, action, target_part))
        })
    }

    /// The calling user's own profile, available at every level.
    pub fn me(&self, actor: &Actor) -> Result<UserDetail> {
        self.store().read(|tx| {
            let tree = PartTree::load(tx)?;
            let user = load_user(tx, actor.user_id).map_err(|_| Error::Unauthenticated)?;
            user_detail(tx, &tree, user)
        })
    }

    pub fn user_create(&self, actor: &Actor, new: NewUser) -> Result<UserDetail> {
        let username = text::required("username", &new.username)?;
        let name = text::required("name", &new.name)?;
        if new.password.is_empty() {
            return Err(Error::validation("password must not be empty"));
        }
        let hash = self.passwords().hash(&new.password);
        self.store().write(|tx| {
            let tree = PartTree::load(tx)?;
            let ctx = AccessContext::load_with_tree(tx, &tree, actor.user_id)?;
            ctx.require_institution(Permission::UserAdmin)?;
            let taken: Option<i64> = tx
                .query_row("SELECT id FROM \"user\" WHERE username = ?1", params![username], |r| r.get(0))
                .optional()?;
            if taken.is_some() {
                return Err(Error::Duplicate(format!("username {username:?}")));
            }
            require_roles_exist(tx, &new.roles)?;
            require_parts_exist(&tree, &new.member_parts)?;
            require_parts_exist(&tree, &new.managed_parts)?;

            tx.execute(
                "INSERT INTO \"user\" (version, username, name, password_hash) VALUES (0, ?1, ?2, ?3)",
                params![username, name, hash],
            )?;
            let id = tx.last_insert_rowid();
            replace_ids(tx, "user_roles", "role_id", id, &new.roles)?;
            replace_permissions(tx, "user_permissions", "user_id", id, &new.permissions)?;
            replace_ids(tx, "user_staff_membership_parts", "university_part_id", id, &new.member_parts)?;
            replace_ids(tx, "user_managed_parts", "university_part_id", id, &new.managed_parts)?;
            record_change(tx, &ChangeSet::new(actor, AuditEvent::Insert, "User", id, 0))?;
            user_detail(tx, &tree, load_user(tx, id)?)
        })
    }

    pub fn user_update(&self, actor: &Actor, id: i64, changes: UserChanges) -> Result<UserDetail> {
        let new_hash = match changes.password.as_deref() {
            Some("") => return Err(Error::validation("password must not be empty")),
            Some(pw) => Some(self.passwords().hash(pw)),
            None => None,
        };
        self.store().write(|tx| {
            let tree = PartTree::load(tx)?;
            let ctx = AccessContext::load_with_tree(tx, &tree, actor.user_id)?;
            ctx.require_institution(Permission::UserAdmin)?;
            let user = load_user(tx, id)?;
            check_version("user", id, changes.version, user.version)?;
            let before = user_detail(tx, &tree, user.clone())?;

            let name = match &changes.name {
                Some(n) => text::required("name", n)?,
                None => user.name.clone(),
            };
            if let Some(roles) = &changes.roles {
                require_roles_exist(tx, roles)?;
                replace_ids(tx, "user_roles", "role_id", id, roles)?;
            }
            if let Some(perms) = &changes.permissions {
                replace_permissions(tx, "user_permissions", "user_id", id, perms)?;
            }
            if let Some(parts) = &changes.member_parts {
                require_parts_exist(&tree, parts)?;
                replace_ids(tx, "user_staff_membership_parts", "university_part_id", id, parts)?;
            }
            if let Some(parts) = &changes.managed_parts {
                require_parts_exist(&tree, parts)?;
                replace_ids(tx, "user_managed_parts", "university_part_id", id, parts)?;
            }
            let after_grants = user_detail(tx, &tree, user.clone())?;

            let mut diff = Diff::new();
            diff.text("name", &user.name, &name);
            if new_hash.is_some() {
                // The hash itself never enters the trail.
                diff.field("passwordHash", Some(REDACTED.into()), Some(format!("{REDACTED} (changed)")));
            }
            diff.text("roles", &names(&before.roles), &names(&after_grants.roles));
            diff.text(
                "permissions",
                &join_permissions(&before.permissions),
                &join_permissions(&after_grants.permissions),
            );
            diff.text("memberParts", &names(&before.member_parts), &names(&after_grants.member_parts));
            diff.text("managedParts", &names(&before.managed_parts), &names(&after_grants.managed_parts));
            if diff.is_empty() {
                return Ok(before);
            }
            let version = user.version + 1;
            tx.execute(
                "UPDATE \"user\" SET version = ?2, name = ?3, password_hash = ?4 WHERE id = ?1 AND version = ?5",
                params![id, version, name, new_hash.as_deref().unwrap_or(&user.password_hash), user.version],
            )?;
            record_change(
                tx,
                &ChangeSet::new(actor, AuditEvent::Update, "User", id, version).with_changes(diff.into_changes()),
            )?;
            user_detail(tx, &tree, load_user(tx, id)?)
        })
    }

    /// Refused while the user heads a part or is referenced by requests, assets or locations.
    pub fn user_delete(&self, actor: &Actor, id: i64) -> Result<()> {
        self.store().write(|tx| {
            let ctx = AccessContext::load(tx, actor.user_id)?;
            ctx.require_institution(Permission::UserAdmin)?;
            let user = load_user(tx, id)?;
            let guards = [
                ("SELECT COUNT(*) FROM user_managed_parts WHERE user_id = ?1", "user heads a university part"),
                (
                    "SELECT COUNT(*) FROM request WHERE requester_id = ?1 OR user_assigned_id = ?1",
                    "user is referenced by requests",
                ),
                ("SELECT COUNT(*) FROM asset WHERE assignee_id = ?1", "user is assigned assets"),
                ("SELECT COUNT(*) FROM location WHERE assignee_id = ?1", "user is assigned locations"),
            ];
            for (sql, reason) in guards {
                let n: i64 = tx.query_row(sql, params![id], |r| r.get(0))?;
                if n > 0 {
                    return Err(Error::GuardedDelete {
                        kind: "user",
                        id,
                        reason: reason.into(),
                    });
                }
            }
            for table in ["user_roles", "user_permissions", "user_staff_membership_parts"] {
                tx.execute(&format!("DELETE FROM {table} WHERE user_id = ?1"), params![id])?;
            }
            tx.execute("DELETE FROM \"user\" WHERE id = ?1", params![id])?;
            record_change(tx, &ChangeSet::new(actor, AuditEvent::Delete, "User", id, user.version))?;
            Ok(())
        })?;
        self.sessions().revoke_user(id);
        Ok(())
    }

    /// Any administrator (level 1 and up) may browse users.
    pub fn user_list(&self, actor: &Actor, page: PageRequest) -> Result<Page<User>> {
        self.store().read(|tx| {
            require_admin(tx, actor)?;
            let mut stmt =
                tx.prepare("SELECT id, version, username, name, password_hash FROM \"user\" ORDER BY id")?;
            let all = stmt.query_map([], user_from_row)?.collect::<rusqlite::Result<Vec<_>>>()?;
            Ok(page.slice(all))
        })
    }

    pub fn user_show(&self, actor: &Actor, id: i64) -> Result<UserDetail> {
        self.store().read(|tx| {
            let tree = PartTree::load(tx)?;
            if actor.user_id != id {
                require_admin(tx, actor)?;
            }
            user_detail(tx, &tree, load_user(tx, id)?)
        })
    }

    pub fn role_create(&self, actor: &Actor, new: NewRole) -> Result<Role> {
        let name = text::required("name", &new.name)?;
        self.store().write(|tx| {
            AccessContext::load(tx, actor.user_id)?.require_institution(Permission::UserAdmin)?;
            let taken: Option<i64> = tx
                .query_row("SELECT id FROM role WHERE name = ?1", params![name], |r| r.get(0))
                .optional()?;
            if taken.is_some() {
                return Err(Error::Duplicate(format!("role {name:?}")));
            }
            tx.execute("INSERT INTO role (version, name) VALUES (0, ?1)", params![name])?;
            let id = tx.last_insert_rowid();
            replace_permissions(tx, "role_permissions", "role_id", id, &new.permissions)?;
            record_change(tx, &ChangeSet::new(actor, AuditEvent::Insert, "Role", id, 0))?;
            load_role(tx, id)
        })
    }

    pub fn role_update(&self, actor: &Actor, id: i64, changes: RoleChanges) -> Result<Role> {
        self.store().write(|tx| {
            AccessContext::load(tx, actor.user_id)?.require_institution(Permission::UserAdmin)?;
            let role = load_role(tx, id)?;
            check_version("role", id, changes.version, role.version)?;
            let name = match &changes.name {
                Some(n) => text::required("name", n)?,
                None => role.name.clone(),
            };
            if name != role.name {
                let taken: Option<i64> = tx
                    .query_row("SELECT id FROM role WHERE name = ?1", params![name], |r| r.get(0))
                    .optional()?;
                if taken.is_some() {
                    return Err(Error::Duplicate(format!("role {name:?}")));
                }
            }
            let perms = changes.permissions.clone().unwrap_or_else(|| role.permissions.clone());
            let mut diff = Diff::new();
            diff.text("name", &role.name, &name);
            diff.text("permissions", &join_permissions(&role.permissions), &join_permissions(&perms));
            if diff.is_empty() {
                return Ok(role);
            }
            let version = role.version + 1;
            tx.execute(
                "UPDATE role SET version = ?2, name = ?3 WHERE id = ?1",
                params![id, version, name],
            )?;
            replace_permissions(tx, "role_permissions", "role_id", id, &perms)?;
            record_change(
                tx,
                &ChangeSet::new(actor, AuditEvent::Update, "Role", id, version).with_changes(diff.into_changes()),
            )?;
            load_role(tx, id)
        })
    }

    /// Refused while any user holds the role.
    pub fn role_delete(&self, actor: &Actor, id: i64) -> Result<()> {
        self.store().write(|tx| {
            AccessContext::load(tx, actor.user_id)?.require_institution(Permission::UserAdmin)?;
            let role = load_role(tx, id)?;
            let holders: i64 = tx.query_row("SELECT COUNT(*) FROM user_roles WHERE role_id = ?1", params![id], |r| {
                r.get(0)
            })?;
            if holders > 0 {
                return Err(Error::GuardedDelete {
                    kind: "role",
                    id,
                    reason: format!("granted to {holders} user(s)"),
                });
            }
            tx.execute("DELETE FROM role_permissions WHERE role_id = ?1", params![id])?;
            tx.execute("DELETE FROM role WHERE id = ?1", params![id])?;
            record_change(tx, &ChangeSet::new(actor, AuditEvent::Delete, "Role", id, role.version))?;
            Ok(())
        })
    }

    pub fn role_list(&self, actor: &Actor) -> Result<Vec<Role>> {
        self.store().read(|tx| {
            AccessContext::load(tx, actor.user_id)?.require_institution(Permission::UserAdmin)?;
            let mut stmt = tx.prepare("SELECT id FROM role ORDER BY id")?;
            let ids = stmt.query_map([], |r| r.get::<_, i64>(0))?.collect::<rusqlite::Result<Vec<_>>>()?;
            ids.into_iter().map(|id| load_role(tx, id)).collect()
        })
    }

    pub fn role_show(&self, actor: &Actor, id: i64) -> Result<Role> {
        self.store().read(|tx| {
            AccessContext::load(tx, actor.user_id)?.require_institution(Permission::UserAdmin)?;
            load_role(tx, id)
        })
    }

    /// Users granted `role_id`, by id.
    pub fn role_users(&self, actor: &Actor, role_id: i64) -> Result<Vec<User>> {
        self.store().read(|tx| {
            AccessContext::load(tx, actor.user_id)?.require_institution(Permission::UserAdmin)?;
            load_role(tx, role_id)?;
            let mut stmt = tx.prepare(
                "SELECT u.id, u.version, u.username, u.name, u.password_hash FROM \"user\" u \
                 JOIN user_roles ur ON ur.user_id = u.id WHERE ur.role_id = ?1 ORDER BY u.id",
            )?;
            let users = stmt
                .query_map(params![role_id], user_from_row)?
                .collect::<rusqlite::Result<Vec<_>>>()?;
            Ok(users)
        })
    }

    pub fn part_create(&self, actor: &Actor, new: NewPart) -> Result<UniversityPart> {
        let name = text::required("name", &new.name)?;
        self.store().write(|tx| {
            let tree = PartTree::load(tx)?;
            AccessContext::load_with_tree(tx, &tree, actor.user_id)?.require_institution(Permission::UserAdmin)?;
            if let Some(parent) = new.parent_id {
                if !tree.contains(parent) {
                    return Err(Error::validation(format!("parent university part {parent} does not exist")));
                }
            }
            require_users_exist(tx, &new.heads)?;
            tx.execute(
                "INSERT INTO university_part (version, name, parent_id, type) VALUES (0, ?1, ?2, ?3)",
                params![name, new.parent_id, new.part_type.as_str()],
            )?;
            let id = tx.last_insert_rowid();
            for head in &new.heads {
                tx.execute(
                    "INSERT INTO user_managed_parts (university_part_id, user_id) VALUES (?1, ?2)",
                    params![id, head],
                )?;
            }
            record_change(tx, &ChangeSet::new(actor, AuditEvent::Insert, "UniversityPart", id, 0))?;
            if !new.heads.is_empty() {
                let mut diff = Diff::new();
                diff.field("heads", None, Some(usernames(tx, &new.heads)?));
                record_change(
                    tx,
                    &ChangeSet::new(actor, AuditEvent::Update, "UniversityPart", id, 0)
                        .with_changes(diff.into_changes()),
                )?;
            }
            load_part(tx, id)
        })
    }

    pub fn part_update(&self, actor: &Actor, id: i64, changes: PartChanges) -> Result<UniversityPart> {
        self.store().write(|tx| {
            let tree = PartTree::load(tx)?;
            AccessContext::load_with_tree(tx, &tree, actor.user_id)?.require_institution(Permission::UserAdmin)?;
            let part = tree.get(id).cloned().ok_or_else(|| Error::not_found("university part", id))?;
            check_version("university part", id, changes.version, part.version)?;

            let name = match &changes.name {
                Some(n) => text::required("name", n)?,
                None => part.name.clone(),
            };
            let parent = changes.parent_id.unwrap_or(part.parent_id);
            if let Some(p) = parent {
                if !tree.contains(p) {
                    return Err(Error::validation(format!("parent university part {p} does not exist")));
                }
            }
            if parent != part.parent_id && tree.would_create_cycle(id, parent) {
                return Err(Error::Cycle(format!(
                    "university part {id} cannot be placed under one of its own descendants"
                )));
            }
            let part_type = changes.part_type.unwrap_or(part.part_type);
            let old_heads = heads_of(tx, id)?;
            let new_heads = changes.heads.clone().unwrap_or_else(|| old_heads.clone());
            require_users_exist(tx, &new_heads)?;

            let parent_name = |p: Option<i64>| p.and_then(|p| tree.name(p)).map(str::to_string);
            let mut diff = Diff::new();
            diff.text("name", &part.name, &name);
            diff.field("parent", parent_name(part.parent_id), parent_name(parent));
            diff.text("type", part.part_type.as_str(), part_type.as_str());
            diff.text("heads", &usernames(tx, &old_heads)?, &usernames(tx, &new_heads)?);
            if diff.is_empty() {
                return Ok(part);
            }
            let version = part.version + 1;
            tx.execute(
                "UPDATE university_part SET version = ?2, name = ?3, parent_id = ?4, type = ?5 WHERE id = ?1",
                params![id, version, name, parent, part_type.as_str()],
            )?;
            if new_heads != old_heads {
                tx.execute("DELETE FROM user_managed_parts WHERE university_part_id = ?1", params![id])?;
                for head in &new_heads {
                    tx.execute(
                        "INSERT INTO user_managed_parts (university_part_id, user_id) VALUES (?1, ?2)",
                        params![id, head],
                    )?;
                }
            }
            record_change(
                tx,
                &ChangeSet::new(actor, AuditEvent::Update, "UniversityPart", id, version)
                    .with_changes(diff.into_changes()),
            )?;
            load_part(tx, id)
        })
    }

    /// The whole hierarchy, by id. Open to every signed-in user.
    pub fn part_list(&self, actor: &Actor) -> Result<Vec<UniversityPart>> {
        self.store().read(|tx| {
            AccessContext::load(tx, actor.user_id)?;
            Ok(PartTree::load(tx)?.parts().cloned().collect())
        })
    }

    pub fn part_show(&self, actor: &Actor, id: i64) -> Result<UniversityPart> {
        self.store().read(|tx| {
            AccessContext::load(tx, actor.user_id)?;
            load_part(tx, id)
        })
    }

    /// Heads of a part, for the structure pages.
    pub fn part_heads(&self, actor: &Actor, id: i64) -> Result<Vec<User>> {
        self.store().read(|tx| {
            AccessContext::load(tx, actor.user_id)?;
            load_part(tx, id)?;
            heads_of(tx, id)?.into_iter().map(|u| load_user(tx, u)).collect()
        })
    }
}

pub(crate) fn load_part(conn: &Connection, id: i64) -> Result<UniversityPart> {
    conn.query_row(
        "SELECT id, version, name, parent_id, type FROM university_part WHERE id = ?1",
        params![id],
        part_from_row,
    )
    .optional()?
    .ok_or_else(|| Error::not_found("university part", id))
}

fn require_admin(conn: &Connection, actor: &Actor) -> Result<AccessContext> {
    let ctx = AccessContext::load(conn, actor.user_id)?;
    if ctx.level == Level::General {
        return Err(Error::forbidden(format!("{} is not an administrator", ctx.username)));
    }
    Ok(ctx)
}
