use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rusqlite::{params, Connection, OptionalExtension};
use tracing::warn;

use super::{Level, PartType, Permission, UniversityPart, UserGrants};
use crate::error::{Error, Result};

/// In-memory copy of the `university_part` table with child links.
#[derive(Debug, Clone, Default)]
pub struct PartTree {
    parts: BTreeMap<i64, UniversityPart>,
    children: BTreeMap<i64, Vec<i64>>,
}

impl PartTree {
    pub fn from_parts(parts: impl IntoIterator<Item = UniversityPart>) -> Self {
        let mut tree = PartTree::default();
        for part in parts {
            if let Some(parent) = part.parent_id {
                tree.children.entry(parent).or_default().push(part.id);
            }
            tree.parts.insert(part.id, part);
        }
        tree
    }

    pub fn load(conn: &Connection) -> Result<Self> {
        let mut stmt =
            conn.prepare("SELECT id, version, name, parent_id, type FROM university_part ORDER BY id")?;
        let parts = stmt
            .query_map([], part_from_row)?
            .collect::<rusqlite::Result<Vec<_>>>()?;
        Ok(Self::from_parts(parts))
    }

    pub fn get(&self, id: i64) -> Option<&UniversityPart> {
        self.parts.get(&id)
    }

    pub fn contains(&self, id: i64) -> bool {
        self.parts.contains_key(&id)
    }

    pub fn parts(&self) -> impl Iterator<Item = &UniversityPart> {
        self.parts.values()
    }

    pub fn all_ids(&self) -> BTreeSet<i64> {
        self.parts.keys().copied().collect()
    }

    pub fn name(&self, id: i64) -> Option<&str> {
        self.parts.get(&id).map(|p| p.name.as_str())
    }

    /// `root` plus every descendant.
    pub fn subtree(&self, root: i64) -> BTreeSet<i64> {
        let mut out = BTreeSet::new();
        if !self.contains(root) {
            return out;
        }
        let mut queue = VecDeque::from([root]);
        while let Some(id) = queue.pop_front() {
            if !out.insert(id) {
                continue;
            }
            if let Some(kids) = self.children.get(&id) {
                queue.extend(kids.iter().copied());
            }
        }
        out
    }

    /// True if re-parenting `node` under `new_parent` would close a loop.
    pub fn would_create_cycle(&self, node: i64, new_parent: Option<i64>) -> bool {
        let mut seen = BTreeSet::new();
        let mut cursor = new_parent;
        while let Some(id) = cursor {
            if id == node || !seen.insert(id) {
                return true;
            }
            cursor = self.parts.get(&id).and_then(|p| p.parent_id);
        }
        false
    }

    /// Lowest-id part without a parent; the fallback routing target.
    pub fn first_root(&self) -> Option<i64> {
        self.parts.values().find(|p| p.parent_id.is_none()).map(|p| p.id)
    }
}

pub(crate) fn part_from_row(row: &rusqlite::Row<'_>) -> rusqlite::Result<UniversityPart> {
    let raw_type: String = row.get(4)?;
    let part_type = raw_type.parse::<PartType>().map_err(|e| {
        rusqlite::Error::FromSqlConversionFailure(4, rusqlite::types::Type::Text, e.into())
    })?;
    Ok(UniversityPart {
        id: row.get(0)?,
        version: row.get(1)?,
        name: row.get(2)?,
        parent_id: row.get(3)?,
        part_type,
    })
}

/// 0 when heading nothing, otherwise the level of the highest-typed headed part.
pub fn compute_level(tree: &PartTree, managed_parts: &BTreeSet<i64>) -> Level {
    managed_parts
        .iter()
        .filter_map(|id| tree.get(*id))
        .map(|p| p.part_type.head_level())
        .max()
        .unwrap_or(Level::General)
}

/// Union of the subtrees of every headed part.
pub fn resolve_scope(tree: &PartTree, managed_parts: &BTreeSet<i64>) -> BTreeSet<i64> {
    managed_parts.iter().flat_map(|id| tree.subtree(*id)).collect()
}

/// Whether `grants` allow `action` on `target_part`.
pub fn check_permission(
    tree: &PartTree,
    grants: &UserGrants,
    role_permissions: &BTreeSet<Permission>,
    action: Permission,
    target_part: i64,
) -> bool {
    let has = grants.direct_permissions.contains(&action) || role_permissions.contains(&action);
    if !has {
        return false;
    }
    match compute_level(tree, &grants.managed_parts) {
        Level::General => false,
        Level::Institution => true,
        _ => resolve_scope(tree, &grants.managed_parts).contains(&target_part),
    }
}

pub(crate) fn load_grants(conn: &Connection, user_id: i64) -> Result<UserGrants> {
    let ids = |sql: &str| -> Result<BTreeSet<i64>> {
        let mut stmt = conn.prepare(sql)?;
        let out = stmt
            .query_map([user_id], |r| r.get::<_, i64>(0))?
            .collect::<rusqlite::Result<BTreeSet<_>>>()?;
        Ok(out)
    };
    Ok(UserGrants {
        user_id,
        roles: ids("SELECT role_id FROM user_roles WHERE user_id = ?1")?,
        direct_permissions: permission_set(
            conn,
            "SELECT permissions_string FROM user_permissions WHERE user_id = ?1",
            user_id,
        )?,
        managed_parts: ids("SELECT university_part_id FROM user_managed_parts WHERE user_id = ?1")?,
        member_parts: ids(
            "SELECT university_part_id FROM user_staff_membership_parts WHERE user_id = ?1",
        )?,
    })
}

pub(crate) fn permission_set(conn: &Connection, sql: &str, owner: i64) -> Result<BTreeSet<Permission>> {
    let mut stmt = conn.prepare(sql)?;
    let raw = stmt
        .query_map([owner], |r| r.get::<_, Option<String>>(0))?
        .collect::<rusqlite::Result<Vec<_>>>()?;
    let mut out = BTreeSet::new();
    for s in raw.into_iter().flatten() {
        match s.parse() {
            Ok(p) => {
                out.insert(p);
            }
            Err(e) => warn!(owner, "ignoring stored permission: {e}"),
        }
    }
    Ok(out)
}

pub(crate) fn role_permission_union(conn: &Connection, roles: &BTreeSet<i64>) -> Result<BTreeSet<Permission>> {
    let mut out = BTreeSet::new();
    for role in roles {
        out.extend(permission_set(
            conn,
            "SELECT permissions_string FROM role_permissions WHERE role_id = ?1",
            *role,
        )?);
    }
    Ok(out)
}

/// Everything needed to authorize one actor, read in the operation's own transaction.
#[derive(Debug, Clone)]
pub struct AccessContext {
    pub user_id: i64,
    pub username: String,
    pub level: Level,
    /// Headed parts plus descendants.
    pub scope: BTreeSet<i64>,
    pub permissions: BTreeSet<Permission>,
    pub grants: UserGrants,
}

impl AccessContext {
    pub fn load(conn: &Connection, user_id: i64) -> Result<Self> {
        let tree = PartTree::load(conn)?;
        Self::load_with_tree(conn, &tree, user_id)
    }

    pub fn load_with_tree(conn: &Connection, tree: &PartTree, user_id: i64) -> Result<Self> {
        let username: String = conn
            .query_row(
                "SELECT username FROM \"user\" WHERE id = ?1",
                params![user_id],
                |r| r.get(0),
            )
            .optional()?
            .ok_or(Error::Unauthenticated)?;
        let grants = load_grants(conn, user_id)?;
        let mut permissions = role_permission_union(conn, &grants.roles)?;
        permissions.extend(grants.direct_permissions.iter().copied());
        Ok(AccessContext {
            user_id,
            username,
            level: compute_level(tree, &grants.managed_parts),
            scope: resolve_scope(tree, &grants.managed_parts),
            permissions,
            grants,
        })
    }

    pub fn has(&self, perm: Permission) -> bool {
        self.permissions.contains(&perm)
    }

    pub fn is_institution(&self) -> bool {
        self.level == Level::Institution
    }

    /// Scope check alone; level-3 users cover every part.
    pub fn covers(&self, part: i64) -> bool {
        self.is_institution() || self.scope.contains(&part)
    }

    pub fn can(&self, perm: Permission, part: i64) -> bool {
        self.has(perm) && self.covers(part)
    }

    pub fn require(&self, perm: Permission, part: i64) -> Result<()> {
        if !self.has(perm) {
            return Err(Error::forbidden(format!("{} lacks permission {perm}", self.username)));
        }
        if !self.covers(part) {
            return Err(Error::forbidden(format!(
                "university part {part} is outside the scope of {}",
                self.username
            )));
        }
        Ok(())
    }

    /// Level 3 plus the named permission.
    pub fn require_institution(&self, perm: Permission) -> Result<()> {
        if !self.is_institution() {
            return Err(Error::forbidden(format!(
                "{} is not an institution-level administrator",
                self.username
            )));
        }
        if !self.has(perm) {
            return Err(Error::forbidden(format!("{} lacks permission {perm}", self.username)));
        }
        Ok(())
    }

    /// Parts this actor may see: everything at level 3, otherwise the scope.
    pub fn visible_parts(&self, tree: &PartTree) -> BTreeSet<i64> {
        if self.is_institution() {
            tree.all_ids()
        } else {
            self.scope.clone()
        }
    }
}
