//! Principals, roles, the university hierarchy, and access resolution.
//!
//! A user's reach is derived from headship: heading a part grants authority
//! over that part and everything beneath it, and the highest-typed part a
//! user heads fixes their level (0 = heads nothing, 1 = department,
//! 2 = faculty, 3 = university or group). Level-3 users pass every scope
//! check. Permission strings come from roles and direct grants and are
//! checked together with scope.

mod access;
mod admin;
mod password;
mod session;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize, Serializer};

pub use access::{check_permission, compute_level, resolve_scope, AccessContext, PartTree};
pub use admin::{NewPart, NewRole, NewUser, PartChanges, RoleChanges, UserChanges, UserDetail};
pub use password::PasswordHasher;
pub use session::{SessionRegistry, SESSION_IDLE_TIMEOUT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PartType {
    Group,
    University,
    Faculty,
    Department,
}

impl PartType {
    pub fn as_str(self) -> &'static str {
        match self {
            PartType::Group => "GROUP",
            PartType::University => "UNIVERSITY",
            PartType::Faculty => "FACULTY",
            PartType::Department => "DEPARTMENT",
        }
    }

    /// Level granted to a head of a part of this type.
    pub fn head_level(self) -> Level {
        match self {
            PartType::Group | PartType::University => Level::Institution,
            PartType::Faculty => Level::Faculty,
            PartType::Department => Level::Department,
        }
    }
}

impl fmt::Display for PartType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PartType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "GROUP" => Ok(PartType::Group),
            "UNIVERSITY" => Ok(PartType::University),
            "FACULTY" => Ok(PartType::Faculty),
            "DEPARTMENT" => Ok(PartType::Department),
            other => Err(format!("unknown university part type {other:?}")),
        }
    }
}

/// Administrative level, 0 through 3.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Level {
    General = 0,
    Department = 1,
    Faculty = 2,
    Institution = 3,
}

impl Level {
    pub fn value(self) -> u8 {
        self as u8
    }
}

impl Serialize for Level {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(self.value())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct UniversityPart {
    pub id: i64,
    pub version: i64,
    pub name: String,
    pub parent_id: Option<i64>,
    #[serde(rename = "type")]
    pub part_type: PartType,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct User {
    pub id: i64,
    pub version: i64,
    pub username: String,
    pub name: String,
    #[serde(skip)]
    pub password_hash: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Role {
    pub id: i64,
    pub version: i64,
    pub name: String,
    pub permissions: BTreeSet<Permission>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct UserGrants {
    pub user_id: i64,
    pub roles: BTreeSet<i64>,
    pub direct_permissions: BTreeSet<Permission>,
    pub managed_parts: BTreeSet<i64>,
    pub member_parts: BTreeSet<i64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Session {
    pub token: String,
    pub user_id: i64,
    pub created_at: DateTime<Utc>,
}

macro_rules! permissions {
    ($($variant:ident => $text:literal),+ $(,)?) => {
        /// Action permission strings.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum Permission {
            $($variant),+
        }

        impl Permission {
            pub const ALL: &'static [Permission] = &[$(Permission::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $(Permission::$variant => $text),+
                }
            }
        }

        impl FromStr for Permission {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($text => Ok(Permission::$variant),)+
                    other => Err(format!("unknown permission {other:?}")),
                }
            }
        }
    };
}

permissions! {
    RequestCreate => "request.create",
    RequestApprove => "request.approve",
    RequestExecute => "request.execute",
    AssetView => "asset.view",
    AssetEdit => "asset.edit",
    AssetCreate => "asset.create",
    LocationEdit => "location.edit",
    LocationCreate => "location.create",
    LocationDelete => "location.delete",
    UserAdmin => "user.admin",
    ReportView => "report.view",
    AuditView => "audit.view",
    SearchAdvanced => "search.advanced",
}

impl fmt::Display for Permission {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for Permission {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Permission {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

pub(crate) fn join_permissions(perms: &BTreeSet<Permission>) -> String {
    perms.iter().map(|p| p.as_str()).collect::<Vec<_>>().join(",")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn permission_vocabulary_round_trips() {
        assert_eq!(Permission::ALL.len(), 13);
        for p in Permission::ALL {
            assert_eq!(p.as_str().parse::<Permission>().unwrap(), *p);
        }
        assert!("asset.delete".parse::<Permission>().is_err());
    }

    #[test]
    fn part_type_levels() {
        assert_eq!(PartType::Department.head_level().value(), 1);
        assert_eq!(PartType::Faculty.head_level().value(), 2);
        assert_eq!(PartType::University.head_level().value(), 3);
        assert_eq!(PartType::Group.head_level().value(), 3);
    }
}
