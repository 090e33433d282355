//! Assets, locations, their types and typed properties.

mod assets;
mod locations;
mod types;

use std::fmt;
use std::str::FromStr;

use rusqlite::{params, Connection, OptionalExtension};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use assets::{Asset, AssetChanges, AssetFilter, NewAsset};
pub use locations::{Location, LocationChanges, LocationFilter, NewLocation};
pub use types::{AssetType, LocationType, NewType, NewTypeProperty, TypeProperty};

pub(crate) use assets::{create_asset_in, edit_asset_in};

/// Largest asset id that still fits the ten IUFAID digits.
pub const MAX_IUFAID_NUMBER: i64 = 9_999_999_999;

/// Barcode text for an asset: `IUFAID` followed by the id padded to ten digits.
pub fn generate_iufaid(asset_id: i64) -> Result<String> {
    if !(1..=MAX_IUFAID_NUMBER).contains(&asset_id) {
        return Err(Error::Capacity(asset_id));
    }
    Ok(format!("IUFAID{asset_id:010}"))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AssetStatus {
    #[default]
    Available,
    Reserved,
    Retired,
}

impl AssetStatus {
    pub const ALL: [AssetStatus; 3] = [AssetStatus::Available, AssetStatus::Reserved, AssetStatus::Retired];

    pub fn as_str(self) -> &'static str {
        match self {
            AssetStatus::Available => "AVAILABLE",
            AssetStatus::Reserved => "RESERVED",
            AssetStatus::Retired => "RETIRED",
        }
    }
}

impl fmt::Display for AssetStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AssetStatus {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AssetStatus::ALL
            .into_iter()
            .find(|st| st.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::validation(format!("unknown asset status {s:?}")))
    }
}

/// One stored value of a typed property.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct PropertyValue {
    pub property_id: i64,
    pub name: String,
    pub value: String,
}

pub(crate) fn part_name(conn: &Connection, id: i64) -> Result<String> {
    conn.query_row("SELECT name FROM university_part WHERE id = ?1", params![id], |r| r.get(0))
        .optional()?
        .ok_or_else(|| Error::validation(format!("university part {id} does not exist")))
}

pub(crate) fn location_name(conn: &Connection, id: i64) -> Result<String> {
    conn.query_row("SELECT name FROM location WHERE id = ?1", params![id], |r| r.get(0))
        .optional()?
        .ok_or_else(|| Error::validation(format!("location {id} does not exist")))
}

pub(crate) fn user_ref(conn: &Connection, id: i64) -> Result<String> {
    conn.query_row("SELECT username FROM \"user\" WHERE id = ?1", params![id], |r| r.get(0))
        .optional()?
        .ok_or_else(|| Error::validation(format!("user {id} does not exist")))
}

/// Audit rendering of an optional reference.
pub(crate) fn opt_name(conn: &Connection, id: Option<i64>, f: fn(&Connection, i64) -> Result<String>) -> Result<Option<String>> {
    id.map(|id| f(conn, id)).transpose()
}
