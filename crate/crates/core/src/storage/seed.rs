//! Canonical demo fixture.
//!
//! University structure, report rows and requests reproduce the reference
//! installation's published screens. Ids are assigned explicitly so that
//! tests and docs can refer to them.

use chrono::{DateTime, Utc};
use rusqlite::params;

use super::{format_timestamp, Store, StorageError, WriteTx};
use crate::inventory::generate_iufaid;
use crate::security::{PasswordHasher, Permission};

/// Password shared by every seeded account.
pub const SEED_PASSWORD: &str = "uuis-demo";

const PARTS: [(i64, &str, Option<i64>, &str); 10] = [
    (1, "IT Group", None, "GROUP"),
    (2, "Inventory Group", Some(1), "GROUP"),
    (3, "University of Arctica", Some(2), "UNIVERSITY"),
    (4, "Faculty of Arts and Science", Some(3), "FACULTY"),
    (5, "Faculty of Computer Science", Some(3), "FACULTY"),
    (6, "Faculty of Engineering", Some(3), "FACULTY"),
    (7, "Department of Biology", Some(4), "DEPARTMENT"),
    (8, "Department of Sociology", Some(4), "DEPARTMENT"),
    (9, "Department of Software Engineering", Some(5), "DEPARTMENT"),
    (10, "Department of Computer Theory", Some(5), "DEPARTMENT"),
];

const ROLE_ADMINISTRATOR: i64 = 1;
const ROLE_INVENTORY_MANAGER: i64 = 2;
const ROLE_DEPARTMENT_MANAGER: i64 = 3;
const ROLE_REQUESTER: i64 = 4;

/// (id, username, display name, role, member part, headed part)
const USERS: [(i64, &str, &str, i64, i64, Option<i64>); 11] = [
    (1, "dave", "Dave Gray", ROLE_ADMINISTRATOR, 1, Some(1)),
    (2, "john", "John Doe", ROLE_INVENTORY_MANAGER, 2, Some(3)),
    (3, "marge", "Marge Simpson", ROLE_INVENTORY_MANAGER, 2, Some(2)),
    (4, "jack", "Jack Daniels", ROLE_DEPARTMENT_MANAGER, 7, Some(7)),
    (5, "bob", "Bob Dylan", ROLE_DEPARTMENT_MANAGER, 5, Some(5)),
    (6, "phil", "Phil Collins", ROLE_REQUESTER, 4, None),
    (7, "kenny", "Kenny McCormick", ROLE_REQUESTER, 7, None),
    (8, "bill", "Bill Evans", ROLE_REQUESTER, 8, None),
    (9, "eric", "Eric Clapton", ROLE_REQUESTER, 9, None),
    (10, "mary", "Mary Shelley", ROLE_REQUESTER, 10, None),
    (11, "Ali", "Ali Baba", ROLE_REQUESTER, 6, None),
];

const LOCATION_TYPES: [(i64, &str, &str); 3] = [
    (1, "Building", "A campus building"),
    (2, "Floor", "A floor within a building"),
    (3, "Room", "A room on a floor"),
];

const ASSET_TYPES: [(i64, &str, &str); 4] = [
    (1, "Chair", "Seating"),
    (2, "Computer", "Desktop and server computers"),
    (3, "Desk", "Work desks"),
    (4, "Table", "Tables"),
];
const CHAIR: i64 = 1;
const COMPUTER: i64 = 2;
const DESK: i64 = 3;
const TABLE: i64 = 4;

const XEARTH_NAMES: [&str; 9] = [
    "xearthic", "xearthin", "xearthine", "xearthines", "xearthins", "xearthoma", "xearthomas", "xearthomata",
    "xearthone",
];

/// (id, requester, part, type, title, description, comments, submitted, status, subject)
type RequestRow = (i64, i64, i64, &'static str, &'static str, &'static str, &'static str, &'static str, &'static str, Option<i64>);

const REQUESTS: [RequestRow; 14] = [
    (1, 1, 2, "TRANSFER", "Request 01", "Transfer now", "Transfer this item to my department", "2010-04-17T12:43:59Z", "NOT_EXECUTED", Some(1)),
    (3, 7, 2, "REPAIR", "The scroll wheel is not working", "The scroll wheel is not working", "The asset IUFAlD000000001", "2010-04-18T17:15:31Z", "EXECUTED", None),
    (4, 8, 2, "TRANSFER", "They have requested this", "They have requested this", "Transfer this asset to the Department of Sociology, they have requested this.", "2010-04-18T21:32:54Z", "EXECUTED", None),
    (5, 9, 2, "REPAIR", "It's not booting anymore", "It's not booting anymore", "The computer with iufaid IUFAlD000000492 is broken.", "2010-04-19T02:27:32Z", "EXECUTED", None),
    (6, 8, 2, "TRANSFER", "I want this computer", "I want this computer", "Please", "2010-04-19T02:35:19Z", "EXECUTED", None),
    (7, 8, 7, "TRANSFER", "Transfer", "Transfer", "Please transfer to room JB-301, Department of Sociology", "2010-04-19T02:46:17Z", "REJECTED", None),
    (8, 10, 2, "TRANSFER", "Transfer this asset", "Transfer this asset", "Transfer this asset to room JB-301, Department of Sociology", "2010-04-19T02:51:55Z", "EXECUTED", None),
    (9, 9, 2, "OTHER", "[object Object]", "[object Object]", "[object Object]", "2010-04-19T03:05:33Z", "NOT_EXECUTED", None),
    (10, 9, 2, "OTHER", "my mouse don't work", "my mouse don't work", "mouse", "2010-04-19T03:06:29Z", "EXECUTED", None),
    (11, 11, 2, "OTHER", "[object Object]", "[object Object]", "[object Object]", "2010-04-19T03:07:28Z", "EXECUTED", None),
    (12, 9, 2, "OTHER", "idk", "idk", "None available", "2010-04-19T19:20:09Z", "REJECTED", None),
    (13, 6, 2, "ACQUISITION", "For sound mixing...", "For sound mixing...", "[object Object]", "2010-04-19T19:30:31Z", "EXECUTED", None),
    (14, 9, 2, "OTHER", "[object Object]", "[object Object]", "The IUFAlD is 0000000408", "2010-04-19T22:47:26Z", "EXECUTED", None),
    (15, 8, 2, "TRANSFER", "Transfer", "Transfer", "Transfer", "2010-04-19T23:26:37Z", "EXECUTED", None),
];

/// Loads the demo fixture into an empty store. Writes no audit rows.
pub fn seed_fixture(store: &Store, hasher: &PasswordHasher) -> Result<(), StorageError> {
    if !store.is_empty()? {
        return Err(StorageError::NotEmpty);
    }
    let hashes: Vec<String> = USERS.iter().map(|_| hasher.hash(SEED_PASSWORD)).collect();
    store.write(|tx| {
        seed_structure(tx, &hashes)?;
        seed_locations(tx)?;
        seed_assets(tx)?;
        seed_requests(tx)
    })
}

fn seed_structure(tx: &WriteTx<'_>, hashes: &[String]) -> Result<(), StorageError> {
    for (id, name, parent, kind) in PARTS {
        tx.execute(
            "INSERT INTO university_part (id, version, name, parent_id, type) VALUES (?1, 0, ?2, ?3, ?4)",
            params![id, name, parent, kind],
        )?;
    }

    let all: Vec<Permission> = Permission::ALL.to_vec();
    let manager = {
        use Permission::*;
        vec![
            RequestCreate,
            RequestApprove,
            RequestExecute,
            AssetView,
            AssetEdit,
            AssetCreate,
            LocationEdit,
            LocationCreate,
            ReportView,
            AuditView,
            SearchAdvanced,
        ]
    };
    let department = {
        use Permission::*;
        vec![
            RequestCreate,
            RequestApprove,
            RequestExecute,
            AssetView,
            AssetEdit,
            AssetCreate,
            LocationEdit,
            ReportView,
            AuditView,
            SearchAdvanced,
        ]
    };
    let roles: [(i64, &str, Vec<Permission>); 4] = [
        (ROLE_ADMINISTRATOR, "administrator", all),
        (ROLE_INVENTORY_MANAGER, "inventory manager", manager),
        (ROLE_DEPARTMENT_MANAGER, "department manager", department),
        (ROLE_REQUESTER, "requester", vec![Permission::RequestCreate]),
    ];
    for (id, name, perms) in &roles {
        tx.execute("INSERT INTO role (id, version, name) VALUES (?1, 0, ?2)", params![id, name])?;
        for p in perms {
            tx.execute(
                "INSERT INTO role_permissions (role_id, permissions_string) VALUES (?1, ?2)",
                params![id, p.as_str()],
            )?;
        }
    }

    for ((id, username, name, role, member, heads), hash) in USERS.iter().zip(hashes) {
        tx.execute(
            "INSERT INTO \"user\" (id, version, username, name, password_hash) VALUES (?1, 0, ?2, ?3, ?4)",
            params![id, username, name, hash],
        )?;
        tx.execute("INSERT INTO user_roles (role_id, user_id) VALUES (?1, ?2)", params![role, id])?;
        tx.execute(
            "INSERT INTO user_staff_membership_parts (university_part_id, user_id) VALUES (?1, ?2)",
            params![member, id],
        )?;
        if let Some(part) = heads {
            tx.execute(
                "INSERT INTO user_managed_parts (university_part_id, user_id) VALUES (?1, ?2)",
                params![part, id],
            )?;
        }
    }
    Ok(())
}

fn seed_locations(tx: &WriteTx<'_>) -> Result<(), StorageError> {
    for (id, name, description) in LOCATION_TYPES {
        tx.execute(
            "INSERT INTO location_type (id, version, name, description) VALUES (?1, 0, ?2, ?3)",
            params![id, name, description],
        )?;
    }
    tx.execute(
        "INSERT INTO location_type_property (id, version, name, hint) VALUES (1, 0, 'Room use', 'e.g. lab, office, classroom')",
        [],
    )?;
    tx.execute(
        "INSERT INTO location_type_location_type_properties (location_type_id, location_type_property_id) VALUES (3, 1)",
        [],
    )?;

    let insert = |id: i64, name: &str, parent: Option<i64>, type_id: i64, owner: i64| {
        tx.execute(
            "INSERT INTO location (id, version, name, parent_location_id, type_id, owner_id, capacity) \
             VALUES (?1, 0, ?2, ?3, ?4, ?5, 10)",
            params![id, name, parent, type_id, owner],
        )
    };
    insert(1, "John Budweiser Building", None, 1, 2)?;
    for floor in 1..=4 {
        insert(1 + floor, &format!("JB Floor {floor}"), Some(1), 2, 2)?;
    }
    // Room owners per floor; floor 1 is split between four departments.
    let owners: [[i64; 4]; 4] = [[7, 9, 10, 8], [4, 4, 4, 4], [5, 5, 5, 5], [6, 6, 6, 6]];
    let mut id = 6;
    for floor in 1..=4i64 {
        for room in 1..=4i64 {
            insert(id, &format!("JB-{floor}0{room}"), Some(1 + floor), 3, owners[floor as usize - 1][room as usize - 1])?;
            id += 1;
        }
    }
    insert(22, "JB Floor 5", Some(1), 2, 2)?;
    for (i, room) in (5..=9).enumerate() {
        insert(23 + i as i64, &format!("JB-40{room}"), Some(5), 3, 6)?;
    }
    Ok(())
}

struct AssetSeed<'a> {
    id: i64,
    type_id: i64,
    name: String,
    legacy: Option<String>,
    details: &'a str,
    location: i64,
    owner: i64,
}

fn seed_assets(tx: &WriteTx<'_>) -> Result<(), StorageError> {
    for (id, name, description) in ASSET_TYPES {
        tx.execute(
            "INSERT INTO asset_type (id, version, name, description) VALUES (?1, 0, ?2, ?3)",
            params![id, name, description],
        )?;
    }
    for (id, name, hint) in [(1, "CPU", "e.g. Core 2 Duo"), (2, "RAM", "e.g. 4 GB")] {
        tx.execute(
            "INSERT INTO asset_type_property (id, version, name, hint, asset_type_id) VALUES (?1, 0, ?2, ?3, ?4)",
            params![id, name, hint, COMPUTER],
        )?;
        tx.execute(
            "INSERT INTO asset_type_asset_type_properties (asset_type_property_id, asset_type_id) VALUES (?1, ?2)",
            params![id, COMPUTER],
        )?;
    }

    const JB_101: i64 = 6;
    const JB_102: i64 = 7;
    const JB_103: i64 = 8;
    const JB_104: i64 = 9;
    const JB_403: i64 = 20;
    const BUILDING: i64 = 1;

    let mut rows: Vec<AssetSeed<'_>> = Vec::new();
    let mut next = 1i64;
    let mut push = |rows: &mut Vec<AssetSeed<'_>>, type_id, name: String, legacy, details, location, owner| {
        rows.push(AssetSeed {
            id: next,
            type_id,
            name,
            legacy,
            details,
            location,
            owner,
        });
        next += 1;
    };

    push(&mut rows, DESK, "eeasr".into(), Some("eewqj23232".into()), "asd", JB_403, 6);
    for i in 1..=7 {
        push(&mut rows, COMPUTER, format!("bio-pc{i:02}"), None, "Lab workstation", JB_101, 7);
    }
    push(&mut rows, CHAIR, "bio-chair01".into(), None, "Office chair", JB_101, 7);
    for i in 1..=10 {
        push(&mut rows, COMPUTER, format!("soen-pc{i:02}"), None, "Lab workstation", JB_102, 9);
    }
    // Ids 20..=49 line up with legacy numbers 10000020..=10000049.
    for i in 0..30 {
        let name = match XEARTH_NAMES.get(i) {
            Some(stem) => format!("{stem}.concordia.ca"),
            None => format!("xearth{:02}.concordia.ca", i + 1),
        };
        push(&mut rows, COMPUTER, name, Some(format!("{}", 10000020 + i)), "Dell PC", JB_403, 6);
    }
    for i in 11..=20 {
        push(&mut rows, COMPUTER, format!("soen-pc{i:02}"), None, "Lab workstation", JB_102, 9);
    }
    for i in 1..=8 {
        push(&mut rows, TABLE, format!("soen-table{i:02}"), None, "Lab table", JB_102, 9);
    }
    for i in 1..=17 {
        push(&mut rows, COMPUTER, format!("theory-pc{i:02}"), None, "Lab workstation", JB_103, 10);
    }
    for i in 1..=19 {
        push(&mut rows, COMPUTER, format!("soci-pc{i:02}"), None, "Lab workstation", JB_104, 8);
    }
    push(&mut rows, TABLE, "soci-table01".into(), None, "Meeting table", JB_104, 8);
    for i in 1..=363 {
        push(&mut rows, COMPUTER, format!("jb-pool-{i:03}"), None, "Pool computer", BUILDING, 2);
    }
    push(&mut rows, TABLE, "jb-lobby-table".into(), None, "Lobby table", BUILDING, 2);

    let mut stmt = tx.prepare(
        "INSERT INTO asset (id, version, iufaid, status, legacyid, location_id, type_id, details, name, owner_id) \
         VALUES (?1, 1, ?2, 'AVAILABLE', ?3, ?4, ?5, ?6, ?7, ?8)",
    )?;
    for a in &rows {
        let iufaid = generate_iufaid(a.id).expect("seed ids are small");
        stmt.execute(params![a.id, iufaid, a.legacy, a.location, a.type_id, a.details, a.name, a.owner])?;
    }
    Ok(())
}

fn seed_requests(tx: &WriteTx<'_>) -> Result<(), StorageError> {
    for (id, requester, part, kind, title, description, comments, submitted, status, subject) in REQUESTS {
        let when: DateTime<Utc> = submitted.parse().expect("fixture dates are RFC 3339");
        tx.execute(
            "INSERT INTO request (id, version, requester_id, status, part_assigned_id, subject_id, request_type, \
             submission_date, title, description, comments) VALUES (?1, 0, ?2, ?3, ?4, ?5, ?6, ?7, ?8, ?9, ?10)",
            params![id, requester, status, part, subject, kind, format_timestamp(when), title, description, comments],
        )?;
    }
    Ok(())
}
