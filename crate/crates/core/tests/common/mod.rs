#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rusqlite::Connection;
use uuis_core::security::PasswordHasher;
use uuis_core::storage::{seed_fixture, Store};
use uuis_core::{Actor, Error, Uuis};

pub fn empty() -> Uuis {
    Uuis::with_hasher(Store::open_in_memory().unwrap(), PasswordHasher::fast())
}

pub fn seeded() -> Uuis {
    let uuis = empty();
    seed_fixture(uuis.store(), uuis.passwords()).unwrap();
    uuis
}

pub fn actor(uuis: &Uuis, username: &str) -> Actor {
    uuis.actor_for_username(username).unwrap()
}

pub fn query_i64s(uuis: &Uuis, sql: &str) -> Vec<i64> {
    uuis.store()
        .read(|tx| {
            let mut stmt = tx.prepare(sql)?;
            let rows = stmt.query_map([], |r| r.get(0))?.collect::<rusqlite::Result<Vec<i64>>>()?;
            Ok::<_, Error>(rows)
        })
        .unwrap()
}

pub fn count(uuis: &Uuis, sql: &str) -> i64 {
    query_i64s(uuis, sql)[0]
}

/// Parts headed by `user_id` plus all descendants, by walking parent links upward.
pub fn scope_oracle(conn: &Connection, user_id: i64) -> BTreeSet<i64> {
    let parents: BTreeMap<i64, Option<i64>> = {
        let mut stmt = conn.prepare("SELECT id, parent_id FROM university_part").unwrap();
        stmt.query_map([], |r| Ok((r.get(0)?, r.get(1)?)))
            .unwrap()
            .map(Result::unwrap)
            .collect()
    };
    let headed: BTreeSet<i64> = {
        let mut stmt = conn
            .prepare("SELECT university_part_id FROM user_managed_parts WHERE user_id = ?1")
            .unwrap();
        stmt.query_map([user_id], |r| r.get(0)).unwrap().map(Result::unwrap).collect()
    };
    parents
        .keys()
        .copied()
        .filter(|&p| {
            let mut cur = Some(p);
            let mut steps = 0;
            while let Some(c) = cur {
                if headed.contains(&c) {
                    return true;
                }
                cur = parents.get(&c).copied().flatten();
                steps += 1;
                if steps > parents.len() {
                    return false;
                }
            }
            false
        })
        .collect()
}

pub fn is_institution_oracle(conn: &Connection, user_id: i64) -> bool {
    let n: i64 = conn
        .query_row(
            "SELECT COUNT(*) FROM user_managed_parts m JOIN university_part p ON p.id = m.university_part_id \
             WHERE m.user_id = ?1 AND p.type IN ('GROUP', 'UNIVERSITY')",
            [user_id],
            |r| r.get(0),
        )
        .unwrap();
    n > 0
}
