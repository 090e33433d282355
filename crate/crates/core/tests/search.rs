mod common;

use std::collections::BTreeSet;

use common::{actor, is_institution_oracle, scope_oracle, seeded};
use proptest::prelude::*;
use uuis_core::paging::PageRequest;
use uuis_core::search::{
    normalize_query, AdvancedCriteria, Clause, Connective, EntityKind, MAX_QUERY_CHARS, NO_RESULTS_MESSAGE,
};
use uuis_core::{Error, Uuis};

const USERS: [&str; 6] = ["dave", "john", "jack", "bob", "kenny", "marge"];

fn all_pages() -> PageRequest {
    PageRequest::new(1, 1000).unwrap()
}

/// Visible asset ids whose text columns contain `term`, computed with SQL LIKE.
fn asset_oracle(uuis: &Uuis, username: &str, term: &str) -> BTreeSet<i64> {
    uuis.store()
        .read(|tx| {
            let uid: i64 = tx.query_row("SELECT id FROM \"user\" WHERE username = ?1", [username], |r| r.get(0))?;
            let everything = is_institution_oracle(tx, uid);
            let scope = scope_oracle(tx, uid);
            let pattern = format!("%{term}%");
            let mut stmt = tx.prepare(
                "SELECT a.id, a.owner_id FROM asset a JOIN asset_type t ON t.id = a.type_id \
                 JOIN location l ON l.id = a.location_id JOIN university_part o ON o.id = a.owner_id \
                 WHERE coalesce(a.iufaid,'') LIKE ?1 OR coalesce(a.legacyid,'') LIKE ?1 OR a.name LIKE ?1 \
                 OR coalesce(a.details,'') LIKE ?1 OR coalesce(a.serial_number,'') LIKE ?1 OR a.status LIKE ?1 \
                 OR t.name LIKE ?1 OR l.name LIKE ?1 OR o.name LIKE ?1",
            )?;
            let rows: Vec<(i64, i64)> =
                stmt.query_map([pattern], |r| Ok((r.get(0)?, r.get(1)?)))?.collect::<rusqlite::Result<_>>()?;
            Ok::<_, Error>(
                rows.into_iter()
                    .filter(|(_, owner)| everything || scope.contains(owner))
                    .map(|(id, _)| id)
                    .collect(),
            )
        })
        .unwrap()
}

fn search_ids(uuis: &Uuis, username: &str, q: &str) -> BTreeSet<i64> {
    let a = actor(uuis, username);
    uuis.basic_search(&a, &normalize_query(q), Some(EntityKind::Asset), all_pages())
        .unwrap()
        .page
        .rows
        .into_iter()
        .map(|h| h.id)
        .collect()
}

#[test]
fn long_query_is_truncated_not_rejected() {
    let q = "a".repeat(MAX_QUERY_CHARS + 1);
    let n = normalize_query(&q);
    assert_eq!(n.normalized.chars().count(), 1023);
    let uuis = seeded();
    let dave = actor(&uuis, "dave");
    assert!(uuis.basic_search(&dave, &n, None, PageRequest::default()).is_ok());
}

#[test]
fn whitespace_matches_everything_visible() {
    let uuis = seeded();
    for u in USERS {
        assert_eq!(search_ids(&uuis, u, "   "), asset_oracle(&uuis, u, ""), "{u}");
    }
}

#[test]
fn empty_query_returns_nothing_with_message() {
    let uuis = seeded();
    let dave = actor(&uuis, "dave");
    let r = uuis.basic_search(&dave, &normalize_query(""), None, PageRequest::default()).unwrap();
    assert_eq!(r.page.total, 0);
    assert_eq!(r.message.as_deref(), Some(NO_RESULTS_MESSAGE));
}

#[test]
fn no_match_over_seed() {
    let uuis = seeded();
    let dave = actor(&uuis, "dave");
    let r = uuis.basic_search(&dave, &normalize_query("10.08"), None, PageRequest::default()).unwrap();
    assert_eq!(r.page.total, 0);
    assert_eq!(r.message.as_deref(), Some(NO_RESULTS_MESSAGE));
}

#[test]
fn biology_head_never_sees_software_engineering_assets() {
    let uuis = seeded();
    let hits = search_ids(&uuis, "jack", "soen");
    assert!(hits.is_empty(), "{hits:?}");
    assert!(!search_ids(&uuis, "dave", "soen").is_empty());
}

#[test]
fn advanced_search_clauses() {
    let uuis = seeded();
    let dave = actor(&uuis, "dave");
    let criteria = AdvancedCriteria {
        entity: EntityKind::Asset,
        clauses: vec![
            Clause { field: "name".into(), value: "bio-pc".into(), connective: Connective::And },
            Clause { field: "name".into(), value: "theory".into(), connective: Connective::Or },
            Clause { field: "location".into(), value: "JB-101".into(), connective: Connective::And },
        ],
    };
    let r = uuis.advanced_search(&dave, &criteria, all_pages()).unwrap();
    assert_eq!(r.page.total, 7);

    let too_many = AdvancedCriteria {
        entity: EntityKind::Asset,
        clauses: vec![Clause { field: "name".into(), value: "x".into(), connective: Connective::And }; 5],
    };
    assert!(matches!(uuis.advanced_search(&dave, &too_many, all_pages()), Err(Error::Validation(_))));

    let kenny = actor(&uuis, "kenny");
    assert!(matches!(uuis.advanced_search(&kenny, &criteria, all_pages()), Err(Error::Forbidden(_))));
}

#[test]
fn requesters_find_their_own_requests() {
    let uuis = seeded();
    let eric = actor(&uuis, "eric");
    let r = uuis
        .basic_search(&eric, &normalize_query("mouse"), Some(EntityKind::Request), all_pages())
        .unwrap();
    assert_eq!(r.page.rows.iter().map(|h| h.id).collect::<Vec<_>>(), [10]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn basic_search_equals_substring_oracle(
        names in prop::collection::vec(("[abxy]{1,6}", 1i64..=10), 0..25),
        term in "[abxyAB]{1,3}",
        who in 0usize..USERS.len(),
    ) {
        let uuis = seeded();
        uuis.store()
            .write(|tx| {
                for (name, owner) in &names {
                    tx.execute(
                        "INSERT INTO asset (version, status, location_id, type_id, name, owner_id) \
                         VALUES (1, 'AVAILABLE', 1, 1, ?1, ?2)",
                        rusqlite::params![name, owner],
                    )?;
                }
                Ok::<_, Error>(())
            })
            .unwrap();
        let user = USERS[who];
        prop_assert_eq!(search_ids(&uuis, user, &term), asset_oracle(&uuis, user, &term));
    }
}
