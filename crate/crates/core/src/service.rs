use rusqlite::{params, OptionalExtension};

use crate::error::{Error, Result};
use crate::security::{PasswordHasher, SessionRegistry};
use crate::storage::Store;

/// The authenticated principal on whose behalf an operation runs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Actor {
    pub user_id: i64,
    pub username: String,
    /// Request path that triggered the operation, copied into audit rows.
    pub uri: Option<String>,
}

impl Actor {
    pub fn with_uri(mut self, uri: impl Into<String>) -> Self {
        self.uri = Some(uri.into());
        self
    }
}

/// Entry point for every domain operation.
///
/// Operations are grouped by module (`security`, `inventory`, `workflow`, …)
/// as inherent methods on this type. Each mutating call runs in exactly one
/// store transaction together with its audit rows.
#[derive(Debug)]
pub struct Uuis {
    store: Store,
    sessions: SessionRegistry,
    passwords: PasswordHasher,
}

impl Uuis {
    pub fn new(store: Store) -> Self {
        Self::with_hasher(store, PasswordHasher::standard())
    }

    pub fn with_hasher(store: Store, passwords: PasswordHasher) -> Self {
        Uuis {
            store,
            sessions: SessionRegistry::new(),
            passwords,
        }
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    pub fn sessions(&self) -> &SessionRegistry {
        &self.sessions
    }

    pub fn passwords(&self) -> &PasswordHasher {
        &self.passwords
    }

    /// Resolves a session token; unknown, expired and revoked tokens all fail the same way.
    pub fn actor_for_session(&self, token: &str) -> Result<Actor> {
        let user_id = self.sessions.resolve(token).ok_or(Error::Unauthenticated)?;
        let username = self
            .store
            .read(|tx| {
                Ok::<_, Error>(
                    tx.query_row(
                        "SELECT username FROM \"user\" WHERE id = ?1",
                        params![user_id],
                        |r| r.get::<_, String>(0),
                    )
                    .optional()?,
                )
            })?
            .ok_or(Error::Unauthenticated)?;
        Ok(Actor {
            user_id,
            username,
            uri: None,
        })
    }

    /// Actor for offline tooling that runs as a named user without a session.
    pub fn actor_for_username(&self, username: &str) -> Result<Actor> {
        let user_id = self
            .store
            .read(|tx| {
                Ok::<_, Error>(
                    tx.query_row(
                        "SELECT id FROM \"user\" WHERE username = ?1",
                        params![username],
                        |r| r.get::<_, i64>(0),
                    )
                    .optional()?,
                )
            })?
            .ok_or_else(|| Error::not_found("user", username))?;
        Ok(Actor {
            user_id,
            username: username.to_string(),
            uri: None,
        })
    }
}
