use std::collections::HashMap;

use chrono::{DateTime, Duration, Utc};
use parking_lot::RwLock;
use rand::rngs::OsRng;
use rand::RngCore;

use super::Session;

/// Sessions expire after this much inactivity.
pub const SESSION_IDLE_TIMEOUT: Duration = Duration::hours(8);

#[derive(Debug, Clone)]
struct Entry {
    user_id: i64,
    created_at: DateTime<Utc>,
    last_seen: DateTime<Utc>,
}

/// Server-side session table keyed by a 256-bit random token.
#[derive(Debug, Default)]
pub struct SessionRegistry {
    entries: RwLock<HashMap<String, Entry>>,
}

impl SessionRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn create(&self, user_id: i64) -> Session {
        let mut raw = [0u8; 32];
        OsRng.fill_bytes(&mut raw);
        let token = hex::encode(raw);
        let now = Utc::now();
        self.entries.write().insert(
            token.clone(),
            Entry {
                user_id,
                created_at: now,
                last_seen: now,
            },
        );
        Session {
            token,
            user_id,
            created_at: now,
        }
    }

    pub fn resolve(&self, token: &str) -> Option<i64> {
        self.resolve_at(token, Utc::now())
    }

    /// Resolves a token as of `now`, refreshing its idle timer.
    pub fn resolve_at(&self, token: &str, now: DateTime<Utc>) -> Option<i64> {
        let mut entries = self.entries.write();
        let entry = entries.get_mut(token)?;
        if now - entry.last_seen > SESSION_IDLE_TIMEOUT {
            entries.remove(token);
            return None;
        }
        entry.last_seen = entry.last_seen.max(now);
        Some(entry.user_id)
    }

    pub fn get(&self, token: &str) -> Option<Session> {
        self.entries.read().get(token).map(|e| Session {
            token: token.to_string(),
            user_id: e.user_id,
            created_at: e.created_at,
        })
    }

    /// Removing an unknown token is a successful no-op.
    pub fn revoke(&self, token: &str) {
        self.entries.write().remove(token);
    }

    pub fn revoke_user(&self, user_id: i64) {
        self.entries.write().retain(|_, e| e.user_id != user_id);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokens_are_long_and_distinct() {
        let reg = SessionRegistry::new();
        let a = reg.create(1);
        let b = reg.create(1);
        assert_eq!(a.token.len(), 64);
        assert_ne!(a.token, b.token);
    }

    #[test]
    fn revoking_one_token_keeps_the_other() {
        let reg = SessionRegistry::new();
        let a = reg.create(7);
        let b = reg.create(7);
        reg.revoke(&a.token);
        reg.revoke(&a.token);
        assert_eq!(reg.resolve(&a.token), None);
        assert_eq!(reg.resolve(&b.token), Some(7));
    }

    #[test]
    fn idle_sessions_expire() {
        let reg = SessionRegistry::new();
        let s = reg.create(3);
        let later = s.created_at + SESSION_IDLE_TIMEOUT - Duration::minutes(1);
        assert_eq!(reg.resolve_at(&s.token, later), Some(3));
        let much_later = later + SESSION_IDLE_TIMEOUT + Duration::minutes(1);
        assert_eq!(reg.resolve_at(&s.token, much_later), None);
        assert_eq!(reg.resolve_at(&s.token, later), None);
    }
}
