use argon2::password_hash::rand_core::OsRng;
use argon2::password_hash::{PasswordHash, PasswordHasher as _, PasswordVerifier as _, SaltString};
use argon2::{Algorithm, Argon2, Params, Version};

/// Salted Argon2id hashing. Output is a PHC string (~97 chars), well inside
/// the 255-char `password_hash` column.
#[derive(Debug, Clone)]
pub struct PasswordHasher {
    params: Params,
    // Verified against when the username is unknown so both failure paths cost the same.
    dummy_hash: String,
}

impl PasswordHasher {
    /// Production cost (argon2 crate defaults: 19 MiB, 2 passes).
    pub fn standard() -> Self {
        Self::with_params(Params::default())
    }

    /// Minimum-cost parameters for tests and throwaway fixtures.
    pub fn fast() -> Self {
        Self::with_params(Params::new(Params::MIN_M_COST.max(64), 1, 1, None).expect("valid params"))
    }

    fn with_params(params: Params) -> Self {
        let mut hasher = PasswordHasher {
            params,
            dummy_hash: String::new(),
        };
        hasher.dummy_hash = hasher.hash("not-a-real-password");
        hasher
    }

    fn argon(&self) -> Argon2<'static> {
        Argon2::new(Algorithm::Argon2id, Version::V0x13, self.params.clone())
    }

    pub fn hash(&self, password: &str) -> String {
        let salt = SaltString::generate(&mut OsRng);
        self.argon()
            .hash_password(password.as_bytes(), &salt)
            .expect("argon2 hashing with valid params cannot fail")
            .to_string()
    }

    /// Checks `password` against a stored hash. Malformed hashes never match.
    pub fn verify(&self, password: &str, stored: &str) -> bool {
        match PasswordHash::new(stored) {
            Ok(parsed) => self.argon().verify_password(password.as_bytes(), &parsed).is_ok(),
            Err(_) => false,
        }
    }

    /// Burns the same work as a real verification; always false.
    pub fn verify_dummy(&self, password: &str) -> bool {
        let _ = self.verify(password, &self.dummy_hash);
        false
    }
}

impl Default for PasswordHasher {
    fn default() -> Self {
        Self::standard()
    }
}
