use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::Sha256;
use subtle::ConstantTimeEq;
use thiserror::Error;

const SCHEME: &str = "pbkdf2-sha256";
const HASH_LEN: usize = 32;
pub const DEFAULT_ITERATIONS: u32 = 60_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PasswordError {
    #[error("password must not be empty")]
    EmptyPassword,
}

/// Salted PBKDF2-HMAC-SHA256 digest in the self-describing form
/// `pbkdf2-sha256$<iterations>$<salt hex>$<hash hex>`.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PasswordDigest(String);

impl PasswordDigest {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Wraps a stored digest string without checking it; malformed digests
    /// simply never verify.
    pub fn from_stored(s: impl Into<String>) -> Self {
        PasswordDigest(s.into())
    }
}

impl fmt::Debug for PasswordDigest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("PasswordDigest(..)")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PasswordHasher {
    iterations: u32,
}

impl Default for PasswordHasher {
    fn default() -> Self {
        PasswordHasher { iterations: DEFAULT_ITERATIONS }
    }
}

impl PasswordHasher {
    pub fn with_iterations(iterations: u32) -> Self {
        PasswordHasher { iterations: iterations.max(1) }
    }

    pub fn hash(&self, plain: &str, salt: &[u8]) -> Result<PasswordDigest, PasswordError> {
        if plain.is_empty() {
            return Err(PasswordError::EmptyPassword);
        }
        let key = derive(plain, salt, self.iterations);
        Ok(PasswordDigest(format!(
            "{SCHEME}${}${}${}",
            self.iterations,
            hex::encode(salt),
            hex::encode(key)
        )))
    }
}

fn derive(plain: &str, salt: &[u8], iterations: u32) -> [u8; HASH_LEN] {
    let mut out = [0u8; HASH_LEN];
    pbkdf2::pbkdf2_hmac::<Sha256>(plain.as_bytes(), salt, iterations, &mut out);
    out
}

pub fn hash_password(plain: &str, salt: &[u8]) -> Result<PasswordDigest, PasswordError> {
    PasswordHasher::default().hash(plain, salt)
}

pub fn verify_password(plain: &str, digest: &PasswordDigest) -> bool {
    let mut parts = digest.0.split('$');
    let (Some(SCHEME), Some(iters), Some(salt), Some(hash), None) =
        (parts.next(), parts.next(), parts.next(), parts.next(), parts.next())
    else {
        return false;
    };
    let (Ok(iterations), Ok(salt), Ok(expected)) = (iters.parse::<u32>(), hex::decode(salt), hex::decode(hash))
    else {
        return false;
    };
    if plain.is_empty() || expected.len() != HASH_LEN || iterations == 0 {
        return false;
    }
    derive(plain, &salt, iterations).ct_eq(&expected).into()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fast() -> PasswordHasher {
        PasswordHasher::with_iterations(64)
    }

    #[test]
    fn round_trip() {
        let d = fast().hash("s3cret", b"salt-one").unwrap();
        assert!(verify_password("s3cret", &d));
        assert!(!verify_password("s3cret!", &d));
        assert!(!verify_password("", &d));
    }

    #[test]
    fn salts_separate_digests() {
        let a = fast().hash("same", b"salt-a").unwrap();
        let b = fast().hash("same", b"salt-b").unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn empty_password_rejected() {
        assert_eq!(fast().hash("", b"x"), Err(PasswordError::EmptyPassword));
    }

    #[test]
    fn digest_does_not_contain_plaintext() {
        let d = fast().hash("hunter2", b"salt").unwrap();
        assert!(!d.as_str().contains("hunter2"));
        assert_eq!(format!("{d:?}"), "PasswordDigest(..)");
    }

    #[test]
    fn default_iterations_verify() {
        let d = hash_password("pw", b"0123456789abcdef").unwrap();
        assert!(d.as_str().starts_with("pbkdf2-sha256$60000$"));
        assert!(verify_password("pw", &d));
    }

    #[test]
    fn malformed_digest_never_verifies() {
        for s in ["", "pbkdf2-sha256$1$zz$00", "md5$1$00$00", "pbkdf2-sha256$0$00$00"] {
            assert!(!verify_password("pw", &PasswordDigest::from_stored(s)));
        }
    }
}
