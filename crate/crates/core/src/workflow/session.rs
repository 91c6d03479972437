use std::collections::HashMap;

use chrono::{DateTime, Duration, Utc};
use parking_lot::Mutex;
use serde::Serialize;

use crate::domain::SessionRole;

pub const DEFAULT_IDLE_MINUTES: i64 = 30;

/// A bearer-token login. `expires_at` slides forward on every use.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Session {
    #[serde(skip)]
    pub token: String,
    pub principal: String,
    pub role: SessionRole,
    pub issued_at: DateTime<Utc>,
    pub expires_at: DateTime<Utc>,
    /// Set until a taxpayer replaces their default password.
    pub restricted: bool,
}

#[derive(Debug)]
pub struct SessionStore {
    idle: Duration,
    live: Mutex<HashMap<String, Session>>,
}

impl SessionStore {
    pub fn new(idle: Duration) -> Self {
        SessionStore { idle, live: Mutex::new(HashMap::new()) }
    }

    pub fn idle(&self) -> Duration {
        self.idle
    }

    pub fn open(&self, token: String, principal: &str, role: SessionRole, restricted: bool, now: DateTime<Utc>) -> Session {
        let session = Session {
            token: token.clone(),
            principal: principal.to_string(),
            role,
            issued_at: now,
            expires_at: now + self.idle,
            restricted,
        };
        self.live.lock().insert(token, session.clone());
        session
    }

    /// Returns the session and extends it, or drops it if it has expired.
    pub fn touch(&self, token: &str, now: DateTime<Utc>) -> Option<Session> {
        let mut live = self.live.lock();
        let s = live.get_mut(token)?;
        if now > s.expires_at {
            live.remove(token);
            return None;
        }
        s.expires_at = now + self.idle;
        Some(s.clone())
    }

    pub fn revoke(&self, token: &str) -> bool {
        self.live.lock().remove(token).is_some()
    }

    pub fn lift_restriction(&self, principal: &str) {
        for s in self.live.lock().values_mut().filter(|s| s.principal == principal) {
            s.restricted = false;
        }
    }

    pub fn len(&self) -> usize {
        self.live.lock().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
