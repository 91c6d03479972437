use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

use crate::domain::{TaxpayerId, Tin};

/// The message sent to a taxpayer when their TIN is issued.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Notification {
    pub tin: Tin,
    pub taxpayer_id: TaxpayerId,
    pub full_name: String,
    pub email: String,
    pub phone: String,
    pub default_password: String,
    pub body: String,
    pub sent_at: DateTime<Utc>,
}

impl Notification {
    pub(crate) fn body_for(tin: &Tin, default_password: &str) -> String {
        format!(
            "Your TIN is {}. Your default password is {default_password}. You will be asked to change it when you first log in.",
            tin.display()
        )
    }
}

/// Delivery channel for TIN notifications (SMS or email in deployment).
pub trait Notifier: Send + Sync {
    fn deliver(&self, note: &Notification) -> io::Result<()>;
}

/// Keeps every message in memory.
#[derive(Debug, Default)]
pub struct MemoryNotifier {
    sent: Mutex<Vec<Notification>>,
}

impl MemoryNotifier {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn sent(&self) -> Vec<Notification> {
        self.sent.lock().clone()
    }

    pub fn last_for(&self, tin: &Tin) -> Option<Notification> {
        self.sent.lock().iter().rev().find(|n| &n.tin == tin).cloned()
    }
}

impl Notifier for MemoryNotifier {
    fn deliver(&self, note: &Notification) -> io::Result<()> {
        self.sent.lock().push(note.clone());
        Ok(())
    }
}

/// Writes each message to `<dir>/<TIN>.json` for an outbound gateway to pick up.
#[derive(Debug, Clone)]
pub struct SpoolNotifier {
    dir: PathBuf,
}

impl SpoolNotifier {
    pub fn new(dir: impl Into<PathBuf>) -> io::Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(SpoolNotifier { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(dir: &Path, tin: &Tin) -> PathBuf {
        dir.join(format!("{}.json", tin.as_str()))
    }

    pub fn read(dir: &Path, tin: &Tin) -> io::Result<Notification> {
        let text = fs::read_to_string(Self::path_for(dir, tin))?;
        serde_json::from_str(&text).map_err(io::Error::other)
    }
}

impl Notifier for SpoolNotifier {
    fn deliver(&self, note: &Notification) -> io::Result<()> {
        let path = Self::path_for(&self.dir, &note.tin);
        let tmp = path.with_extension("json.tmp");
        fs::write(&tmp, serde_json::to_vec_pretty(note).map_err(io::Error::other)?)?;
        fs::rename(&tmp, &path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::mint_tin;

    fn note() -> Notification {
        let tin = mint_tin(7).unwrap();
        Notification {
            body: Notification::body_for(&tin, "Ab3dEf9hJk"),
            tin,
            taxpayer_id: TaxpayerId::from_serial(1),
            full_name: "Ada Obi".into(),
            email: "ada@example.ng".into(),
            phone: String::new(),
            default_password: "Ab3dEf9hJk".into(),
            sent_at: DateTime::UNIX_EPOCH,
        }
    }

    #[test]
    fn body_carries_tin_and_password() {
        let n = note();
        assert!(n.body.contains(&n.tin.display()));
        assert!(n.body.contains("Ab3dEf9hJk"));
    }

    #[test]
    fn spool_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let spool = SpoolNotifier::new(dir.path().join("out")).unwrap();
        let n = note();
        spool.deliver(&n).unwrap();
        assert_eq!(SpoolNotifier::read(spool.dir(), &n.tin).unwrap(), n);
    }
}
