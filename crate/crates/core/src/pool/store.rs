//! On-disk layout of a pool directory:
//!
//! - `events.log`: one JSON audit event per line, append-only.
//! - `snapshot.json`: periodic checkpoint `{schema_version, last_seq, state}`.
//! - `pool.lock`: held with an exclusive OS lock while the pool is open.

use std::fs::{self, File, OpenOptions};
use std::io::{self, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::event::{AuditEvent, Change};
use super::state::PoolState;
use super::PoolError;

pub const SCHEMA_VERSION: u32 = 1;
pub const LOG_FILE: &str = "events.log";
pub const SNAPSHOT_FILE: &str = "snapshot.json";
const LOCK_FILE: &str = "pool.lock";

#[derive(Serialize, Deserialize)]
struct Snapshot {
    schema_version: u32,
    last_seq: u64,
    state: PoolState,
}

pub(crate) struct DiskStore {
    dir: PathBuf,
    log: BufWriter<File>,
    sync: bool,
    _lock: File,
}

impl DiskStore {
    /// Opens (creating if needed) the pool at `dir` and rebuilds its state
    /// from the snapshot plus the log tail. A torn final line, left by a
    /// crash mid-append, is cut off; it was never committed.
    pub(crate) fn open(dir: &Path, sync: bool) -> Result<(DiskStore, PoolState), PoolError> {
        fs::create_dir_all(dir)?;
        let lock = OpenOptions::new().create(true).truncate(false).write(true).open(dir.join(LOCK_FILE))?;
        match lock.try_lock() {
            Ok(()) => {}
            Err(fs::TryLockError::WouldBlock) => return Err(PoolError::Locked(dir.to_path_buf())),
            Err(fs::TryLockError::Error(e)) => return Err(e.into()),
        }

        let mut state = match fs::read(dir.join(SNAPSHOT_FILE)) {
            Ok(bytes) => {
                let snap: Snapshot = serde_json::from_slice(&bytes)
                    .map_err(|e| PoolError::Corrupt(format!("snapshot: {e}")))?;
                if snap.schema_version != SCHEMA_VERSION {
                    return Err(PoolError::Corrupt(format!(
                        "snapshot schema {} unsupported (expected {SCHEMA_VERSION})",
                        snap.schema_version
                    )));
                }
                if snap.state.last_seq != snap.last_seq {
                    return Err(PoolError::Corrupt("snapshot header disagrees with its state".into()));
                }
                snap.state
            }
            Err(e) if e.kind() == io::ErrorKind::NotFound => PoolState::default(),
            Err(e) => return Err(e.into()),
        };

        let log_path = dir.join(LOG_FILE);
        let mut file = OpenOptions::new().create(true).read(true).append(true).open(&log_path)?;
        let mut bytes = Vec::new();
        file.read_to_end(&mut bytes)?;
        let committed = replay(&bytes, &mut state)?;
        if committed < bytes.len() {
            tracing::warn!(
                dropped = bytes.len() - committed,
                "discarding torn tail of {}",
                log_path.display()
            );
            file.set_len(committed as u64)?;
            file.seek(SeekFrom::End(0))?;
        }

        Ok((
            DiskStore {
                dir: dir.to_path_buf(),
                log: BufWriter::new(file),
                sync,
                _lock: lock,
            },
            state,
        ))
    }

    pub(crate) fn append(&mut self, event: &AuditEvent) -> Result<(), PoolError> {
        let mut line = serde_json::to_vec(event).map_err(|e| PoolError::Corrupt(e.to_string()))?;
        line.push(b'\n');
        self.log.write_all(&line)?;
        self.log.flush()?;
        if self.sync {
            self.log.get_ref().sync_data()?;
        }
        Ok(())
    }

    pub(crate) fn checkpoint(&mut self, state: &PoolState) -> Result<(), PoolError> {
        self.log.flush()?;
        self.log.get_ref().sync_data()?;
        let snap = Snapshot {
            schema_version: SCHEMA_VERSION,
            last_seq: state.last_seq,
            state: state.clone(),
        };
        let tmp = self.dir.join(format!("{SNAPSHOT_FILE}.tmp"));
        {
            let mut f = File::create(&tmp)?;
            serde_json::to_writer(&mut f, &snap).map_err(|e| PoolError::Corrupt(e.to_string()))?;
            f.sync_all()?;
        }
        fs::rename(tmp, self.dir.join(SNAPSHOT_FILE))?;
        Ok(())
    }

    pub(crate) fn flush(&mut self) -> Result<(), PoolError> {
        self.log.flush()?;
        self.log.get_ref().sync_data()?;
        Ok(())
    }
}

/// Applies every complete line of `bytes` beyond the state's `last_seq`.
/// Returns the byte length of the committed prefix.
fn replay(bytes: &[u8], state: &mut PoolState) -> Result<usize, PoolError> {
    let mut offset = 0;
    let mut line_no = 0;
    while let Some(nl) = bytes[offset..].iter().position(|&b| b == b'\n') {
        line_no += 1;
        let line = &bytes[offset..offset + nl];
        offset += nl + 1;
        if line.is_empty() {
            continue;
        }
        let event: AuditEvent = serde_json::from_slice(line)
            .map_err(|e| PoolError::Corrupt(format!("{LOG_FILE} line {line_no}: {e}")))?;
        if event.seq <= state.last_seq {
            continue;
        }
        if event.seq != state.last_seq + 1 {
            return Err(PoolError::Corrupt(format!(
                "{LOG_FILE} line {line_no}: seq {} follows {}",
                event.seq, state.last_seq
            )));
        }
        let change = Change::from_payload(event.kind, &event.payload)
            .map_err(|e| PoolError::Corrupt(format!("{LOG_FILE} line {line_no}: {e}")))?;
        state
            .apply(event.seq, event.at, &change)
            .map_err(|e| PoolError::Corrupt(format!("{LOG_FILE} line {line_no}: {e}")))?;
    }
    Ok(offset)
}

/// Rebuilds state from the log file alone, ignoring any snapshot. Used to
/// audit that the live state equals what the log says.
pub fn replay_log_file(path: &Path) -> Result<PoolState, PoolError> {
    let bytes = fs::read(path)?;
    let mut state = PoolState::default();
    replay(&bytes, &mut state)?;
    Ok(state)
}
