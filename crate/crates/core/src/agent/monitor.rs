use std::collections::BTreeMap;
use std::sync::Arc;
use std::thread::{self, JoinHandle};

use parking_lot::Mutex;
use serde::Serialize;

use crate::pool::{DataPool, EventKind, PoolError};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SentinelStats {
    pub events: u64,
    pub last_seq: u64,
    pub by_kind: BTreeMap<EventKind, u64>,
    /// Sequence numbers that arrived out of order or with a gap.
    pub gaps: u64,
}

/// Background consumer of the audit tap. It watches every event in `seq`
/// order and keeps running totals; it stops when the pool closes.
pub struct Sentinel {
    stats: Arc<Mutex<SentinelStats>>,
    handle: Option<JoinHandle<()>>,
}

impl Sentinel {
    pub fn spawn(pool: &DataPool) -> Result<Self, PoolError> {
        let mut tap = pool.subscribe_tap()?;
        let stats = Arc::new(Mutex::new(SentinelStats { last_seq: tap.last_seq(), ..Default::default() }));
        let shared = Arc::clone(&stats);
        let handle = thread::Builder::new()
            .name("sentinel".into())
            .spawn(move || {
                while let Some(ev) = tap.recv() {
                    let mut s = shared.lock();
                    if ev.seq != s.last_seq + 1 {
                        s.gaps += 1;
                    }
                    s.events += 1;
                    s.last_seq = ev.seq;
                    *s.by_kind.entry(ev.kind).or_default() += 1;
                    if ev.kind == EventKind::FraudAlert {
                        tracing::warn!(seq = ev.seq, actor = %ev.actor, "fraud alert");
                    }
                }
            })
            .map_err(PoolError::Io)?;
        Ok(Sentinel { stats, handle: Some(handle) })
    }

    pub fn stats(&self) -> SentinelStats {
        self.stats.lock().clone()
    }

    /// Waits for the pool to close and returns the final totals.
    pub fn join(mut self) -> SentinelStats {
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
        self.stats()
    }
}
