use std::sync::mpsc::{Receiver, RecvTimeoutError, TryRecvError};
use std::sync::Arc;
use std::time::Duration;

use super::event::AuditEvent;

/// Ordered feed of audit events from the point of subscription onward.
///
/// Delivery is in `seq` order; anything at or below the last seen `seq` is
/// dropped, so each event is yielded exactly once. The feed ends when the
/// pool closes.
pub struct Tap {
    rx: Receiver<Arc<AuditEvent>>,
    last_seq: u64,
}

impl Tap {
    pub(crate) fn new(rx: Receiver<Arc<AuditEvent>>, last_seq: u64) -> Self {
        Tap { rx, last_seq }
    }

    fn accept(&mut self, ev: Arc<AuditEvent>) -> Option<Arc<AuditEvent>> {
        if ev.seq <= self.last_seq {
            return None;
        }
        self.last_seq = ev.seq;
        Some(ev)
    }

    /// Blocks until the next event; `None` once the pool has closed.
    pub fn recv(&mut self) -> Option<Arc<AuditEvent>> {
        loop {
            let ev = self.rx.recv().ok()?;
            if let Some(ev) = self.accept(ev) {
                return Some(ev);
            }
        }
    }

    /// Waits up to `timeout` for the next event. Fails with `Disconnected`
    /// once the pool has closed.
    pub fn recv_timeout(&mut self, timeout: Duration) -> Result<Arc<AuditEvent>, RecvTimeoutError> {
        loop {
            let ev = self.rx.recv_timeout(timeout)?;
            if let Some(ev) = self.accept(ev) {
                return Ok(ev);
            }
        }
    }

    pub fn try_recv(&mut self) -> Option<Arc<AuditEvent>> {
        loop {
            match self.rx.try_recv() {
                Ok(ev) => {
                    if let Some(ev) = self.accept(ev) {
                        return Some(ev);
                    }
                }
                Err(TryRecvError::Empty | TryRecvError::Disconnected) => return None,
            }
        }
    }

    pub fn last_seq(&self) -> u64 {
        self.last_seq
    }
}

impl Iterator for Tap {
    type Item = Arc<AuditEvent>;

    fn next(&mut self) -> Option<Self::Item> {
        self.recv()
    }
}
