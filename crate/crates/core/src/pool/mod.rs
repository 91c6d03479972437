//! The data pool: every record the system holds, plus the append-only,
//! sequence-numbered audit log the agent taps.
//!
//! All mutations funnel through one write lock, so `seq` is gap-free and
//! code redemption is linearizable. State is a pure fold over the log:
//! reopening a pool replays the log on top of the last snapshot and lands
//! on exactly the committed state.

mod event;
mod state;
mod store;
mod tap;

use std::io;
use std::path::{Path, PathBuf};
use std::sync::mpsc::{self, Sender};
use std::sync::Arc;

use chrono::{DateTime, Utc};
use parking_lot::RwLock;
use thiserror::Error;

pub use event::{AuditEvent, Change, EventKind, NewEvent, Payload, PayloadError, Settlement, ACTOR_AGENT, ACTOR_SYSTEM};
pub use state::{CodeActivity, LoginStats, PoolState, Serials};
pub use store::{replay_log_file, LOG_FILE, SCHEMA_VERSION, SNAPSHOT_FILE};
pub use tap::Tap;

use crate::domain::*;
use store::DiskStore;

#[derive(Debug, Error)]
pub enum PoolError {
    #[error("the data pool is closed")]
    PoolClosed,
    #[error("integrity violation: {0}")]
    IntegrityViolation(String),
    #[error("TIN {0} already exists")]
    DuplicateTin(Tin),
    #[error("username {0:?} already exists")]
    DuplicateUsername(String),
    #[error("reference code already exists")]
    DuplicateCode,
    #[error("taxpayer already holds live code {0}")]
    OutstandingCode(CodeText),
    #[error("TIN already issued for {0}")]
    AlreadyIssued(TaxpayerId),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("reference code already redeemed")]
    AlreadyRedeemed,
    #[error("reference code expired or voided")]
    ExpiredOrVoided,
    #[error("invalid event: {0}")]
    InvalidEvent(String),
    #[error("pool at {0} is in use by another process")]
    Locked(PathBuf),
    #[error("pool files are corrupt: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PoolOptions {
    /// Write a snapshot after this many commits; 0 disables periodic checkpoints.
    pub checkpoint_every: u64,
    /// `fsync` the log after every append.
    pub sync_each_append: bool,
}

impl Default for PoolOptions {
    fn default() -> Self {
        PoolOptions { checkpoint_every: 1000, sync_each_append: false }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaxpayerDraft {
    pub full_name: String,
    pub email: String,
    pub phone: String,
    pub tin: Option<Tin>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BusinessDraft {
    pub owner: TaxpayerId,
    pub business_name: String,
    pub location: String,
    pub sector: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NewRecord {
    Taxpayer(TaxpayerDraft),
    Business(BusinessDraft),
    Financials { business_id: BusinessId, financials: MonthlyFinancials },
    Staff(UserAccount),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RecordId {
    Taxpayer(TaxpayerId),
    Tin(Tin),
    Business(BusinessId),
    User(String),
    Code(CodeText),
    Transaction(TxnId),
    Receipt(CodeText),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Record {
    Taxpayer(TaxpayerRecord),
    Business(BusinessRecord),
    User(UserAccount),
    Code(ReferenceCode),
    Transaction(TransactionRecord),
    Receipt(Receipt),
}

/// Tier and tax for one business, as produced by a mining run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TierAssignment {
    pub business_id: BusinessId,
    pub period: Period,
    pub net_profit: Money,
    pub tier: Tier,
    pub tax: Money,
}

/// A fraud alert before the pool attaches ids.
#[derive(Debug, Clone, PartialEq)]
pub struct AlertDraft {
    pub probe: String,
    pub presenter: Option<Tin>,
    pub cash: Option<Money>,
    pub rule_hits: Vec<RuleHit>,
    pub ann_score: Option<f64>,
    pub void_code: bool,
    pub teller: Option<String>,
}

struct Inner {
    state: PoolState,
    store: Option<DiskStore>,
    taps: Vec<Sender<Arc<AuditEvent>>>,
    closed: bool,
    since_checkpoint: u64,
    options: PoolOptions,
}

impl Inner {
    fn commit(&mut self, actor: &str, at: DateTime<Utc>, change: Change) -> Result<u64, PoolError> {
        if self.closed {
            return Err(PoolError::PoolClosed);
        }
        self.state.validate(&change, at)?;
        let seq = self.state.last_seq + 1;
        let event = AuditEvent {
            seq,
            at,
            actor: actor.to_string(),
            kind: change.kind(),
            payload: change.to_payload(),
        };
        debug_assert_eq!(
            Change::from_payload(event.kind, &event.payload).as_ref(),
            Ok(&change),
            "payload must round-trip"
        );
        if let Some(store) = self.store.as_mut() {
            store.append(&event)?;
        }
        self.state.apply(seq, at, &change).expect("validated above");

        let event = Arc::new(event);
        self.taps.retain(|tx| tx.send(Arc::clone(&event)).is_ok());

        self.since_checkpoint += 1;
        if self.options.checkpoint_every > 0 && self.since_checkpoint >= self.options.checkpoint_every {
            if let Some(store) = self.store.as_mut() {
                store.checkpoint(&self.state)?;
            }
            self.since_checkpoint = 0;
        }
        Ok(seq)
    }
}

pub struct DataPool {
    inner: RwLock<Inner>,
    dir: Option<PathBuf>,
}

impl DataPool {
    /// A pool with no files behind it.
    pub fn in_memory() -> Self {
        DataPool {
            inner: RwLock::new(Inner {
                state: PoolState::default(),
                store: None,
                taps: Vec::new(),
                closed: false,
                since_checkpoint: 0,
                options: PoolOptions { checkpoint_every: 0, sync_each_append: false },
            }),
            dir: None,
        }
    }

    pub fn open(dir: impl AsRef<Path>, options: PoolOptions) -> Result<Self, PoolError> {
        let dir = dir.as_ref();
        let (store, state) = DiskStore::open(dir, options.sync_each_append)?;
        tracing::info!(dir = %dir.display(), last_seq = state.last_seq, "opened data pool");
        Ok(DataPool {
            inner: RwLock::new(Inner {
                state,
                store: Some(store),
                taps: Vec::new(),
                closed: false,
                since_checkpoint: 0,
                options,
            }),
            dir: Some(dir.to_path_buf()),
        })
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    /// Runs `f` against the latest committed state.
    pub fn read<R>(&self, f: impl FnOnce(&PoolState) -> R) -> R {
        f(&self.inner.read().state)
    }

    pub fn snapshot(&self) -> PoolState {
        self.inner.read().state.clone()
    }

    pub fn digest(&self) -> String {
        self.inner.read().state.digest()
    }

    pub fn last_seq(&self) -> u64 {
        self.inner.read().state.last_seq
    }

    pub fn is_closed(&self) -> bool {
        self.inner.read().closed
    }

    fn commit_with<R>(
        &self,
        actor: &str,
        at: DateTime<Utc>,
        build: impl FnOnce(&PoolState) -> Result<(Change, R), PoolError>,
    ) -> Result<(u64, R), PoolError> {
        let mut inner = self.inner.write();
        if inner.closed {
            return Err(PoolError::PoolClosed);
        }
        let (change, out) = build(&inner.state)?;
        let seq = inner.commit(actor, at, change)?;
        Ok((seq, out))
    }

    fn commit(&self, actor: &str, at: DateTime<Utc>, change: Change) -> Result<u64, PoolError> {
        self.inner.write().commit(actor, at, change)
    }

    /// Appends a raw event. The payload must describe a valid change; the
    /// pool assigns the next `seq`.
    pub fn append_event(&self, event: NewEvent) -> Result<u64, PoolError> {
        let change =
            Change::from_payload(event.kind, &event.payload).map_err(|e| PoolError::InvalidEvent(e.to_string()))?;
        self.commit(&event.actor, event.at, change)
    }

    pub fn subscribe_tap(&self) -> Result<Tap, PoolError> {
        let mut inner = self.inner.write();
        if inner.closed {
            return Err(PoolError::PoolClosed);
        }
        let (tx, rx) = mpsc::channel();
        inner.taps.push(tx);
        Ok(Tap::new(rx, inner.state.last_seq))
    }

    pub fn put_record(&self, actor: &str, at: DateTime<Utc>, record: NewRecord) -> Result<RecordId, PoolError> {
        let (_, id) = self.commit_with(actor, at, |s| {
            Ok(match record {
                NewRecord::Taxpayer(d) => {
                    let id = s.next_taxpayer_id();
                    let rec = TaxpayerRecord {
                        taxpayer_id: id.clone(),
                        tin: d.tin,
                        full_name: d.full_name,
                        email: d.email,
                        phone: d.phone,
                        password_hash: None,
                        must_change_password: false,
                        status: AccountStatus::Provisional,
                        captured_at: at,
                    };
                    (Change::CaptureTaxpayer(rec), RecordId::Taxpayer(id))
                }
                NewRecord::Business(d) => {
                    let id = s.next_business_id();
                    let rec = BusinessRecord {
                        business_id: id.clone(),
                        owner: d.owner,
                        business_name: d.business_name,
                        location: d.location,
                        sector: d.sector,
                        financials: Vec::new(),
                        assessment: None,
                    };
                    (Change::CaptureBusiness(rec), RecordId::Business(id))
                }
                NewRecord::Financials { business_id, financials } => {
                    let id = RecordId::Business(business_id.clone());
                    (Change::CaptureFinancials { business_id, financials }, id)
                }
                NewRecord::Staff(account) => {
                    let id = RecordId::User(account.username.clone());
                    (Change::StaffCreated(account), id)
                }
            })
        })?;
        Ok(id)
    }

    pub fn get_record(&self, id: &RecordId) -> Option<Record> {
        self.read(|s| match id {
            RecordId::Taxpayer(id) => s.taxpayer(id).cloned().map(Record::Taxpayer),
            RecordId::Tin(tin) => s.taxpayer_by_tin(tin).cloned().map(Record::Taxpayer),
            RecordId::Business(id) => s.business(id).cloned().map(Record::Business),
            RecordId::User(name) => s.user(name).cloned().map(Record::User),
            RecordId::Code(code) => s.code(code).cloned().map(Record::Code),
            RecordId::Transaction(id) => s.transaction(id).cloned().map(Record::Transaction),
            RecordId::Receipt(code) => s.receipt(code).cloned().map(Record::Receipt),
        })
    }

    /// Mints the next TIN for `taxpayer_id` and stores its first password.
    pub fn issue_tin(
        &self,
        actor: &str,
        at: DateTime<Utc>,
        taxpayer_id: &TaxpayerId,
        password_hash: PasswordDigest,
    ) -> Result<Tin, PoolError> {
        let (_, tin) = self.commit_with(actor, at, |s| {
            // Skip counters whose TIN was captured directly.
            let mut counter = s.next_tin_counter();
            let tin = loop {
                let tin = mint_tin(counter).map_err(|e| PoolError::IntegrityViolation(e.to_string()))?;
                if s.taxpayer_by_tin(&tin).is_none() {
                    break tin;
                }
                counter += 1;
            };
            let change = Change::TinIssued { taxpayer_id: taxpayer_id.clone(), tin: tin.clone(), password_hash };
            Ok((change, tin))
        })?;
        Ok(tin)
    }

    pub fn change_password(
        &self,
        actor: &str,
        at: DateTime<Utc>,
        tin: &Tin,
        password_hash: PasswordDigest,
    ) -> Result<u64, PoolError> {
        self.commit(actor, at, Change::PasswordChanged { tin: tin.clone(), password_hash })
    }

    /// Writes a mining run's assignments and its summary as one atomic batch.
    /// Returns the run id.
    pub fn commit_mining(
        &self,
        actor: &str,
        at: DateTime<Utc>,
        assignments: &[TierAssignment],
        status: &str,
        rejected: usize,
    ) -> Result<String, PoolError> {
        let mut inner = self.inner.write();
        if inner.closed {
            return Err(PoolError::PoolClosed);
        }
        let run_id = format!("RUN{:06}", inner.state.serials.mining_runs + 1);
        for a in assignments {
            if inner.state.business(&a.business_id).is_none() {
                return Err(PoolError::IntegrityViolation(format!("unknown business {}", a.business_id)));
            }
        }
        for a in assignments {
            let assessment = Assessment {
                period: a.period,
                net_profit: a.net_profit,
                tier: a.tier,
                tax: a.tax,
                source: AssessmentSource::Mining { run_id: run_id.clone() },
                assessed_at: at,
            };
            inner.commit(actor, at, Change::TierAssigned { business_id: a.business_id.clone(), assessment })?;
        }
        inner.commit(
            actor,
            at,
            Change::MiningRun {
                run_id: run_id.clone(),
                status: status.to_string(),
                assessed: assignments.len(),
                rejected,
            },
        )?;
        Ok(run_id)
    }

    /// Replaces the tax on an already-assessed business after a staff review.
    pub fn review_assessment(
        &self,
        reviewer: &str,
        at: DateTime<Utc>,
        business_id: &BusinessId,
        tax: Money,
    ) -> Result<Assessment, PoolError> {
        let (_, a) = self.commit_with(reviewer, at, |s| {
            let current = s
                .business(business_id)
                .and_then(|b| b.assessment.clone())
                .ok_or_else(|| PoolError::NotFound(format!("assessment for {business_id}")))?;
            let assessment = Assessment {
                tax,
                source: AssessmentSource::Review { reviewer: reviewer.to_string() },
                assessed_at: at,
                ..current
            };
            Ok((
                Change::TierAssigned { business_id: business_id.clone(), assessment: assessment.clone() },
                assessment,
            ))
        })?;
        Ok(a)
    }

    pub fn issue_code(&self, actor: &str, at: DateTime<Utc>, code: ReferenceCode) -> Result<u64, PoolError> {
        self.commit(actor, at, Change::CodeIssued(code))
    }

    pub fn record_lookup(
        &self,
        actor: &str,
        at: DateTime<Utc>,
        probe: &str,
        presenter: Option<&Tin>,
        outcome: LookupOutcome,
        expire: bool,
    ) -> Result<u64, PoolError> {
        self.commit(
            actor,
            at,
            Change::CodeLookup { probe: probe.to_string(), presenter: presenter.cloned(), outcome, expire },
        )
    }

    /// Atomically moves `code` from Issued to Redeemed. Exactly one caller
    /// can ever succeed per code.
    pub fn redeem_code(&self, actor: &str, at: DateTime<Utc>, code: &CodeText) -> Result<ReferenceCode, PoolError> {
        let (_, rec) = self.commit_with(actor, at, |s| {
            let mut rec = s.code(code).cloned().ok_or_else(|| PoolError::NotFound(code.to_string()))?;
            rec.status = CodeStatus::Redeemed;
            Ok((Change::PaymentRecorded { code: code.clone(), settlement: None }, rec))
        })?;
        Ok(rec)
    }

    /// Redeems `code` and records the successful transaction and its receipt
    /// in one commit. The amount paid is the code's assessed amount.
    pub fn record_payment(
        &self,
        teller: &str,
        at: DateTime<Utc>,
        code: &CodeText,
    ) -> Result<(TransactionRecord, Receipt), PoolError> {
        let (_, out) = self.commit_with(teller, at, |s| {
            let rec = s.code(code).ok_or_else(|| PoolError::NotFound(code.to_string()))?;
            let taxpayer = s
                .taxpayer(&rec.taxpayer_id)
                .ok_or_else(|| PoolError::IntegrityViolation(format!("code owner {} missing", rec.owner)))?;
            let txn = TransactionRecord {
                txn_id: s.next_txn_id(),
                code: code.clone(),
                payer: rec.owner.clone(),
                amount_paid: rec.assessed_amount,
                teller: teller.to_string(),
                at,
                outcome: TxnOutcome::Success,
            };
            let receipt = Receipt {
                receipt_no: s.next_receipt_no(),
                business_name: billing_name(s, &rec.taxpayer_id),
                taxpayer_name: taxpayer.full_name.clone(),
                amount_paid: txn.amount_paid,
                date: at,
                reference_code: code.clone(),
                tin: rec.owner.clone(),
                txn_id: txn.txn_id.clone(),
            };
            let settlement = Settlement { txn: txn.clone(), receipt: receipt.clone() };
            Ok((Change::PaymentRecorded { code: code.clone(), settlement: Some(settlement) }, (txn, receipt)))
        })?;
        Ok(out)
    }

    /// Records a fraud alert. When the probed code exists a Rejected
    /// transaction is attached; `void_code` only takes effect on Issued codes.
    pub fn record_alert(
        &self,
        actor: &str,
        at: DateTime<Utc>,
        draft: AlertDraft,
    ) -> Result<Option<TransactionRecord>, PoolError> {
        let (_, txn) = self.commit_with(actor, at, |s| {
            let existing = state::parse_probe(&draft.probe).and_then(|c| s.code(&c));
            let rejected_txn = match (existing, &draft.presenter, draft.cash, &draft.teller) {
                (Some(rec), Some(payer), Some(cash), Some(teller)) => Some(TransactionRecord {
                    txn_id: s.next_txn_id(),
                    code: rec.code.clone(),
                    payer: payer.clone(),
                    amount_paid: cash,
                    teller: teller.clone(),
                    at,
                    outcome: TxnOutcome::Rejected,
                }),
                _ => None,
            };
            let void_code = draft.void_code && existing.is_some_and(|c| c.status == CodeStatus::Issued);
            let change = Change::FraudAlert {
                probe: draft.probe,
                presenter: draft.presenter,
                cash: draft.cash,
                rule_hits: draft.rule_hits,
                ann_score: draft.ann_score,
                void_code,
                rejected_txn: rejected_txn.clone(),
            };
            Ok((change, rejected_txn))
        })?;
        Ok(txn)
    }

    pub fn record_login(&self, at: DateTime<Utc>, principal: &str, ok: bool) -> Result<u64, PoolError> {
        let principal = principal.to_string();
        let change = if ok { Change::LoginOk { principal } } else { Change::LoginFail { principal } };
        self.commit(ACTOR_SYSTEM, at, change)
    }

    pub fn record_alteration(
        &self,
        at: DateTime<Utc>,
        principal: &str,
        role: &str,
        business_id: Option<&BusinessId>,
        code: Option<&CodeText>,
        attempted: Money,
    ) -> Result<u64, PoolError> {
        self.commit(
            ACTOR_AGENT,
            at,
            Change::AlterationBlocked {
                principal: principal.to_string(),
                role: role.to_string(),
                business_id: business_id.cloned(),
                code: code.cloned(),
                attempted,
            },
        )
    }

    /// Writes a snapshot now.
    pub fn checkpoint(&self) -> Result<(), PoolError> {
        let mut inner = self.inner.write();
        let Inner { state, store, since_checkpoint, .. } = &mut *inner;
        if let Some(store) = store.as_mut() {
            store.checkpoint(state)?;
        }
        *since_checkpoint = 0;
        Ok(())
    }

    /// Checkpoints, flushes, and ends every tap. Further writes fail with
    /// `PoolClosed`.
    pub fn close(&self) -> Result<(), PoolError> {
        let mut inner = self.inner.write();
        if inner.closed {
            return Ok(());
        }
        inner.closed = true;
        inner.taps.clear();
        let Inner { state, store, .. } = &mut *inner;
        if let Some(store) = store.as_mut() {
            store.checkpoint(state)?;
            store.flush()?;
        }
        Ok(())
    }
}

/// Business name printed on a taxpayer's slip and receipt: every assessed
/// business they own, in id order.
pub fn billing_name(state: &PoolState, owner: &TaxpayerId) -> String {
    let names: Vec<&str> = state
        .businesses_of(owner)
        .filter(|b| b.assessment.as_ref().is_some_and(|a| a.tax.is_positive()))
        .map(|b| b.business_name.as_str())
        .collect();
    if names.is_empty() {
        state.businesses_of(owner).map(|b| b.business_name.as_str()).collect::<Vec<_>>().join(", ")
    } else {
        names.join(", ")
    }
}

#[cfg(test)]
mod tests;
