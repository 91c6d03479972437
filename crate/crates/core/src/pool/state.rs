use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::event::{Change, Settlement};
use super::PoolError;
use crate::domain::*;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Serials {
    pub taxpayer: u64,
    pub business: u64,
    pub txn: u64,
    pub receipt: u64,
    pub tin: u64,
    pub mining_runs: u64,
}

/// Per-code counters the agent reads when featurizing a payment.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeActivity {
    pub lookups: u32,
    pub alteration_attempts: u32,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoginStats {
    pub ok: u32,
    pub failed: u32,
}

/// Every entity in the data pool. Only [`PoolState::apply`] mutates it.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolState {
    pub(crate) users: BTreeMap<String, UserAccount>,
    pub(crate) taxpayers: BTreeMap<TaxpayerId, TaxpayerRecord>,
    pub(crate) tins: BTreeMap<Tin, TaxpayerId>,
    pub(crate) businesses: BTreeMap<BusinessId, BusinessRecord>,
    pub(crate) codes: BTreeMap<CodeText, ReferenceCode>,
    pub(crate) transactions: BTreeMap<TxnId, TransactionRecord>,
    pub(crate) receipts: BTreeMap<CodeText, Receipt>,
    pub(crate) code_activity: BTreeMap<CodeText, CodeActivity>,
    pub(crate) logins: BTreeMap<String, LoginStats>,
    pub(crate) serials: Serials,
    pub(crate) fraud_alerts: u64,
    pub(crate) last_seq: u64,
}

impl PoolState {
    pub fn user(&self, username: &str) -> Option<&UserAccount> {
        self.users.get(username)
    }

    pub fn users(&self) -> impl Iterator<Item = &UserAccount> {
        self.users.values()
    }

    pub fn taxpayer(&self, id: &TaxpayerId) -> Option<&TaxpayerRecord> {
        self.taxpayers.get(id)
    }

    pub fn taxpayer_by_tin(&self, tin: &Tin) -> Option<&TaxpayerRecord> {
        self.tins.get(tin).and_then(|id| self.taxpayers.get(id))
    }

    pub fn taxpayers(&self) -> impl Iterator<Item = &TaxpayerRecord> {
        self.taxpayers.values()
    }

    pub fn business(&self, id: &BusinessId) -> Option<&BusinessRecord> {
        self.businesses.get(id)
    }

    pub fn businesses(&self) -> impl Iterator<Item = &BusinessRecord> {
        self.businesses.values()
    }

    pub fn businesses_of<'a>(&'a self, owner: &'a TaxpayerId) -> impl Iterator<Item = &'a BusinessRecord> + 'a {
        self.businesses.values().filter(move |b| &b.owner == owner)
    }

    pub fn code(&self, code: &CodeText) -> Option<&ReferenceCode> {
        self.codes.get(code)
    }

    pub fn codes(&self) -> impl Iterator<Item = &ReferenceCode> {
        self.codes.values()
    }

    pub fn live_code_of(&self, owner: &Tin, now: DateTime<Utc>) -> Option<&ReferenceCode> {
        self.codes.values().find(|c| &c.owner == owner && c.is_live(now))
    }

    pub fn transaction(&self, id: &TxnId) -> Option<&TransactionRecord> {
        self.transactions.get(id)
    }

    pub fn transactions(&self) -> impl Iterator<Item = &TransactionRecord> {
        self.transactions.values()
    }

    pub fn receipt(&self, code: &CodeText) -> Option<&Receipt> {
        self.receipts.get(code)
    }

    pub fn receipts(&self) -> impl Iterator<Item = &Receipt> {
        self.receipts.values()
    }

    pub fn code_activity(&self, code: &CodeText) -> CodeActivity {
        self.code_activity.get(code).cloned().unwrap_or_default()
    }

    pub fn login_stats(&self, principal: &str) -> LoginStats {
        self.logins.get(principal).cloned().unwrap_or_default()
    }

    pub fn serials(&self) -> &Serials {
        &self.serials
    }

    pub fn fraud_alerts(&self) -> u64 {
        self.fraud_alerts
    }

    pub fn last_seq(&self) -> u64 {
        self.last_seq
    }

    pub fn has_admin(&self) -> bool {
        self.users.values().any(|u| u.role == Role::Admin)
    }

    /// SHA-256 over the canonical JSON encoding. Two states are equal iff
    /// their digests are.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("pool state always serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub(crate) fn next_taxpayer_id(&self) -> TaxpayerId {
        TaxpayerId::from_serial(self.serials.taxpayer + 1)
    }

    pub(crate) fn next_business_id(&self) -> BusinessId {
        BusinessId::from_serial(self.serials.business + 1)
    }

    pub(crate) fn next_txn_id(&self) -> TxnId {
        TxnId::from_serial(self.serials.txn + 1)
    }

    pub(crate) fn next_receipt_no(&self) -> ReceiptNo {
        ReceiptNo::from_serial(self.serials.receipt + 1)
    }

    pub(crate) fn next_tin_counter(&self) -> u64 {
        self.serials.tin + 1
    }

    /// Checks every integrity rule for `change` without mutating anything.
    pub(crate) fn validate(&self, change: &Change, at: DateTime<Utc>) -> Result<(), PoolError> {
        match change {
            Change::StaffCreated(u) => {
                if u.username.trim().is_empty() {
                    return Err(PoolError::IntegrityViolation("empty username".into()));
                }
                if self.users.contains_key(&u.username) {
                    return Err(PoolError::DuplicateUsername(u.username.clone()));
                }
            }
            Change::CaptureTaxpayer(t) => {
                expect_id(&t.taxpayer_id, &self.next_taxpayer_id())?;
                if t.full_name.trim().is_empty() {
                    return Err(PoolError::IntegrityViolation("taxpayer name is empty".into()));
                }
                if t.email.trim().is_empty() && t.phone.trim().is_empty() {
                    return Err(PoolError::IntegrityViolation("taxpayer needs an email or phone".into()));
                }
                if let Some(tin) = &t.tin {
                    if self.tins.contains_key(tin) {
                        return Err(PoolError::DuplicateTin(tin.clone()));
                    }
                }
            }
            Change::CaptureBusiness(b) => {
                expect_id(&b.business_id, &self.next_business_id())?;
                if !self.taxpayers.contains_key(&b.owner) {
                    return Err(PoolError::IntegrityViolation(format!("unknown owner {}", b.owner)));
                }
                if b.business_name.trim().is_empty() {
                    return Err(PoolError::IntegrityViolation("business name is empty".into()));
                }
                if !b.financials.is_empty() || b.assessment.is_some() {
                    return Err(PoolError::IntegrityViolation(
                        "financials and assessments are captured separately".into(),
                    ));
                }
            }
            Change::CaptureFinancials { business_id, financials } => {
                let b = self
                    .businesses
                    .get(business_id)
                    .ok_or_else(|| PoolError::IntegrityViolation(format!("unknown business {business_id}")))?;
                if financials.revenue.kobo() < 0 || financials.expenses.kobo() < 0 {
                    return Err(PoolError::IntegrityViolation("revenue and expenses must be >= 0".into()));
                }
                if let Some(latest) = b.financials.iter().map(|f| f.captured_at).max() {
                    if financials.captured_at < latest {
                        return Err(PoolError::IntegrityViolation(format!(
                            "captured_at regressed for {business_id}"
                        )));
                    }
                }
            }
            Change::TinIssued { taxpayer_id, tin, .. } => {
                let t = self
                    .taxpayers
                    .get(taxpayer_id)
                    .ok_or_else(|| PoolError::NotFound(taxpayer_id.to_string()))?;
                if t.tin.is_some() {
                    return Err(PoolError::AlreadyIssued(taxpayer_id.clone()));
                }
                if self.tins.contains_key(tin) {
                    return Err(PoolError::DuplicateTin(tin.clone()));
                }
            }
            Change::PasswordChanged { tin, .. } => {
                if !self.tins.contains_key(tin) {
                    return Err(PoolError::NotFound(tin.to_string()));
                }
            }
            Change::MiningRun { .. } | Change::LoginOk { .. } | Change::LoginFail { .. } => {}
            Change::TierAssigned { business_id, assessment } => {
                if !self.businesses.contains_key(business_id) {
                    return Err(PoolError::IntegrityViolation(format!("unknown business {business_id}")));
                }
                if assessment.tax.kobo() < 0 {
                    return Err(PoolError::IntegrityViolation("negative tax".into()));
                }
            }
            Change::CodeIssued(c) => {
                match self.tins.get(&c.owner) {
                    Some(id) if *id == c.taxpayer_id => {}
                    _ => return Err(PoolError::IntegrityViolation(format!("code owner {} unknown", c.owner))),
                }
                if !c.assessed_amount.is_positive() {
                    return Err(PoolError::IntegrityViolation("assessed amount must be positive".into()));
                }
                if c.status != CodeStatus::Issued || c.expires_at <= c.issued_at {
                    return Err(PoolError::IntegrityViolation("new codes start Issued with a future expiry".into()));
                }
                if self.codes.contains_key(&c.code) {
                    return Err(PoolError::DuplicateCode);
                }
                if let Some(live) = self.live_code_of(&c.owner, at) {
                    return Err(PoolError::OutstandingCode(live.code.clone()));
                }
            }
            Change::CodeLookup { probe, expire, .. } => {
                if *expire {
                    let code = parse_probe(probe)
                        .and_then(|c| self.codes.get(&c))
                        .ok_or_else(|| PoolError::NotFound(probe.clone()))?;
                    code.status
                        .transition(CodeStatus::Expired)
                        .map_err(|e| PoolError::IntegrityViolation(e.to_string()))?;
                }
            }
            Change::PaymentRecorded { code, settlement } => {
                let c = self.redeemable(code, at)?;
                if let Some(Settlement { txn, receipt }) = settlement {
                    expect_id(&txn.txn_id, &self.next_txn_id())?;
                    expect_id(&receipt.receipt_no, &self.next_receipt_no())?;
                    if txn.amount_paid != c.assessed_amount || receipt.amount_paid != txn.amount_paid {
                        return Err(PoolError::IntegrityViolation(
                            "a successful payment must equal the assessed amount".into(),
                        ));
                    }
                    if txn.payer != c.owner || txn.code != *code || receipt.reference_code != *code {
                        return Err(PoolError::IntegrityViolation("payment does not match its code".into()));
                    }
                }
            }
            Change::FraudAlert { probe, void_code, rejected_txn, .. } => {
                let code = parse_probe(probe).and_then(|c| self.codes.get(&c));
                if *void_code {
                    let c = code.ok_or_else(|| PoolError::NotFound(probe.clone()))?;
                    c.status
                        .transition(CodeStatus::Voided)
                        .map_err(|e| PoolError::IntegrityViolation(e.to_string()))?;
                }
                if let Some(txn) = rejected_txn {
                    expect_id(&txn.txn_id, &self.next_txn_id())?;
                    if !self.codes.contains_key(&txn.code) {
                        return Err(PoolError::IntegrityViolation("rejected transaction names an unknown code".into()));
                    }
                }
            }
            Change::AlterationBlocked { business_id, .. } => {
                if let Some(id) = business_id {
                    if !self.businesses.contains_key(id) {
                        return Err(PoolError::IntegrityViolation(format!("unknown business {id}")));
                    }
                }
            }
        }
        Ok(())
    }

    fn redeemable(&self, code: &CodeText, at: DateTime<Utc>) -> Result<&ReferenceCode, PoolError> {
        let c = self.codes.get(code).ok_or_else(|| PoolError::NotFound(code.to_string()))?;
        match c.status {
            CodeStatus::Issued if at <= c.expires_at => Ok(c),
            CodeStatus::Redeemed => Err(PoolError::AlreadyRedeemed),
            _ => Err(PoolError::ExpiredOrVoided),
        }
    }

    /// Validates then applies `change` as sequence number `seq`.
    pub(crate) fn apply(&mut self, seq: u64, at: DateTime<Utc>, change: &Change) -> Result<(), PoolError> {
        self.validate(change, at)?;
        self.mutate(change);
        self.last_seq = seq;
        Ok(())
    }

    fn mutate(&mut self, change: &Change) {
        match change {
            Change::StaffCreated(u) => {
                self.users.insert(u.username.clone(), u.clone());
            }
            Change::CaptureTaxpayer(t) => {
                self.serials.taxpayer += 1;
                if let Some(tin) = &t.tin {
                    self.tins.insert(tin.clone(), t.taxpayer_id.clone());
                }
                self.taxpayers.insert(t.taxpayer_id.clone(), t.clone());
            }
            Change::CaptureBusiness(b) => {
                self.serials.business += 1;
                self.businesses.insert(b.business_id.clone(), b.clone());
            }
            Change::CaptureFinancials { business_id, financials } => {
                let b = self.businesses.get_mut(business_id).expect("validated");
                match b.financials.binary_search_by_key(&financials.period, |f| f.period) {
                    Ok(i) => b.financials[i] = financials.clone(),
                    Err(i) => b.financials.insert(i, financials.clone()),
                }
            }
            Change::TinIssued { taxpayer_id, tin, password_hash } => {
                self.serials.tin = self.serials.tin.max(tin.counter());
                let t = self.taxpayers.get_mut(taxpayer_id).expect("validated");
                t.tin = Some(tin.clone());
                t.password_hash = Some(password_hash.clone());
                t.must_change_password = true;
                t.status = AccountStatus::Provisional;
                self.tins.insert(tin.clone(), taxpayer_id.clone());
            }
            Change::PasswordChanged { tin, password_hash } => {
                let id = self.tins[tin].clone();
                let t = self.taxpayers.get_mut(&id).expect("validated");
                t.password_hash = Some(password_hash.clone());
                t.must_change_password = false;
                t.status = AccountStatus::Active;
            }
            Change::MiningRun { .. } => self.serials.mining_runs += 1,
            Change::TierAssigned { business_id, assessment } => {
                self.businesses.get_mut(business_id).expect("validated").assessment = Some(assessment.clone());
            }
            Change::CodeIssued(c) => {
                self.codes.insert(c.code.clone(), c.clone());
            }
            Change::CodeLookup { probe, expire, .. } => {
                if let Some(code) = parse_probe(probe).filter(|c| self.codes.contains_key(c)) {
                    self.code_activity.entry(code.clone()).or_default().lookups += 1;
                    if *expire {
                        self.codes.get_mut(&code).expect("present").status = CodeStatus::Expired;
                    }
                }
            }
            Change::PaymentRecorded { code, settlement } => {
                self.codes.get_mut(code).expect("validated").status = CodeStatus::Redeemed;
                if let Some(Settlement { txn, receipt }) = settlement {
                    self.serials.txn += 1;
                    self.serials.receipt += 1;
                    self.transactions.insert(txn.txn_id.clone(), txn.clone());
                    self.receipts.insert(code.clone(), receipt.clone());
                }
            }
            Change::FraudAlert { probe, void_code, rejected_txn, .. } => {
                self.fraud_alerts += 1;
                if *void_code {
                    let code = parse_probe(probe).expect("validated");
                    self.codes.get_mut(&code).expect("validated").status = CodeStatus::Voided;
                }
                if let Some(txn) = rejected_txn {
                    self.serials.txn += 1;
                    self.transactions.insert(txn.txn_id.clone(), txn.clone());
                }
            }
            Change::LoginOk { principal } => self.logins.entry(principal.clone()).or_default().ok += 1,
            Change::LoginFail { principal } => self.logins.entry(principal.clone()).or_default().failed += 1,
            Change::AlterationBlocked { code, .. } => {
                if let Some(code) = code.as_ref().filter(|c| self.codes.contains_key(c)) {
                    self.code_activity.entry(code.clone()).or_default().alteration_attempts += 1;
                }
            }
        }
    }
}

fn expect_id<T: PartialEq + std::fmt::Display>(got: &T, want: &T) -> Result<(), PoolError> {
    if got == want {
        Ok(())
    } else {
        Err(PoolError::IntegrityViolation(format!("expected id {want}, got {got}")))
    }
}

pub(crate) fn parse_probe(probe: &str) -> Option<CodeText> {
    CodeText::parse_lenient(probe).ok()
}
