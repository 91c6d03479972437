use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::domain::*;

pub const ACTOR_AGENT: &str = "BIRGENT";
pub const ACTOR_SYSTEM: &str = "SYSTEM";

pub type Payload = BTreeMap<String, String>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EventKind {
    StaffCreated,
    TaxpayerCaptured,
    TinIssued,
    PasswordChanged,
    MiningRun,
    TierAssigned,
    CodeIssued,
    CodeLookup,
    PaymentRecorded,
    FraudAlert,
    LoginOk,
    LoginFail,
    AlterationBlocked,
}

/// One line of the audit log. Field order is the on-disk order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditEvent {
    pub seq: u64,
    pub at: DateTime<Utc>,
    pub actor: String,
    pub kind: EventKind,
    pub payload: Payload,
}

/// An event before the pool has sequenced it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NewEvent {
    pub at: DateTime<Utc>,
    pub actor: String,
    pub kind: EventKind,
    pub payload: Payload,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Settlement {
    pub txn: TransactionRecord,
    pub receipt: Receipt,
}

/// Typed view of an event payload. Every state change in the pool is one of
/// these, and replaying them in order rebuilds the state.
#[derive(Debug, Clone, PartialEq)]
pub enum Change {
    StaffCreated(UserAccount),
    CaptureTaxpayer(TaxpayerRecord),
    CaptureBusiness(BusinessRecord),
    CaptureFinancials {
        business_id: BusinessId,
        financials: MonthlyFinancials,
    },
    TinIssued {
        taxpayer_id: TaxpayerId,
        tin: Tin,
        password_hash: PasswordDigest,
    },
    PasswordChanged {
        tin: Tin,
        password_hash: PasswordDigest,
    },
    MiningRun {
        run_id: String,
        status: String,
        assessed: usize,
        rejected: usize,
    },
    TierAssigned {
        business_id: BusinessId,
        assessment: Assessment,
    },
    CodeIssued(ReferenceCode),
    CodeLookup {
        probe: String,
        presenter: Option<Tin>,
        outcome: LookupOutcome,
        expire: bool,
    },
    PaymentRecorded {
        code: CodeText,
        settlement: Option<Settlement>,
    },
    FraudAlert {
        probe: String,
        presenter: Option<Tin>,
        cash: Option<Money>,
        rule_hits: Vec<RuleHit>,
        ann_score: Option<f64>,
        void_code: bool,
        rejected_txn: Option<TransactionRecord>,
    },
    LoginOk {
        principal: String,
    },
    LoginFail {
        principal: String,
    },
    AlterationBlocked {
        principal: String,
        role: String,
        business_id: Option<BusinessId>,
        code: Option<CodeText>,
        attempted: Money,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PayloadError(pub String);

impl fmt::Display for PayloadError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

struct Writer(Payload);

impl Writer {
    fn new() -> Self {
        Writer(Payload::new())
    }

    fn put(mut self, key: &str, value: impl ToString) -> Self {
        self.0.insert(key.to_string(), value.to_string());
        self
    }

    fn put_opt(self, key: &str, value: Option<impl ToString>) -> Self {
        match value {
            Some(v) => self.put(key, v),
            None => self,
        }
    }

    fn time(self, key: &str, at: DateTime<Utc>) -> Self {
        self.put(key, at.to_rfc3339())
    }
}

struct Reader<'a>(&'a Payload);

impl Reader<'_> {
    fn str(&self, key: &str) -> Result<&str, PayloadError> {
        self.0
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| PayloadError(format!("missing payload key {key:?}")))
    }

    fn parse<T: FromStr>(&self, key: &str) -> Result<T, PayloadError>
    where
        T::Err: fmt::Display,
    {
        let raw = self.str(key)?;
        raw.parse()
            .map_err(|e: T::Err| PayloadError(format!("bad value {raw:?} for {key:?}: {e}")))
    }

    fn opt<T: FromStr>(&self, key: &str) -> Result<Option<T>, PayloadError>
    where
        T::Err: fmt::Display,
    {
        if self.0.contains_key(key) {
            self.parse(key).map(Some)
        } else {
            Ok(None)
        }
    }

    fn money(&self, key: &str) -> Result<Money, PayloadError> {
        self.parse::<i64>(key).map(Money::from_kobo)
    }

    fn time(&self, key: &str) -> Result<DateTime<Utc>, PayloadError> {
        let raw = self.str(key)?;
        DateTime::parse_from_rfc3339(raw)
            .map(|t| t.with_timezone(&Utc))
            .map_err(|e| PayloadError(format!("bad timestamp {raw:?} for {key:?}: {e}")))
    }

    fn flag(&self, key: &str) -> Result<bool, PayloadError> {
        self.parse(key)
    }
}

fn code_status(s: &str) -> Result<CodeStatus, PayloadError> {
    Ok(match s {
        "Issued" => CodeStatus::Issued,
        "Redeemed" => CodeStatus::Redeemed,
        "Expired" => CodeStatus::Expired,
        "Voided" => CodeStatus::Voided,
        other => return Err(PayloadError(format!("unknown code status {other:?}"))),
    })
}

fn account_status(s: &str) -> Result<AccountStatus, PayloadError> {
    match s {
        "Provisional" => Ok(AccountStatus::Provisional),
        "Active" => Ok(AccountStatus::Active),
        other => Err(PayloadError(format!("unknown account status {other:?}"))),
    }
}

fn account_status_str(s: AccountStatus) -> &'static str {
    match s {
        AccountStatus::Provisional => "Provisional",
        AccountStatus::Active => "Active",
    }
}

impl Change {
    pub fn kind(&self) -> EventKind {
        match self {
            Change::StaffCreated(_) => EventKind::StaffCreated,
            Change::CaptureTaxpayer(_) | Change::CaptureBusiness(_) | Change::CaptureFinancials { .. } => {
                EventKind::TaxpayerCaptured
            }
            Change::TinIssued { .. } => EventKind::TinIssued,
            Change::PasswordChanged { .. } => EventKind::PasswordChanged,
            Change::MiningRun { .. } => EventKind::MiningRun,
            Change::TierAssigned { .. } => EventKind::TierAssigned,
            Change::CodeIssued(_) => EventKind::CodeIssued,
            Change::CodeLookup { .. } => EventKind::CodeLookup,
            Change::PaymentRecorded { .. } => EventKind::PaymentRecorded,
            Change::FraudAlert { .. } => EventKind::FraudAlert,
            Change::LoginOk { .. } => EventKind::LoginOk,
            Change::LoginFail { .. } => EventKind::LoginFail,
            Change::AlterationBlocked { .. } => EventKind::AlterationBlocked,
        }
    }

    pub fn to_payload(&self) -> Payload {
        let w = Writer::new();
        let w = match self {
            Change::StaffCreated(u) => w
                .put("username", &u.username)
                .put("role", u.role.as_str())
                .put("password_hash", u.password_hash.as_str()),
            Change::CaptureTaxpayer(t) => w
                .put("record", "taxpayer")
                .put("taxpayer_id", &t.taxpayer_id)
                .put_opt("tin", t.tin.as_ref())
                .put("full_name", &t.full_name)
                .put("email", &t.email)
                .put("phone", &t.phone)
                .put_opt("password_hash", t.password_hash.as_ref().map(|d| d.as_str()))
                .put("must_change_password", t.must_change_password)
                .put("status", account_status_str(t.status))
                .time("captured_at", t.captured_at),
            Change::CaptureBusiness(b) => w
                .put("record", "business")
                .put("business_id", &b.business_id)
                .put("owner", &b.owner)
                .put("business_name", &b.business_name)
                .put("location", &b.location)
                .put("sector", &b.sector),
            Change::CaptureFinancials { business_id, financials } => w
                .put("record", "financials")
                .put("business_id", business_id)
                .put("period", financials.period)
                .put("revenue_kobo", financials.revenue.kobo())
                .put("expenses_kobo", financials.expenses.kobo())
                .time("captured_at", financials.captured_at),
            Change::TinIssued { taxpayer_id, tin, password_hash } => w
                .put("taxpayer_id", taxpayer_id)
                .put("tin", tin)
                .put("password_hash", password_hash.as_str()),
            Change::PasswordChanged { tin, password_hash } => {
                w.put("tin", tin).put("password_hash", password_hash.as_str())
            }
            Change::MiningRun { run_id, status, assessed, rejected } => w
                .put("run_id", run_id)
                .put("status", status)
                .put("assessed", assessed)
                .put("rejected", rejected),
            Change::TierAssigned { business_id, assessment: a } => {
                let w = w
                    .put("business_id", business_id)
                    .put("period", a.period)
                    .put("net_profit_kobo", a.net_profit.kobo())
                    .put("tier", a.tier)
                    .put("tax_kobo", a.tax.kobo())
                    .time("assessed_at", a.assessed_at);
                match &a.source {
                    AssessmentSource::Mining { run_id } => w.put("source", "mining").put("run_id", run_id),
                    AssessmentSource::Review { reviewer } => w.put("source", "review").put("reviewer", reviewer),
                }
            }
            Change::CodeIssued(c) => w
                .put("code", c.code.as_str())
                .put("owner", &c.owner)
                .put("taxpayer_id", &c.taxpayer_id)
                .put("assessed_kobo", c.assessed_amount.kobo())
                .time("issued_at", c.issued_at)
                .time("expires_at", c.expires_at)
                .put("status", c.status.as_str()),
            Change::CodeLookup { probe, presenter, outcome, expire } => w
                .put("code", probe)
                .put_opt("presenter", presenter.as_ref())
                .put("outcome", outcome.as_str())
                .put("expire", expire),
            Change::PaymentRecorded { code, settlement } => {
                let w = w.put("code", code.as_str());
                match settlement {
                    None => w,
                    Some(Settlement { txn, receipt }) => w
                        .put("txn_id", &txn.txn_id)
                        .put("payer", &txn.payer)
                        .put("amount_kobo", txn.amount_paid.kobo())
                        .put("teller", &txn.teller)
                        .time("at", txn.at)
                        .put("receipt_no", &receipt.receipt_no)
                        .put("business_name", &receipt.business_name)
                        .put("taxpayer_name", &receipt.taxpayer_name),
                }
            }
            Change::FraudAlert { probe, presenter, cash, rule_hits, ann_score, void_code, rejected_txn } => {
                let hits: Vec<&str> = rule_hits.iter().map(|h| h.as_str()).collect();
                let w = w
                    .put("code", probe)
                    .put_opt("presenter", presenter.as_ref())
                    .put_opt("cash_kobo", cash.map(|m| m.kobo()))
                    .put("rule_hits", hits.join("|"))
                    .put_opt("ann_score", *ann_score)
                    .put("void_code", void_code);
                match rejected_txn {
                    None => w,
                    Some(t) => w
                        .put("txn_id", &t.txn_id)
                        .put("txn_code", t.code.as_str())
                        .put("payer", &t.payer)
                        .put("amount_kobo", t.amount_paid.kobo())
                        .put("teller", &t.teller)
                        .time("txn_at", t.at),
                }
            }
            Change::LoginOk { principal } | Change::LoginFail { principal } => w.put("principal", principal),
            Change::AlterationBlocked { principal, role, business_id, code, attempted } => w
                .put("principal", principal)
                .put("role", role)
                .put_opt("business_id", business_id.as_ref())
                .put_opt("code", code.as_ref().map(|c| c.as_str()))
                .put("attempted_kobo", attempted.kobo()),
        };
        w.0
    }

    pub fn from_payload(kind: EventKind, payload: &Payload) -> Result<Change, PayloadError> {
        let r = Reader(payload);
        Ok(match kind {
            EventKind::StaffCreated => Change::StaffCreated(UserAccount {
                username: r.str("username")?.to_string(),
                password_hash: PasswordDigest::from_stored(r.str("password_hash")?),
                role: r.parse("role")?,
            }),
            EventKind::TaxpayerCaptured => match r.str("record")? {
                "taxpayer" => Change::CaptureTaxpayer(TaxpayerRecord {
                    taxpayer_id: r.parse("taxpayer_id")?,
                    tin: r.opt("tin")?,
                    full_name: r.str("full_name")?.to_string(),
                    email: r.str("email")?.to_string(),
                    phone: r.str("phone")?.to_string(),
                    password_hash: r.opt::<String>("password_hash")?.map(PasswordDigest::from_stored),
                    must_change_password: r.flag("must_change_password")?,
                    status: account_status(r.str("status")?)?,
                    captured_at: r.time("captured_at")?,
                }),
                "business" => Change::CaptureBusiness(BusinessRecord {
                    business_id: r.parse("business_id")?,
                    owner: r.parse("owner")?,
                    business_name: r.str("business_name")?.to_string(),
                    location: r.str("location")?.to_string(),
                    sector: r.str("sector")?.to_string(),
                    financials: Vec::new(),
                    assessment: None,
                }),
                "financials" => Change::CaptureFinancials {
                    business_id: r.parse("business_id")?,
                    financials: MonthlyFinancials {
                        period: r.parse("period")?,
                        revenue: r.money("revenue_kobo")?,
                        expenses: r.money("expenses_kobo")?,
                        captured_at: r.time("captured_at")?,
                    },
                },
                other => return Err(PayloadError(format!("unknown capture record {other:?}"))),
            },
            EventKind::TinIssued => Change::TinIssued {
                taxpayer_id: r.parse("taxpayer_id")?,
                tin: r.parse("tin")?,
                password_hash: PasswordDigest::from_stored(r.str("password_hash")?),
            },
            EventKind::PasswordChanged => Change::PasswordChanged {
                tin: r.parse("tin")?,
                password_hash: PasswordDigest::from_stored(r.str("password_hash")?),
            },
            EventKind::MiningRun => Change::MiningRun {
                run_id: r.str("run_id")?.to_string(),
                status: r.str("status")?.to_string(),
                assessed: r.parse("assessed")?,
                rejected: r.parse("rejected")?,
            },
            EventKind::TierAssigned => Change::TierAssigned {
                business_id: r.parse("business_id")?,
                assessment: Assessment {
                    period: r.parse("period")?,
                    net_profit: r.money("net_profit_kobo")?,
                    tier: r.parse("tier")?,
                    tax: r.money("tax_kobo")?,
                    assessed_at: r.time("assessed_at")?,
                    source: match r.str("source")? {
                        "mining" => AssessmentSource::Mining { run_id: r.str("run_id")?.to_string() },
                        "review" => AssessmentSource::Review { reviewer: r.str("reviewer")?.to_string() },
                        other => return Err(PayloadError(format!("unknown assessment source {other:?}"))),
                    },
                },
            },
            EventKind::CodeIssued => Change::CodeIssued(ReferenceCode {
                code: r.parse("code")?,
                owner: r.parse("owner")?,
                taxpayer_id: r.parse("taxpayer_id")?,
                assessed_amount: r.money("assessed_kobo")?,
                issued_at: r.time("issued_at")?,
                expires_at: r.time("expires_at")?,
                status: code_status(r.str("status")?)?,
            }),
            EventKind::CodeLookup => Change::CodeLookup {
                probe: r.str("code")?.to_string(),
                presenter: r.opt("presenter")?,
                outcome: r.parse("outcome")?,
                expire: r.flag("expire")?,
            },
            EventKind::PaymentRecorded => {
                let code: CodeText = r.parse("code")?;
                let settlement = if payload.contains_key("txn_id") {
                    let at = r.time("at")?;
                    let txn = TransactionRecord {
                        txn_id: r.parse("txn_id")?,
                        code: code.clone(),
                        payer: r.parse("payer")?,
                        amount_paid: r.money("amount_kobo")?,
                        teller: r.str("teller")?.to_string(),
                        at,
                        outcome: TxnOutcome::Success,
                    };
                    let receipt = Receipt {
                        receipt_no: r.parse("receipt_no")?,
                        business_name: r.str("business_name")?.to_string(),
                        taxpayer_name: r.str("taxpayer_name")?.to_string(),
                        amount_paid: txn.amount_paid,
                        date: at,
                        reference_code: code.clone(),
                        tin: txn.payer.clone(),
                        txn_id: txn.txn_id.clone(),
                    };
                    Some(Settlement { txn, receipt })
                } else {
                    None
                };
                Change::PaymentRecorded { code, settlement }
            }
            EventKind::FraudAlert => {
                let hits = r.str("rule_hits")?;
                let rule_hits = if hits.is_empty() {
                    Vec::new()
                } else {
                    hits.split('|')
                        .map(|h| h.parse().map_err(PayloadError))
                        .collect::<Result<_, _>>()?
                };
                let rejected_txn = if payload.contains_key("txn_id") {
                    Some(TransactionRecord {
                        txn_id: r.parse("txn_id")?,
                        code: r.parse("txn_code")?,
                        payer: r.parse("payer")?,
                        amount_paid: r.money("amount_kobo")?,
                        teller: r.str("teller")?.to_string(),
                        at: r.time("txn_at")?,
                        outcome: TxnOutcome::Rejected,
                    })
                } else {
                    None
                };
                Change::FraudAlert {
                    probe: r.str("code")?.to_string(),
                    presenter: r.opt("presenter")?,
                    cash: r.opt::<i64>("cash_kobo")?.map(Money::from_kobo),
                    rule_hits,
                    ann_score: r.opt("ann_score")?,
                    void_code: r.flag("void_code")?,
                    rejected_txn,
                }
            }
            EventKind::LoginOk => Change::LoginOk { principal: r.str("principal")?.to_string() },
            EventKind::LoginFail => Change::LoginFail { principal: r.str("principal")?.to_string() },
            EventKind::AlterationBlocked => Change::AlterationBlocked {
                principal: r.str("principal")?.to_string(),
                role: r.str("role")?.to_string(),
                business_id: r.opt("business_id")?,
                code: r.opt("code")?,
                attempted: r.money("attempted_kobo")?,
            },
        })
    }
}
