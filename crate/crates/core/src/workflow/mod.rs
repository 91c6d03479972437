//! The collection workflow as role-scoped operations: staff and taxpayer
//! logins, capture, TIN issuance, assessment, reference codes, bank
//! payment and receipt reprint. Every mutation goes through the data pool;
//! every payment goes through the agent first.

mod capture;
mod clock;
mod notify;
mod session;

use std::str::FromStr;
use std::sync::Arc;

use chrono::{DateTime, Duration, Utc};
use parking_lot::{Mutex, RwLock};
use rand::distr::Alphanumeric;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use capture::{parse_capture_csv, CaptureForm, RowFailure, CAPTURE_HEADER};
pub use clock::{Clock, ManualClock, SystemClock};
pub use notify::{MemoryNotifier, Notification, Notifier, SpoolNotifier};
pub use session::{Session, SessionStore, DEFAULT_IDLE_MINUTES};

use crate::agent::{
    AgentConfig, AgentError, AmountTarget, AnnModel, Birgent, FraudAssessment, GuardOutcome, VerificationResult,
};
use crate::domain::*;
use crate::miner::{run_extraction, MinerError, MiningReport, TierRateGuide};
use crate::pool::{billing_name, BusinessDraft, DataPool, NewRecord, PoolError, RecordId, TaxpayerDraft, ACTOR_SYSTEM};
use capture::ValidCapture;

pub const DEFAULT_PASSWORD_LEN: usize = 10;
const TOKEN_BYTES: usize = 32;
const SALT_BYTES: usize = 16;

#[derive(Debug, Error)]
pub enum WorkflowError {
    #[error("missing, unknown or expired session")]
    Unauthorized,
    #[error("{0}")]
    InvalidCredentials(ScreenMessage),
    #[error("{role} may not {op}")]
    Forbidden { role: &'static str, op: &'static str },
    #[error("the default password must be changed first")]
    MustChangePassword,
    #[error("validation failed: {}", .0.iter().map(|f| format!("row {}: {}", f.row, f.reason)).collect::<Vec<_>>().join("; "))]
    ValidationFailed(Vec<RowFailure>),
    #[error("username {0:?} is taken")]
    DuplicateUsername(String),
    #[error("TIN already issued for {0}")]
    AlreadyIssued(TaxpayerId),
    #[error("old password is wrong")]
    OldPasswordWrong,
    #[error("new password and confirmation differ")]
    ConfirmMismatch,
    #[error("new password equals the old one")]
    SameAsOld,
    #[error("no assessment yet")]
    NoAssessment,
    #[error("assessed tax is zero; nothing to pay")]
    NothingDue,
    #[error("{}", ScreenMessage::AmountLocked.text())]
    AmountLocked,
    #[error("not found: {0}")]
    NotFound(String),
    #[error("{}", ScreenMessage::FraudAlert.text())]
    FraudDetected(Box<FraudAssessment>),
    #[error("reference code already redeemed")]
    AlreadyRedeemed(Option<Box<FraudAssessment>>),
    #[error("reference code expired or voided")]
    CodeUnusable,
    #[error("reference code is not yours")]
    NotYourCode,
    #[error("reference code has not been paid")]
    NotPaid,
    #[error(transparent)]
    Mining(MinerError),
    #[error(transparent)]
    Agent(AgentError),
    #[error(transparent)]
    Pool(PoolError),
}

impl WorkflowError {
    fn invalid(reason: impl Into<String>) -> Self {
        WorkflowError::ValidationFailed(vec![RowFailure { row: 1, reason: reason.into() }])
    }

    pub fn kind(&self) -> &'static str {
        match self {
            WorkflowError::Unauthorized => "Unauthorized",
            WorkflowError::InvalidCredentials(_) => "InvalidCredentials",
            WorkflowError::Forbidden { .. } => "Forbidden",
            WorkflowError::MustChangePassword => "MustChangePassword",
            WorkflowError::ValidationFailed(_) => "ValidationFailed",
            WorkflowError::DuplicateUsername(_) => "DuplicateUsername",
            WorkflowError::AlreadyIssued(_) => "AlreadyIssued",
            WorkflowError::OldPasswordWrong => "OldPasswordWrong",
            WorkflowError::ConfirmMismatch => "ConfirmMismatch",
            WorkflowError::SameAsOld => "SameAsOld",
            WorkflowError::NoAssessment => "NoAssessment",
            WorkflowError::NothingDue => "NothingDue",
            WorkflowError::AmountLocked => "AmountLocked",
            WorkflowError::NotFound(_) => "NotFound",
            WorkflowError::FraudDetected(_) => "FraudDetected",
            WorkflowError::AlreadyRedeemed(_) => "AlreadyRedeemed",
            WorkflowError::CodeUnusable => "CodeUnusable",
            WorkflowError::NotYourCode => "NotYourCode",
            WorkflowError::NotPaid => "NotPaid",
            WorkflowError::Mining(MinerError::NoEarningsRecords { .. }) => "NoEarningsRecords",
            WorkflowError::Mining(_) => "MiningFailed",
            WorkflowError::Agent(_) => "AgentFailure",
            WorkflowError::Pool(PoolError::PoolClosed) => "PoolClosed",
            WorkflowError::Pool(_) => "PoolFailure",
        }
    }

    /// HTTP status class for the error.
    pub fn status(&self) -> u16 {
        match self {
            WorkflowError::ValidationFailed(_)
            | WorkflowError::OldPasswordWrong
            | WorkflowError::ConfirmMismatch
            | WorkflowError::SameAsOld => 400,
            WorkflowError::Unauthorized | WorkflowError::InvalidCredentials(_) => 401,
            WorkflowError::Forbidden { .. }
            | WorkflowError::MustChangePassword
            | WorkflowError::AmountLocked
            | WorkflowError::NotYourCode => 403,
            WorkflowError::NotFound(_) | WorkflowError::NoAssessment => 404,
            WorkflowError::DuplicateUsername(_)
            | WorkflowError::AlreadyIssued(_)
            | WorkflowError::NothingDue
            | WorkflowError::FraudDetected(_)
            | WorkflowError::AlreadyRedeemed(_)
            | WorkflowError::CodeUnusable
            | WorkflowError::NotPaid
            | WorkflowError::Mining(MinerError::NoEarningsRecords { .. }) => 409,
            WorkflowError::Pool(PoolError::PoolClosed) => 503,
            WorkflowError::Mining(_) | WorkflowError::Agent(_) | WorkflowError::Pool(_) => 500,
        }
    }

    /// The fixed screen message a user sees for this error, if any.
    pub fn display_message(&self) -> Option<ScreenMessage> {
        match self {
            WorkflowError::InvalidCredentials(m) => Some(*m),
            WorkflowError::AmountLocked => Some(ScreenMessage::AmountLocked),
            WorkflowError::FraudDetected(_) => Some(ScreenMessage::FraudAlert),
            WorkflowError::Mining(MinerError::NoEarningsRecords { .. }) => Some(ScreenMessage::NoEarningsRecords),
            _ => None,
        }
    }

    pub fn assessment(&self) -> Option<&FraudAssessment> {
        match self {
            WorkflowError::FraudDetected(a) => Some(a),
            WorkflowError::AlreadyRedeemed(a) => a.as_deref(),
            _ => None,
        }
    }

    pub fn row_failures(&self) -> &[RowFailure] {
        match self {
            WorkflowError::ValidationFailed(rows) => rows,
            _ => &[],
        }
    }
}

impl From<PoolError> for WorkflowError {
    fn from(e: PoolError) -> Self {
        match e {
            PoolError::DuplicateUsername(u) => WorkflowError::DuplicateUsername(u),
            PoolError::AlreadyIssued(id) => WorkflowError::AlreadyIssued(id),
            PoolError::AlreadyRedeemed => WorkflowError::AlreadyRedeemed(None),
            PoolError::ExpiredOrVoided => WorkflowError::CodeUnusable,
            PoolError::NotFound(what) => WorkflowError::NotFound(what),
            other => WorkflowError::Pool(other),
        }
    }
}

impl From<AgentError> for WorkflowError {
    fn from(e: AgentError) -> Self {
        match e {
            AgentError::Pool(p) => p.into(),
            other => WorkflowError::Agent(other),
        }
    }
}

impl From<MinerError> for WorkflowError {
    fn from(e: MinerError) -> Self {
        match e {
            MinerError::Pool(p) => p.into(),
            other => WorkflowError::Mining(other),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LoginGrant {
    pub token: String,
    pub principal: String,
    pub role: SessionRole,
    pub display_message: ScreenMessage,
    pub must_change_password: bool,
    pub expires_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Ack {
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub display_message: Option<ScreenMessage>,
}

impl Ack {
    fn plain() -> Self {
        Ack { ok: true, display_message: None }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StaffView {
    pub username: String,
    pub role: Role,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Captured {
    pub row: usize,
    pub taxpayer_id: TaxpayerId,
    pub business_id: BusinessId,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaptureBatch {
    pub stored: Vec<Captured>,
    pub failures: Vec<RowFailure>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FinancialsForm {
    pub business_id: BusinessId,
    pub period: Period,
    pub revenue_kobo: i64,
    pub expenses_kobo: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TinGrant {
    pub taxpayer_id: TaxpayerId,
    pub tin: Tin,
    pub notified: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BusinessAssessment {
    pub business_id: BusinessId,
    pub business_name: String,
    pub period: Period,
    pub net_profit: Money,
    pub tier: Tier,
    pub tax: Money,
}

/// What a taxpayer sees before paying. The amount is display-only.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AssessmentView {
    pub tin: Tin,
    pub taxpayer_name: String,
    pub email: String,
    pub phone: String,
    pub businesses: Vec<BusinessAssessment>,
    pub tier: Tier,
    pub tax_amount: Money,
    pub amount_editable: bool,
    pub live_code: Option<CodeText>,
}

/// The printable slip a taxpayer carries to the bank.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PaymentSlip {
    pub reference_code: CodeText,
    pub reference_display: String,
    pub tax_amount: Money,
    pub taxpayer_name: String,
    pub business_name: String,
    pub tin: Tin,
    pub date: DateTime<Utc>,
    pub expires_at: DateTime<Utc>,
    /// True when the slip is for a code issued earlier and still live.
    pub reissued: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AmountWrite {
    #[serde(default)]
    pub business_id: Option<BusinessId>,
    pub amount_kobo: i64,
}

/// Teller's view of a searched code.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "state")]
pub enum LookupView {
    Genuine { reference_code: CodeText, business_name: String, taxpayer_name: String, tax_amount: Money, tin: Tin },
    /// Nothing is shown.
    Empty,
    StolenNotice { owner_name: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaymentRequest {
    pub code: String,
    pub cash_kobo: i64,
    pub presenter_tin: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PaymentOutcome {
    pub display_message: ScreenMessage,
    pub receipt: Receipt,
    pub transaction: TransactionRecord,
    pub assessment: FraudAssessment,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MiningOutcome {
    pub display_message: ScreenMessage,
    pub report: MiningReport,
}

pub struct ServiceBuilder {
    pool: Arc<DataPool>,
    secret: Vec<u8>,
    guide: TierRateGuide,
    notifier: Arc<dyn Notifier>,
    clock: Arc<dyn Clock>,
    hasher: PasswordHasher,
    seed: Option<u64>,
    alert_threshold: Option<f64>,
    code_lifetime: Option<Duration>,
    idle: Duration,
}

impl ServiceBuilder {
    pub fn secret(mut self, secret: impl Into<Vec<u8>>) -> Self {
        self.secret = secret.into();
        self
    }

    pub fn guide(mut self, guide: TierRateGuide) -> Self {
        self.guide = guide;
        self
    }

    pub fn notifier(mut self, notifier: Arc<dyn Notifier>) -> Self {
        self.notifier = notifier;
        self
    }

    pub fn clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    pub fn hasher(mut self, hasher: PasswordHasher) -> Self {
        self.hasher = hasher;
        self
    }

    /// Fixes tokens, default passwords, salts and code nonces. For tests
    /// and simulation only.
    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn alert_threshold(mut self, threshold: f64) -> Self {
        self.alert_threshold = Some(threshold);
        self
    }

    pub fn code_lifetime(mut self, lifetime: Duration) -> Self {
        self.code_lifetime = Some(lifetime);
        self
    }

    pub fn idle_timeout(mut self, idle: Duration) -> Self {
        self.idle = idle;
        self
    }

    pub fn build(self) -> RevenueService {
        let mut config = AgentConfig::new(self.secret);
        if let Some(t) = self.alert_threshold {
            config.alert_threshold = t;
        }
        if let Some(l) = self.code_lifetime {
            config.code_lifetime = l;
        }
        let (rng, nonces) = match self.seed {
            Some(seed) => (ChaCha20Rng::seed_from_u64(seed), ChaCha20Rng::seed_from_u64(seed.rotate_left(32) ^ 0x5eed)),
            None => (ChaCha20Rng::from_os_rng(), ChaCha20Rng::from_os_rng()),
        };
        let agent = Birgent::with_nonce_source(Arc::clone(&self.pool), config, Box::new(nonces));
        RevenueService {
            pool: self.pool,
            agent: Arc::new(agent),
            guide: RwLock::new(self.guide),
            notifier: self.notifier,
            clock: self.clock,
            sessions: SessionStore::new(self.idle),
            hasher: self.hasher,
            rng: Mutex::new(rng),
        }
    }
}

pub struct RevenueService {
    pool: Arc<DataPool>,
    agent: Arc<Birgent>,
    guide: RwLock<TierRateGuide>,
    notifier: Arc<dyn Notifier>,
    clock: Arc<dyn Clock>,
    sessions: SessionStore,
    hasher: PasswordHasher,
    rng: Mutex<ChaCha20Rng>,
}

fn parse_code(probe: &str) -> Result<CodeText, WorkflowError> {
    CodeText::parse_lenient(probe).map_err(|e| WorkflowError::invalid(e.to_string()))
}

fn parse_tin(text: &str) -> Result<Tin, WorkflowError> {
    Tin::from_str(text).map_err(|e| WorkflowError::invalid(e.to_string()))
}

impl RevenueService {
    /// Defaults: the standard rate guide, an in-memory notifier, the system
    /// clock, 30-minute idle sessions and OS randomness.
    pub fn builder(pool: Arc<DataPool>, secret: impl Into<Vec<u8>>) -> ServiceBuilder {
        ServiceBuilder {
            pool,
            secret: secret.into(),
            guide: TierRateGuide::default(),
            notifier: Arc::new(MemoryNotifier::new()),
            clock: Arc::new(SystemClock),
            hasher: PasswordHasher::default(),
            seed: None,
            alert_threshold: None,
            code_lifetime: None,
            idle: Duration::minutes(DEFAULT_IDLE_MINUTES),
        }
    }

    pub fn pool(&self) -> &Arc<DataPool> {
        &self.pool
    }

    pub fn agent(&self) -> &Arc<Birgent> {
        &self.agent
    }

    pub fn now(&self) -> DateTime<Utc> {
        self.clock.now()
    }

    pub fn guide(&self) -> TierRateGuide {
        self.guide.read().clone()
    }

    pub fn sessions(&self) -> &SessionStore {
        &self.sessions
    }

    /// Operations that need no session: first admin, seeding and mining
    /// from the operator console.
    pub fn system(&self) -> SystemOps<'_> {
        SystemOps { svc: self }
    }

    fn random_token(&self) -> String {
        let mut bytes = [0u8; TOKEN_BYTES];
        self.rng.lock().fill_bytes(&mut bytes);
        hex::encode(bytes)
    }

    fn random_password(&self) -> String {
        let mut rng = self.rng.lock();
        (0..DEFAULT_PASSWORD_LEN).map(|_| rng.sample(Alphanumeric) as char).collect()
    }

    fn digest(&self, plain: &str) -> Result<PasswordDigest, WorkflowError> {
        let mut salt = [0u8; SALT_BYTES];
        self.rng.lock().fill_bytes(&mut salt);
        self.hasher.hash(plain, &salt).map_err(|e| WorkflowError::invalid(e.to_string()))
    }

    fn authorize(&self, token: &str, op: &'static str, allowed: &[SessionRole]) -> Result<Session, WorkflowError> {
        let session = self.sessions.touch(token, self.clock.now()).ok_or(WorkflowError::Unauthorized)?;
        if !allowed.contains(&session.role) {
            return Err(WorkflowError::Forbidden { role: session.role.as_str(), op });
        }
        if session.restricted && op != "change_password" {
            return Err(WorkflowError::MustChangePassword);
        }
        Ok(session)
    }

    fn taxpayer_of(&self, session: &Session) -> Result<(Tin, TaxpayerRecord), WorkflowError> {
        let tin = parse_tin(&session.principal)?;
        let rec = self
            .pool
            .read(|s| s.taxpayer_by_tin(&tin).cloned())
            .ok_or_else(|| WorkflowError::NotFound(tin.to_string()))?;
        Ok((tin, rec))
    }

    fn create_account(&self, actor: &str, username: &str, role: Role, password: &str) -> Result<StaffView, WorkflowError> {
        let username = username.trim();
        let valid_name = (3..=32).contains(&username.len())
            && username.bytes().all(|b| b.is_ascii_alphanumeric() || b"_.-".contains(&b));
        if !valid_name {
            return Err(WorkflowError::invalid("username must be 3-32 letters, digits, '_', '.' or '-'"));
        }
        let account = UserAccount { username: username.to_string(), password_hash: self.digest(password)?, role };
        self.pool.put_record(actor, self.clock.now(), NewRecord::Staff(account))?;
        Ok(StaffView { username: username.to_string(), role })
    }

    pub fn create_staff(&self, token: &str, username: &str, role: Role, password: &str) -> Result<StaffView, WorkflowError> {
        let s = self.authorize(token, "create_staff", &[SessionRole::Admin])?;
        if role == Role::Admin {
            return Err(WorkflowError::invalid("staff role must be BirStaff or BankStaff"));
        }
        self.create_account(&s.principal, username, role, password)
    }

    fn grant(&self, principal: &str, role: SessionRole, must_change_password: bool) -> LoginGrant {
        let now = self.clock.now();
        let s = self.sessions.open(self.random_token(), principal, role, must_change_password, now);
        LoginGrant {
            token: s.token,
            principal: s.principal,
            role,
            display_message: ScreenMessage::Welcome,
            must_change_password,
            expires_at: s.expires_at,
        }
    }

    /// Wrong username and wrong password fail identically.
    pub fn login_staff(&self, username: &str, password: &str) -> Result<LoginGrant, WorkflowError> {
        let username = username.trim();
        let account = self.pool.read(|s| s.user(username).cloned());
        let ok = account.as_ref().is_some_and(|a| verify_password(password, &a.password_hash));
        self.pool.record_login(self.clock.now(), username, ok)?;
        match account {
            Some(a) if ok => Ok(self.grant(&a.username, a.role.into(), false)),
            _ => Err(WorkflowError::InvalidCredentials(ScreenMessage::InvalidStaffLogin)),
        }
    }

    /// A taxpayer still on the default password gets a session restricted
    /// to changing it.
    pub fn login_taxpayer(&self, tin: &str, password: &str) -> Result<LoginGrant, WorkflowError> {
        let denied = WorkflowError::InvalidCredentials(ScreenMessage::InvalidTaxpayerLogin);
        let now = self.clock.now();
        let Ok(tin) = Tin::from_str(tin) else {
            let principal: String = tin.trim().chars().take(32).collect();
            self.pool.record_login(now, &principal, false)?;
            return Err(denied);
        };
        let rec = self.pool.read(|s| s.taxpayer_by_tin(&tin).cloned());
        let ok = rec
            .as_ref()
            .and_then(|t| t.password_hash.as_ref())
            .is_some_and(|d| verify_password(password, d));
        self.pool.record_login(now, tin.as_str(), ok)?;
        match rec {
            Some(t) if ok => Ok(self.grant(tin.as_str(), SessionRole::Taxpayer, t.must_change_password)),
            _ => Err(denied),
        }
    }

    pub fn logout(&self, token: &str) -> Ack {
        self.sessions.revoke(token);
        Ack::plain()
    }

    fn capture(&self, actor: &str, row: usize, v: ValidCapture) -> Result<Captured, WorkflowError> {
        let now = self.clock.now();
        let taxpayer_id = match v.taxpayer_id {
            Some(id) => {
                if self.pool.read(|s| s.taxpayer(&id).is_none()) {
                    return Err(WorkflowError::ValidationFailed(vec![RowFailure {
                        row,
                        reason: format!("unknown taxpayer {id}"),
                    }]));
                }
                id
            }
            None => {
                let draft = TaxpayerDraft { full_name: v.full_name, email: v.email, phone: v.phone, tin: None };
                match self.pool.put_record(actor, now, NewRecord::Taxpayer(draft))? {
                    RecordId::Taxpayer(id) => id,
                    other => unreachable!("taxpayer capture returned {other:?}"),
                }
            }
        };
        let draft = BusinessDraft {
            owner: taxpayer_id.clone(),
            business_name: v.business_name,
            location: v.location,
            sector: v.sector,
        };
        let business_id = match self.pool.put_record(actor, now, NewRecord::Business(draft))? {
            RecordId::Business(id) => id,
            other => unreachable!("business capture returned {other:?}"),
        };
        if let Some((period, revenue, expenses)) = v.financials {
            let financials = MonthlyFinancials { period, revenue, expenses, captured_at: now };
            self.pool.put_record(actor, now, NewRecord::Financials { business_id: business_id.clone(), financials })?;
        }
        Ok(Captured { row, taxpayer_id, business_id })
    }

    fn capture_rows(
        &self,
        actor: &str,
        rows: Vec<(usize, Result<CaptureForm, String>)>,
    ) -> Result<CaptureBatch, WorkflowError> {
        let mut batch = CaptureBatch::default();
        for (row, form) in rows {
            match form.and_then(|f| f.validate()) {
                Ok(v) => match self.capture(actor, row, v) {
                    Ok(c) => batch.stored.push(c),
                    Err(WorkflowError::ValidationFailed(f)) => batch.failures.extend(f),
                    Err(e) => return Err(e),
                },
                Err(reason) => batch.failures.push(RowFailure { row, reason }),
            }
        }
        Ok(batch)
    }

    pub fn register_taxpayer(&self, token: &str, form: &CaptureForm) -> Result<Captured, WorkflowError> {
        let s = self.authorize(token, "register_taxpayer", &[SessionRole::BirStaff])?;
        let v = form.validate().map_err(WorkflowError::invalid)?;
        self.capture(&s.principal, 1, v)
    }

    /// Stores every valid row; the rest come back as row-level failures.
    pub fn register_batch(&self, token: &str, csv_text: &str) -> Result<CaptureBatch, WorkflowError> {
        let s = self.authorize(token, "register_taxpayer", &[SessionRole::BirStaff])?;
        let rows = parse_capture_csv(csv_text).map_err(|e| WorkflowError::ValidationFailed(vec![RowFailure { row: 0, reason: e }]))?;
        self.capture_rows(&s.principal, rows)
    }

    pub fn capture_financials(&self, token: &str, form: &FinancialsForm) -> Result<Ack, WorkflowError> {
        let s = self.authorize(token, "capture_financials", &[SessionRole::BirStaff])?;
        if form.revenue_kobo < 0 || form.expenses_kobo < 0 {
            return Err(WorkflowError::invalid("revenue and expenses must not be negative"));
        }
        if self.pool.read(|st| st.business(&form.business_id).is_none()) {
            return Err(WorkflowError::NotFound(form.business_id.to_string()));
        }
        let now = self.clock.now();
        let financials = MonthlyFinancials {
            period: form.period,
            revenue: Money::from_kobo(form.revenue_kobo),
            expenses: Money::from_kobo(form.expenses_kobo),
            captured_at: now,
        };
        self.pool.put_record(&s.principal, now, NewRecord::Financials { business_id: form.business_id.clone(), financials })?;
        Ok(Ack::plain())
    }

    fn issue_tin_as(&self, actor: &str, taxpayer_id: &TaxpayerId) -> Result<TinGrant, WorkflowError> {
        let rec = self
            .pool
            .read(|s| s.taxpayer(taxpayer_id).cloned())
            .ok_or_else(|| WorkflowError::NotFound(taxpayer_id.to_string()))?;
        if rec.tin.is_some() {
            return Err(WorkflowError::AlreadyIssued(taxpayer_id.clone()));
        }
        let password = self.random_password();
        let now = self.clock.now();
        let tin = self.pool.issue_tin(actor, now, taxpayer_id, self.digest(&password)?)?;
        let note = Notification {
            body: Notification::body_for(&tin, &password),
            tin: tin.clone(),
            taxpayer_id: taxpayer_id.clone(),
            full_name: rec.full_name,
            email: rec.email,
            phone: rec.phone,
            default_password: password,
            sent_at: now,
        };
        let notified = match self.notifier.deliver(&note) {
            Ok(()) => true,
            Err(e) => {
                tracing::warn!(%tin, error = %e, "TIN notification not delivered");
                false
            }
        };
        Ok(TinGrant { taxpayer_id: taxpayer_id.clone(), tin, notified })
    }

    pub fn issue_tin(&self, token: &str, taxpayer_id: &TaxpayerId) -> Result<TinGrant, WorkflowError> {
        let s = self.authorize(token, "issue_tin", &[SessionRole::Admin])?;
        self.issue_tin_as(&s.principal, taxpayer_id)
    }

    pub fn change_password(&self, token: &str, old: &str, new: &str, confirm: &str) -> Result<Ack, WorkflowError> {
        let s = self.authorize(token, "change_password", &[SessionRole::Taxpayer])?;
        let (tin, rec) = self.taxpayer_of(&s)?;
        if !rec.password_hash.as_ref().is_some_and(|d| verify_password(old, d)) {
            return Err(WorkflowError::OldPasswordWrong);
        }
        if new != confirm {
            return Err(WorkflowError::ConfirmMismatch);
        }
        if new == old {
            return Err(WorkflowError::SameAsOld);
        }
        let digest = self.digest(new)?;
        self.pool.change_password(&s.principal, self.clock.now(), &tin, digest)?;
        self.sessions.lift_restriction(&s.principal);
        Ok(Ack { ok: true, display_message: Some(ScreenMessage::PasswordChanged) })
    }

    pub fn view_assessment(&self, token: &str) -> Result<AssessmentView, WorkflowError> {
        let s = self.authorize(token, "view_assessment", &[SessionRole::Taxpayer])?;
        let (tin, rec) = self.taxpayer_of(&s)?;
        let now = self.clock.now();
        self.pool.read(|st| {
            let businesses: Vec<BusinessAssessment> = st
                .businesses_of(&rec.taxpayer_id)
                .filter_map(|b| {
                    let a = b.assessment.as_ref()?;
                    Some(BusinessAssessment {
                        business_id: b.business_id.clone(),
                        business_name: b.business_name.clone(),
                        period: a.period,
                        net_profit: a.net_profit,
                        tier: a.tier,
                        tax: a.tax,
                    })
                })
                .collect();
            let tier = businesses.iter().map(|b| b.tier).max().ok_or(WorkflowError::NoAssessment)?;
            Ok(AssessmentView {
                tax_amount: businesses.iter().map(|b| b.tax).sum(),
                tier,
                businesses,
                tin: tin.clone(),
                taxpayer_name: rec.full_name.clone(),
                email: rec.email.clone(),
                phone: rec.phone.clone(),
                amount_editable: false,
                live_code: st.live_code_of(&tin, now).map(|c| c.code.clone()),
            })
        })
    }

    /// Any role may try; only BIR staff get through, as a logged review.
    pub fn write_assessment_amount(&self, token: &str, write: &AmountWrite) -> Result<Assessment, WorkflowError> {
        let s = self.authorize(token, "write_assessment_amount", &SessionRole::ALL)?;
        let now = self.clock.now();
        let target = match s.role {
            SessionRole::Taxpayer => {
                let (tin, rec) = self.taxpayer_of(&s)?;
                self.pool.read(|st| AmountTarget {
                    business_id: write.business_id.clone().or_else(|| {
                        st.businesses_of(&rec.taxpayer_id).find(|b| b.assessment.is_some()).map(|b| b.business_id.clone())
                    }),
                    code: st.live_code_of(&tin, now).map(|c| c.code.clone()),
                })
            }
            _ => AmountTarget { business_id: write.business_id.clone(), code: None },
        };
        if let Some(id) = &target.business_id {
            if self.pool.read(|st| st.business(id).is_none()) {
                return Err(WorkflowError::NotFound(id.to_string()));
            }
        }
        match self.agent.guard_amount_write(&s.principal, s.role, &target, Money::from_kobo(write.amount_kobo), now) {
            Ok(GuardOutcome::Blocked(_)) => Err(WorkflowError::AmountLocked),
            Ok(GuardOutcome::Allowed(a)) => Ok(a),
            Err(AgentError::NonPositiveAmount) => Err(WorkflowError::invalid("amount must not be negative")),
            Err(AgentError::MissingContext(what)) => Err(WorkflowError::invalid(format!("missing {what}"))),
            Err(e) => Err(e.into()),
        }
    }

    pub fn request_reference_code(&self, token: &str) -> Result<PaymentSlip, WorkflowError> {
        let s = self.authorize(token, "request_reference_code", &[SessionRole::Taxpayer])?;
        let (tin, rec) = self.taxpayer_of(&s)?;
        let now = self.clock.now();
        let (assessed, total) = self.pool.read(|st| {
            let taxes: Vec<Money> = st.businesses_of(&rec.taxpayer_id).filter_map(|b| b.assessment.as_ref().map(|a| a.tax)).collect();
            (!taxes.is_empty(), taxes.into_iter().sum::<Money>())
        });
        if !assessed {
            return Err(WorkflowError::NoAssessment);
        }
        let (code, reissued) = match self.agent.issue_reference_code(&tin, total, now) {
            Ok(code) => (code, false),
            Err(AgentError::OutstandingCode(live)) => (*live, true),
            Err(AgentError::NonPositiveAmount) => return Err(WorkflowError::NothingDue),
            Err(e) => return Err(e.into()),
        };
        let business_name = self.pool.read(|st| billing_name(st, &rec.taxpayer_id));
        Ok(PaymentSlip {
            reference_display: code.code.display(),
            reference_code: code.code,
            tax_amount: code.assessed_amount,
            taxpayer_name: rec.full_name,
            business_name,
            tin,
            date: code.issued_at,
            expires_at: code.expires_at,
            reissued,
        })
    }

    /// `presenter` is the TIN on the slip being presented, when the teller
    /// has it.
    pub fn bank_lookup(&self, token: &str, probe: &str, presenter: Option<&str>) -> Result<LookupView, WorkflowError> {
        let s = self.authorize(token, "bank_lookup", &[SessionRole::BankStaff])?;
        let presenter = presenter.filter(|p| !p.trim().is_empty()).map(parse_tin).transpose()?;
        let result = self.agent.verify_reference_code(probe, presenter.as_ref(), self.clock.now(), &s.principal)?;
        Ok(match result {
            VerificationResult::Valid(d) => LookupView::Genuine {
                reference_code: d.code,
                business_name: d.business_name,
                taxpayer_name: d.taxpayer_name,
                tax_amount: d.assessed,
                tin: d.tin,
            },
            VerificationResult::Stolen { owner_name } => LookupView::StolenNotice { owner_name },
            VerificationResult::NotFound | VerificationResult::Replayed | VerificationResult::Expired => {
                LookupView::Empty
            }
        })
    }

    /// The agent assesses first; only a clear attempt redeems the code.
    pub fn record_payment(&self, token: &str, req: &PaymentRequest) -> Result<PaymentOutcome, WorkflowError> {
        let s = self.authorize(token, "record_payment", &[SessionRole::BankStaff])?;
        if req.cash_kobo < 0 {
            return Err(WorkflowError::invalid("cash amount must not be negative"));
        }
        let presenter = parse_tin(&req.presenter_tin)?;
        let now = self.clock.now();
        let assessment =
            self.agent.assess_transaction(&req.code, &presenter, Money::from_kobo(req.cash_kobo), now, &s.principal)?;
        if assessment.is_alert() {
            let redeemed = CodeText::parse_lenient(&req.code)
                .ok()
                .and_then(|c| self.pool.read(|st| st.code(&c).map(|r| r.status)))
                == Some(CodeStatus::Redeemed);
            return Err(if redeemed && assessment.rule_hits.contains(&RuleHit::Replay) {
                WorkflowError::AlreadyRedeemed(Some(Box::new(assessment)))
            } else {
                WorkflowError::FraudDetected(Box::new(assessment))
            });
        }
        let code = parse_code(&req.code)?;
        let (transaction, receipt) = self.pool.record_payment(&s.principal, now, &code)?;
        Ok(PaymentOutcome { display_message: ScreenMessage::TransactionSuccessful, receipt, transaction, assessment })
    }

    pub fn reprint_receipt(&self, token: &str, probe: &str) -> Result<Receipt, WorkflowError> {
        let s = self.authorize(token, "reprint_receipt", &[SessionRole::Taxpayer])?;
        let tin = parse_tin(&s.principal)?;
        let code = CodeText::parse_lenient(probe).map_err(|_| WorkflowError::NotYourCode)?;
        self.pool.read(|st| {
            match st.code(&code) {
                Some(c) if c.owner == tin => {}
                _ => return Err(WorkflowError::NotYourCode),
            }
            st.receipt(&code).cloned().ok_or(WorkflowError::NotPaid)
        })
    }

    fn mine_as(&self, actor: &str) -> Result<MiningOutcome, WorkflowError> {
        let guide = self.guide();
        let report = run_extraction(&self.pool, &guide, self.clock.now(), actor)?;
        Ok(MiningOutcome { display_message: report.status, report })
    }

    pub fn mine(&self, token: &str) -> Result<MiningOutcome, WorkflowError> {
        let s = self.authorize(token, "mine", &[SessionRole::BirStaff])?;
        self.mine_as(&s.principal)
    }

    pub fn mining_report(&self, token: &str) -> Result<MiningReport, WorkflowError> {
        self.authorize(token, "mining_report", &[SessionRole::BirStaff, SessionRole::Admin])?;
        Ok(self.pool.read(MiningReport::from_state))
    }

    pub fn state_digest(&self, token: &str) -> Result<String, WorkflowError> {
        self.authorize(token, "state_digest", &[SessionRole::Admin])?;
        Ok(self.pool.digest())
    }

    pub fn install_model(&self, token: &str, model: AnnModel) -> Result<Ack, WorkflowError> {
        self.authorize(token, "install_model", &[SessionRole::Admin])?;
        self.agent.install_model(model)?;
        Ok(Ack::plain())
    }
}

/// Session-less operations for the operator console.
pub struct SystemOps<'a> {
    svc: &'a RevenueService,
}

impl SystemOps<'_> {
    /// Creates the first administrator. Refused once any admin exists.
    pub fn bootstrap_admin(&self, username: &str, password: &str) -> Result<StaffView, WorkflowError> {
        if self.svc.pool.read(|s| s.has_admin()) {
            return Err(WorkflowError::Forbidden { role: "anonymous", op: "bootstrap_admin" });
        }
        self.svc.create_account(ACTOR_SYSTEM, username, Role::Admin, password)
    }

    pub fn import_captures(&self, csv_text: &str) -> Result<CaptureBatch, WorkflowError> {
        let rows = parse_capture_csv(csv_text).map_err(|e| WorkflowError::ValidationFailed(vec![RowFailure { row: 0, reason: e }]))?;
        self.svc.capture_rows(ACTOR_SYSTEM, rows)
    }

    pub fn issue_tin(&self, taxpayer_id: &TaxpayerId) -> Result<TinGrant, WorkflowError> {
        self.svc.issue_tin_as(ACTOR_SYSTEM, taxpayer_id)
    }

    pub fn mine(&self) -> Result<MiningOutcome, WorkflowError> {
        self.svc.mine_as(ACTOR_SYSTEM)
    }
}
