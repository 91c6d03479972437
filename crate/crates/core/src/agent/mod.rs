//! The background agent: issues single-use reference codes, verifies them at
//! the bank, guards the assessed amount against alteration and scores
//! payment attempts with deterministic rules plus a small neural network.

mod ann;
mod features;
mod metrics;
mod monitor;
pub mod synthetic;

use std::collections::BTreeSet;
use std::sync::Arc;

use chrono::{DateTime, Duration, Utc};
use hmac::{Hmac, Mac};
use parking_lot::{Mutex, RwLock};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::Sha256;
use thiserror::Error;

pub use ann::{sigmoid, train, AnnError, AnnModel, Gradient, TrainOptions, LAYER_SIZES};
pub use features::{
    context_for, featurize, read_examples, to_training_pairs, write_examples, FeatureVector, LabeledExample, TxnContext,
    CODE_AGE_SPAN_HOURS, FEATURE_NAMES, LOOKUP_SATURATION,
};
pub use metrics::{auc, evaluate, Metrics};
pub use monitor::{Sentinel, SentinelStats};

use crate::domain::*;
use crate::pool::{billing_name, AlertDraft, DataPool, PoolError, ACTOR_AGENT};

pub const DEFAULT_ALERT_THRESHOLD: f64 = 0.8;
pub const DEFAULT_CODE_LIFETIME_HOURS: i64 = 72;
const ISSUE_ATTEMPTS: usize = 3;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("no taxpayer holds TIN {0}")]
    UnknownTin(Tin),
    #[error("assessed amount must be positive")]
    NonPositiveAmount,
    #[error("could not mint a unique reference code")]
    CollisionRetryExhausted,
    #[error("taxpayer already holds live code {}", .0.code)]
    OutstandingCode(Box<ReferenceCode>),
    #[error("no scoring model is loaded")]
    ModelUnloaded,
    #[error("missing context: {0}")]
    MissingContext(String),
    #[error("labeled examples: {0}")]
    Examples(String),
    #[error(transparent)]
    Model(#[from] AnnError),
    #[error(transparent)]
    Pool(#[from] PoolError),
}

#[derive(Debug, Clone)]
pub struct AgentConfig {
    pub secret: Vec<u8>,
    pub alert_threshold: f64,
    pub code_lifetime: Duration,
}

impl AgentConfig {
    pub fn new(secret: impl Into<Vec<u8>>) -> Self {
        AgentConfig {
            secret: secret.into(),
            alert_threshold: DEFAULT_ALERT_THRESHOLD,
            code_lifetime: Duration::hours(DEFAULT_CODE_LIFETIME_HOURS),
        }
    }
}

/// What a teller sees for a genuine code.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CodeDetails {
    pub code: CodeText,
    pub tin: Tin,
    pub taxpayer_name: String,
    pub business_name: String,
    pub assessed: Money,
    pub expires_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "outcome")]
pub enum VerificationResult {
    Valid(CodeDetails),
    /// Carries nothing, whatever was probed.
    NotFound,
    /// Presented by someone other than the owner; only the owner's name is
    /// revealed.
    Stolen { owner_name: String },
    Replayed,
    Expired,
}

impl VerificationResult {
    pub fn lookup_outcome(&self) -> LookupOutcome {
        match self {
            VerificationResult::Valid(_) => LookupOutcome::Valid,
            VerificationResult::NotFound => LookupOutcome::NotFound,
            VerificationResult::Stolen { .. } => LookupOutcome::Stolen,
            VerificationResult::Replayed => LookupOutcome::Replayed,
            VerificationResult::Expired => LookupOutcome::Expired,
        }
    }

    fn rule_hit(&self) -> Option<RuleHit> {
        match self {
            VerificationResult::Valid(_) => None,
            VerificationResult::NotFound => Some(RuleHit::CodeNotFound),
            VerificationResult::Stolen { .. } => Some(RuleHit::StolenCode),
            VerificationResult::Replayed => Some(RuleHit::Replay),
            VerificationResult::Expired => Some(RuleHit::ExpiredCode),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FraudAssessment {
    pub rule_hits: BTreeSet<RuleHit>,
    /// Absent when the code does not exist, so there is nothing to featurize.
    pub ann_score: Option<f64>,
    pub verdict: Verdict,
    pub display_message: ScreenMessage,
    pub features: Option<FeatureVector>,
    pub model_version: u32,
}

impl FraudAssessment {
    pub fn is_alert(&self) -> bool {
        self.verdict == Verdict::FraudAlert
    }
}

/// Verdict rule: any rule hit, or a score at or above `threshold`.
pub fn decide(rule_hits: &BTreeSet<RuleHit>, ann_score: Option<f64>, threshold: f64) -> Verdict {
    if !rule_hits.is_empty() || ann_score.is_some_and(|s| s >= threshold) {
        Verdict::FraudAlert
    } else {
        Verdict::Clear
    }
}

/// Which assessed amount a write targets.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AmountTarget {
    pub business_id: Option<BusinessId>,
    pub code: Option<CodeText>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum GuardOutcome {
    Blocked(ScreenMessage),
    Allowed(Assessment),
}

pub struct Birgent {
    pool: Arc<DataPool>,
    config: AgentConfig,
    model: RwLock<Option<Arc<AnnModel>>>,
    nonces: Mutex<Box<dyn RngCore + Send>>,
}

impl Birgent {
    /// An agent scoring with the all-zero model (every score 0.5) until a
    /// trained one is installed.
    pub fn new(pool: Arc<DataPool>, config: AgentConfig) -> Self {
        Self::with_nonce_source(pool, config, Box::new(ChaCha20Rng::from_os_rng()))
    }

    pub fn with_nonce_source(pool: Arc<DataPool>, config: AgentConfig, nonces: Box<dyn RngCore + Send>) -> Self {
        Birgent {
            pool,
            config,
            model: RwLock::new(Some(Arc::new(AnnModel::zeros(&LAYER_SIZES, 0)))),
            nonces: Mutex::new(nonces),
        }
    }

    pub fn pool(&self) -> &Arc<DataPool> {
        &self.pool
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn model(&self) -> Option<Arc<AnnModel>> {
        self.model.read().clone()
    }

    /// Swaps the scoring model; in-flight assessments keep the one they
    /// started with.
    pub fn install_model(&self, model: AnnModel) -> Result<(), AgentError> {
        model.validate()?;
        if model.input_width() != FEATURE_NAMES.len() {
            return Err(AnnError::DimensionMismatch(format!("model takes {} inputs", model.input_width())).into());
        }
        *self.model.write() = Some(Arc::new(model));
        Ok(())
    }

    pub fn unload_model(&self) {
        *self.model.write() = None;
    }

    fn mint(&self, owner: &Tin, assessed: Money, now: DateTime<Utc>) -> CodeText {
        let mut nonce = [0u8; 8];
        self.nonces.lock().fill_bytes(&mut nonce);
        let mut mac = Hmac::<Sha256>::new_from_slice(&self.config.secret).expect("HMAC accepts any key length");
        mac.update(owner.as_str().as_bytes());
        mac.update(&assessed.kobo().to_be_bytes());
        mac.update(&now.timestamp_nanos_opt().unwrap_or(now.timestamp()).to_be_bytes());
        mac.update(&nonce);
        let tag = mac.finalize().into_bytes();
        let mut head = [0u8; 10];
        head.copy_from_slice(&tag[..10]);
        CodeText::from_bytes(&head)
    }

    pub fn issue_reference_code(
        &self,
        owner: &Tin,
        assessed: Money,
        now: DateTime<Utc>,
    ) -> Result<ReferenceCode, AgentError> {
        let taxpayer_id = self
            .pool
            .read(|s| s.taxpayer_by_tin(owner).map(|t| t.taxpayer_id.clone()))
            .ok_or_else(|| AgentError::UnknownTin(owner.clone()))?;
        if !assessed.is_positive() {
            return Err(AgentError::NonPositiveAmount);
        }
        for _ in 0..ISSUE_ATTEMPTS {
            let rec = ReferenceCode {
                code: self.mint(owner, assessed, now),
                owner: owner.clone(),
                taxpayer_id: taxpayer_id.clone(),
                assessed_amount: assessed,
                issued_at: now,
                expires_at: now + self.config.code_lifetime,
                status: CodeStatus::Issued,
            };
            match self.pool.issue_code(ACTOR_AGENT, now, rec.clone()) {
                Ok(_) => return Ok(rec),
                Err(PoolError::DuplicateCode) => continue,
                Err(PoolError::OutstandingCode(live)) => {
                    let existing = self.pool.read(|s| s.code(&live).cloned()).expect("live code exists");
                    return Err(AgentError::OutstandingCode(Box::new(existing)));
                }
                Err(e) => return Err(e.into()),
            }
        }
        Err(AgentError::CollisionRetryExhausted)
    }

    /// Looks `probe` up by stored record and logs the lookup. A live code
    /// found past its expiry is expired on the spot.
    pub fn verify_reference_code(
        &self,
        probe: &str,
        presenter: Option<&Tin>,
        now: DateTime<Utc>,
        actor: &str,
    ) -> Result<VerificationResult, AgentError> {
        loop {
            let code = CodeText::parse_lenient(probe).ok();
            let (result, expire) = self.pool.read(|s| {
                let Some(rec) = code.as_ref().and_then(|c| s.code(c)) else {
                    return (VerificationResult::NotFound, false);
                };
                if presenter.is_some_and(|p| *p != rec.owner) {
                    let owner_name = s.taxpayer(&rec.taxpayer_id).map(|t| t.full_name.clone()).unwrap_or_default();
                    return (VerificationResult::Stolen { owner_name }, false);
                }
                match rec.status {
                    CodeStatus::Redeemed | CodeStatus::Voided => (VerificationResult::Replayed, false),
                    CodeStatus::Expired => (VerificationResult::Expired, false),
                    CodeStatus::Issued if now > rec.expires_at => (VerificationResult::Expired, true),
                    CodeStatus::Issued => {
                        let taxpayer = s.taxpayer(&rec.taxpayer_id);
                        (
                            VerificationResult::Valid(CodeDetails {
                                code: rec.code.clone(),
                                tin: rec.owner.clone(),
                                taxpayer_name: taxpayer.map(|t| t.full_name.clone()).unwrap_or_default(),
                                business_name: billing_name(s, &rec.taxpayer_id),
                                assessed: rec.assessed_amount,
                                expires_at: rec.expires_at,
                            }),
                            false,
                        )
                    }
                }
            });
            match self.pool.record_lookup(actor, now, probe, presenter, result.lookup_outcome(), expire) {
                Ok(_) => return Ok(result),
                // The code changed state between the read and the write; look again.
                Err(PoolError::IntegrityViolation(_)) if expire => continue,
                Err(e) => return Err(e.into()),
            }
        }
    }

    /// Runs the rule layer, then the scorer, on a payment attempt. An alert
    /// is logged (voiding the code when it was stolen) and the caller must
    /// abort the transaction.
    pub fn assess_transaction(
        &self,
        probe: &str,
        presenter: &Tin,
        cash: Money,
        now: DateTime<Utc>,
        teller: &str,
    ) -> Result<FraudAssessment, AgentError> {
        let model = self.model().ok_or(AgentError::ModelUnloaded)?;
        let code = CodeText::parse_lenient(probe).ok();
        let context = code.as_ref().and_then(|c| {
            self.pool.read(|s| context_for(s, c, presenter, cash, now).ok().map(|ctx| (ctx, s.code_activity(c))))
        });
        let verification = self.verify_reference_code(probe, Some(presenter), now, teller)?;

        let mut rule_hits: BTreeSet<RuleHit> = verification.rule_hit().into_iter().collect();
        if let Some((ctx, activity)) = &context {
            if ctx.cash != ctx.assessed {
                rule_hits.insert(RuleHit::AmountMismatch);
            }
            if activity.alteration_attempts > 0 {
                rule_hits.insert(RuleHit::AlterationAttempt);
            }
        }
        let features = context.as_ref().and_then(|(ctx, _)| featurize(ctx).ok());
        let ann_score = features.map(|f| model.forward(&f.to_array())).transpose()?;
        let verdict = decide(&rule_hits, ann_score, self.config.alert_threshold);
        let display_message = match verdict {
            Verdict::Clear => ScreenMessage::TransactionSuccessful,
            Verdict::FraudAlert => ScreenMessage::FraudAlert,
        };

        if verdict == Verdict::FraudAlert {
            self.pool.record_alert(
                ACTOR_AGENT,
                now,
                AlertDraft {
                    probe: probe.to_string(),
                    presenter: Some(presenter.clone()),
                    cash: Some(cash),
                    rule_hits: rule_hits.iter().copied().collect(),
                    ann_score,
                    void_code: rule_hits.contains(&RuleHit::StolenCode),
                    teller: Some(teller.to_string()),
                },
            )?;
            tracing::warn!(?rule_hits, ?ann_score, "payment attempt flagged");
        }
        Ok(FraudAssessment { rule_hits, ann_score, verdict, display_message, features, model_version: model.version })
    }

    /// Only BIR staff may set an assessed amount, and only as a logged
    /// review. Every other attempt is blocked and logged.
    pub fn guard_amount_write(
        &self,
        principal: &str,
        role: SessionRole,
        target: &AmountTarget,
        attempted: Money,
        now: DateTime<Utc>,
    ) -> Result<GuardOutcome, AgentError> {
        if role != SessionRole::BirStaff {
            self.pool.record_alteration(
                now,
                principal,
                role.as_str(),
                target.business_id.as_ref(),
                target.code.as_ref(),
                attempted,
            )?;
            return Ok(GuardOutcome::Blocked(ScreenMessage::AmountLocked));
        }
        if attempted.kobo() < 0 {
            return Err(AgentError::NonPositiveAmount);
        }
        let business_id =
            target.business_id.as_ref().ok_or_else(|| AgentError::MissingContext("business to review".into()))?;
        Ok(GuardOutcome::Allowed(self.pool.review_assessment(principal, now, business_id, attempted)?))
    }
}

#[cfg(test)]
mod tests;
