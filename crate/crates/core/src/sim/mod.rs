//! Seeded payment-stream simulator. Captures a synthetic population through
//! the workflow, then plays honest and fraudulent payment attempts against
//! it and records what was planted next to what the agent decided.
//!
//! The same driver runs in-process or against a live server; only the
//! [`Gateway`] differs.

mod gateway;

use std::fmt;
use std::io;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};

use chrono::{DateTime, Utc};
use parking_lot::Mutex;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use gateway::{Gateway, GatewayError, InProcessGateway, PaymentReply};

use crate::agent::{FraudAssessment, LabeledExample};
use crate::domain::{Money, Period, Role, RuleHit, TaxpayerId, Tin, CODE_LEN};
use crate::workflow::{FinancialsForm, PaymentRequest, CAPTURE_HEADER};

const CROCKFORD: &[u8] = b"0123456789ABCDEFGHJKMNPQRSTVWXYZ";
const MISTYPE_RATE: f64 = 0.1;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation: {0}")]
    InvalidSpec(String),
    #[error("service call failed: {0}")]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Behavior {
    Honest,
    Suppression,
    StolenCode,
    Replay,
    FabricatedCode,
}

impl Behavior {
    pub const ALL: [Behavior; 5] =
        [Behavior::Honest, Behavior::Suppression, Behavior::StolenCode, Behavior::Replay, Behavior::FabricatedCode];

    pub fn as_str(self) -> &'static str {
        match self {
            Behavior::Honest => "honest",
            Behavior::Suppression => "suppression",
            Behavior::StolenCode => "stolen_code",
            Behavior::Replay => "replay",
            Behavior::FabricatedCode => "fabricated_code",
        }
    }
}

impl fmt::Display for Behavior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Behavior {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Behavior::ALL.into_iter().find(|b| b.as_str() == s.trim()).ok_or_else(|| format!("unknown behavior {s:?}"))
    }
}

/// Share of the population assigned to each behavior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FraudMix {
    pub honest: f64,
    pub suppression: f64,
    pub stolen_code: f64,
    pub replay: f64,
    pub fabricated_code: f64,
}

impl FraudMix {
    pub fn only(b: Behavior) -> Self {
        let mut mix = FraudMix { honest: 0.0, suppression: 0.0, stolen_code: 0.0, replay: 0.0, fabricated_code: 0.0 };
        *mix.share_mut(b) = 1.0;
        mix
    }

    /// 80% honest; the rest split across every fraud behavior.
    pub fn standard() -> Self {
        FraudMix { honest: 0.8, suppression: 0.05, stolen_code: 0.05, replay: 0.05, fabricated_code: 0.05 }
    }

    pub fn share(&self, b: Behavior) -> f64 {
        match b {
            Behavior::Honest => self.honest,
            Behavior::Suppression => self.suppression,
            Behavior::StolenCode => self.stolen_code,
            Behavior::Replay => self.replay,
            Behavior::FabricatedCode => self.fabricated_code,
        }
    }

    fn share_mut(&mut self, b: Behavior) -> &mut f64 {
        match b {
            Behavior::Honest => &mut self.honest,
            Behavior::Suppression => &mut self.suppression,
            Behavior::StolenCode => &mut self.stolen_code,
            Behavior::Replay => &mut self.replay,
            Behavior::FabricatedCode => &mut self.fabricated_code,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let shares = Behavior::ALL.map(|b| self.share(b));
        if shares.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(SimError::InvalidSpec("fractions must be finite and non-negative".into()));
        }
        let sum: f64 = shares.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(SimError::InvalidSpec(format!("fractions sum to {sum}, not 1")));
        }
        Ok(())
    }

    /// Whole-person counts for `n` taxpayers by largest remainder.
    pub fn counts(&self, n: usize) -> [usize; 5] {
        let exact = Behavior::ALL.map(|b| self.share(b) * n as f64);
        let mut counts = exact.map(|x| x.floor() as usize);
        let mut order: Vec<usize> = (0..5).collect();
        order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
        let short = n.saturating_sub(counts.iter().sum());
        for &i in order.iter().cycle().take(short) {
            counts[i] += 1;
        }
        counts
    }
}

impl FromStr for FraudMix {
    type Err = String;

    /// `honest=0.8,suppression=0.2`; unnamed behaviors get 0.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut mix = FraudMix { honest: 0.0, suppression: 0.0, stolen_code: 0.0, replay: 0.0, fabricated_code: 0.0 };
        for part in s.split(',').filter(|p| !p.trim().is_empty()) {
            let (name, value) = part.split_once('=').ok_or_else(|| format!("expected name=fraction, got {part:?}"))?;
            let b: Behavior = name.parse()?;
            *mix.share_mut(b) = value.trim().parse().map_err(|_| format!("bad fraction {value:?}"))?;
        }
        mix.validate().map_err(|e| e.to_string())?;
        Ok(mix)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSpec {
    pub n_taxpayers: usize,
    pub months: u32,
    pub fraud_mix: FraudMix,
    pub seed: u64,
    /// Concurrent workers driving the gateway.
    pub parallelism: usize,
    /// Prefix for staff usernames and taxpayer names, so several runs can
    /// share one pool.
    pub namespace: String,
}

impl SimulationSpec {
    pub fn new(n_taxpayers: usize, fraud_mix: FraudMix, seed: u64) -> Self {
        SimulationSpec { n_taxpayers, months: 1, fraud_mix, seed, parallelism: 4, namespace: "sim".into() }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        self.fraud_mix.validate()?;
        if self.n_taxpayers < 2 {
            return Err(SimError::InvalidSpec("need at least two taxpayers".into()));
        }
        if self.months == 0 {
            return Err(SimError::InvalidSpec("months must be at least 1".into()));
        }
        let ns_ok = !self.namespace.is_empty()
            && self.namespace.len() <= 20
            && self.namespace.bytes().all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_');
        if !ns_ok {
            return Err(SimError::InvalidSpec("namespace must be 1-20 of [a-z0-9_]".into()));
        }
        Ok(())
    }
}

/// Administrator account the simulator uses to create its staff and issue TINs.
#[derive(Debug, Clone)]
pub struct Credentials {
    pub username: String,
    pub password: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Presenter {
    Owner,
    Other,
}

/// One planted payment attempt. Contains nothing that varies between runs
/// with the same seed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruthRow {
    pub seq: usize,
    pub taxpayer: usize,
    pub behavior: Behavior,
    pub attempt: u8,
    pub assessed_kobo: i64,
    pub cash_kobo: i64,
    pub presenter: Presenter,
    pub label: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttemptOutcome {
    pub seq: usize,
    pub behavior: Behavior,
    pub label: u8,
    pub accepted: bool,
    pub display_message: String,
    pub assessment: Option<FraudAssessment>,
}

impl AttemptOutcome {
    pub fn rule_flagged(&self) -> bool {
        self.assessment.as_ref().is_some_and(|a| !a.rule_hits.is_empty())
    }

    pub fn has_rule(&self, hit: RuleHit) -> bool {
        self.assessment.as_ref().is_some_and(|a| a.rule_hits.contains(&hit))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct BehaviorSummary {
    pub attempts: usize,
    pub fraudulent: usize,
    pub accepted: usize,
    pub rule_flagged: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationOutcome {
    pub ground_truth: Vec<GroundTruthRow>,
    pub attempts: Vec<AttemptOutcome>,
    /// Attempts whose code existed, so the agent could featurize them.
    pub examples: Vec<LabeledExample>,
}

impl SimulationOutcome {
    pub fn write_ground_truth<W: io::Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.ground_truth {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn ground_truth_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_ground_truth(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    pub fn summary(&self) -> Vec<(Behavior, BehaviorSummary)> {
        Behavior::ALL
            .into_iter()
            .map(|b| {
                let mut s = BehaviorSummary::default();
                for a in self.attempts.iter().filter(|a| a.behavior == b) {
                    s.attempts += 1;
                    s.fraudulent += usize::from(a.label == 1);
                    s.accepted += usize::from(a.accepted);
                    s.rule_flagged += usize::from(a.rule_flagged());
                }
                (b, s)
            })
            .collect()
    }

    /// Share of fraudulent attempts the rule layer caught. Every planted
    /// fraud is rule-detectable, so this should be exactly 1.
    pub fn rule_recall(&self) -> f64 {
        let fraud: Vec<_> = self.attempts.iter().filter(|a| a.label == 1).collect();
        if fraud.is_empty() {
            return 1.0;
        }
        fraud.iter().filter(|a| a.rule_flagged()).count() as f64 / fraud.len() as f64
    }

    pub fn honest_rule_flags(&self) -> usize {
        self.attempts.iter().filter(|a| a.label == 0 && a.rule_flagged()).count()
    }

    pub fn fraud_alerts(&self) -> usize {
        self.attempts.iter().filter(|a| !a.accepted && a.assessment.as_ref().is_some_and(|x| x.is_alert())).count()
    }
}

struct Person {
    full_name: String,
    email: String,
    business_name: String,
    sector: &'static str,
    /// (revenue, expenses) per month, oldest first.
    months: Vec<(Money, Money)>,
    behavior: Behavior,
    mistype: bool,
    thief: usize,
    suppression: f64,
    forged_code: String,
}

struct Member {
    tin: Tin,
    token: String,
}

const SECTORS: [&str; 6] = ["Retail", "Transport", "Agriculture", "Hospitality", "Manufacturing", "Services"];
const TOWNS: [&str; 5] = ["Benin City", "Auchi", "Ekpoma", "Uromi", "Igarra"];

fn plan(spec: &SimulationSpec) -> Vec<Person> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let counts = spec.fraud_mix.counts(spec.n_taxpayers);
    let mut behaviors: Vec<Behavior> =
        Behavior::ALL.iter().zip(counts).flat_map(|(b, c)| std::iter::repeat_n(*b, c)).collect();
    behaviors.shuffle(&mut rng);
    let n = spec.n_taxpayers;
    behaviors
        .into_iter()
        .enumerate()
        .map(|(i, behavior)| {
            let months = (0..spec.months)
                .map(|_| {
                    let revenue = rng.random_range(50_000_i64..8_000_000) * 100;
                    let expenses = (revenue as f64 * rng.random_range(0.3..0.95)) as i64;
                    (Money::from_kobo(revenue), Money::from_kobo(expenses))
                })
                .collect();
            let mut thief = rng.random_range(0..n - 1);
            if thief >= i {
                thief += 1;
            }
            let forged_code: String =
                (0..CODE_LEN).map(|_| CROCKFORD[rng.random_range(0..CROCKFORD.len())] as char).collect();
            Person {
                full_name: format!("{} Taxpayer {i:05}", spec.namespace),
                email: format!("{}.{i:05}@example.ng", spec.namespace),
                business_name: format!("{} Enterprise {i:05}", spec.namespace),
                sector: SECTORS[rng.random_range(0..SECTORS.len())],
                months,
                mistype: behavior == Behavior::Honest && rng.random_bool(MISTYPE_RATE),
                thief,
                suppression: rng.random_range(0.2..=0.9),
                forged_code,
                behavior,
            }
        })
        .collect()
}

/// Runs `work(i)` for every `i < n` on up to `parallelism` threads and
/// returns the results in index order. Stops early on the first error.
fn fan_out<T: Send, E: Send>(
    n: usize,
    parallelism: usize,
    work: impl Fn(usize) -> Result<T, E> + Sync,
) -> Result<Vec<T>, E> {
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<T, E>>>> = (0..n).map(|_| Mutex::new(None)).collect();
    let failed = std::sync::atomic::AtomicBool::new(false);
    std::thread::scope(|scope| {
        for _ in 0..parallelism.clamp(1, n.max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n || failed.load(Ordering::Relaxed) {
                    break;
                }
                let r = work(i);
                if r.is_err() {
                    failed.store(true, Ordering::Relaxed);
                }
                *slots[i].lock() = Some(r);
            });
        }
    });
    let mut out = Vec::with_capacity(n);
    for slot in slots {
        match slot.into_inner() {
            Some(Ok(v)) => out.push(v),
            Some(Err(e)) => return Err(e),
            None => {}
        }
    }
    Ok(out)
}

fn password_for(spec: &SimulationSpec, i: usize) -> String {
    format!("{}-pw-{:016x}-{i}", spec.namespace, spec.seed)
}

fn capture_csv(people: &[Person], first: Period) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CAPTURE_HEADER).expect("in-memory write");
    for (i, p) in people.iter().enumerate() {
        let (revenue, expenses) = p.months[0];
        w.write_record([
            p.full_name.as_str(),
            p.email.as_str(),
            "",
            p.business_name.as_str(),
            TOWNS[i % TOWNS.len()],
            p.sector,
            &first.to_string(),
            &revenue.kobo().to_string(),
            &expenses.kobo().to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

/// Drives the full stream: capture, TIN issuance, first login, mining,
/// then one scenario per taxpayer. `as_of` fixes which months are
/// captured; pass the service's current time.
pub fn simulate(
    gateway: &dyn Gateway,
    spec: &SimulationSpec,
    admin: &Credentials,
    as_of: DateTime<Utc>,
) -> Result<SimulationOutcome, SimError> {
    spec.validate()?;
    let people = plan(spec);
    let latest = Period::of(as_of).previous();
    let periods: Vec<Period> = {
        let mut p = vec![latest];
        for _ in 1..spec.months {
            let prev = p.last().expect("non-empty").previous();
            p.push(prev);
        }
        p.reverse();
        p
    };

    let admin_token = gateway.staff_login(&admin.username, &admin.password)?;
    let bir_name = format!("{}_bir", spec.namespace);
    let bank_name = format!("{}_bank", spec.namespace);
    let staff_pw = format!("{}-staff-{:016x}", spec.namespace, spec.seed);
    for (name, role) in [(&bir_name, Role::BirStaff), (&bank_name, Role::BankStaff)] {
        match gateway.create_staff(&admin_token, name, role, &staff_pw) {
            Ok(()) => {}
            Err(e) if e.kind == "DuplicateUsername" => {}
            Err(e) => return Err(e.into()),
        }
    }
    let bir = gateway.staff_login(&bir_name, &staff_pw)?;
    let bank = gateway.staff_login(&bank_name, &staff_pw)?;

    let batch = gateway.register_batch(&bir, &capture_csv(&people, periods[0]))?;
    if !batch.failures.is_empty() || batch.stored.len() != people.len() {
        return Err(SimError::InvalidSpec(format!("capture rejected {} rows", batch.failures.len())));
    }
    let ids: Vec<(TaxpayerId, crate::domain::BusinessId)> =
        batch.stored.iter().map(|c| (c.taxpayer_id.clone(), c.business_id.clone())).collect();

    let members = fan_out(people.len(), spec.parallelism, |i| -> Result<Member, SimError> {
        let p = &people[i];
        for (m, period) in periods.iter().enumerate().skip(1) {
            let (revenue, expenses) = p.months[m];
            let form = FinancialsForm {
                business_id: ids[i].1.clone(),
                period: *period,
                revenue_kobo: revenue.kobo(),
                expenses_kobo: expenses.kobo(),
            };
            gateway.capture_financials(&bir, &form)?;
        }
        let tin = gateway.issue_tin(&admin_token, &ids[i].0)?;
        let default_pw = gateway.default_password(&tin)?;
        if p.mistype {
            let err = gateway.taxpayer_login(tin.as_str(), "not-my-password").expect_err("wrong password refused");
            if err.status != 401 {
                return Err(err.into());
            }
        }
        let token = gateway.taxpayer_login(tin.as_str(), &default_pw)?;
        let new_pw = password_for(spec, i);
        gateway.change_password(&token, &default_pw, &new_pw)?;
        Ok(Member { tin, token })
    })?;

    gateway.mine(&bir)?;

    let rows = fan_out(people.len(), spec.parallelism, |i| -> Result<Vec<(GroundTruthRow, AttemptOutcome)>, SimError> {
        let p = &people[i];
        let me = &members[i];
        let slip = gateway.request_code(&me.token)?;
        let assessed = slip.1.kobo();
        let (code, presenter, cash) = match p.behavior {
            Behavior::Honest | Behavior::Replay => (slip.0.clone(), Presenter::Owner, assessed),
            Behavior::Suppression => {
                let cut = (assessed as f64 * p.suppression).floor() as i64;
                (slip.0.clone(), Presenter::Owner, assessed - cut.max(1))
            }
            Behavior::StolenCode => (slip.0.clone(), Presenter::Other, assessed),
            Behavior::FabricatedCode => (p.forged_code.clone(), Presenter::Owner, assessed),
        };
        let presenter_tin = match presenter {
            Presenter::Owner => me.tin.clone(),
            Presenter::Other => members[p.thief].tin.clone(),
        };
        let first_label = u8::from(p.behavior != Behavior::Honest && p.behavior != Behavior::Replay);
        let mut attempts = vec![(1u8, code.clone(), cash, presenter, first_label)];
        if p.behavior == Behavior::Replay {
            attempts.push((2, code, cash, Presenter::Owner, 1));
        }
        let mut out = Vec::with_capacity(attempts.len());
        for (attempt, code, cash, presenter, label) in attempts {
            gateway.bank_lookup(&bank, &code, Some(presenter_tin.as_str()))?;
            let req = PaymentRequest { code, cash_kobo: cash, presenter_tin: presenter_tin.to_string() };
            let reply = gateway.pay(&bank, &req)?;
            let truth = GroundTruthRow {
                seq: 0,
                taxpayer: i,
                behavior: p.behavior,
                attempt,
                assessed_kobo: assessed,
                cash_kobo: cash,
                presenter,
                label,
            };
            let outcome = AttemptOutcome {
                seq: 0,
                behavior: p.behavior,
                label,
                accepted: reply.accepted,
                display_message: reply.display_message,
                assessment: reply.assessment,
            };
            out.push((truth, outcome));
        }
        Ok(out)
    })?;

    let mut ground_truth = Vec::new();
    let mut attempts = Vec::new();
    let mut examples = Vec::new();
    for (seq, (mut truth, mut outcome)) in rows.into_iter().flatten().enumerate() {
        truth.seq = seq;
        outcome.seq = seq;
        if let Some(features) = outcome.assessment.as_ref().and_then(|a| a.features) {
            examples.push(LabeledExample { features, label: outcome.label });
        }
        ground_truth.push(truth);
        attempts.push(outcome);
    }
    Ok(SimulationOutcome { ground_truth, attempts, examples })
}
