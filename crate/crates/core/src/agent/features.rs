use std::io;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::AgentError;
use crate::domain::{CodeText, Money, Tier, Tin};
use crate::pool::{LoginStats, PoolState};

pub const FEATURE_NAMES: [&str; 6] = [
    "amount_deviation",
    "code_age_norm",
    "prior_lookup_count_norm",
    "tier_ordinal_norm",
    "failed_login_rate_norm",
    "channel_mismatch",
];

/// Code age at which `code_age_norm` saturates.
pub const CODE_AGE_SPAN_HOURS: f64 = 720.0;
/// Lookup count at which `prior_lookup_count_norm` saturates.
pub const LOOKUP_SATURATION: u32 = 5;

/// Inputs to the neural scorer, each in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    /// `|paid − assessed| / assessed`, capped at 1.
    pub amount_deviation: f64,
    pub code_age_norm: f64,
    pub prior_lookup_count_norm: f64,
    pub tier_ordinal_norm: f64,
    /// Share of the presenter's logins that failed; 0 with no logins.
    pub failed_login_rate_norm: f64,
    /// 1 when the presenter is not the code's owner.
    pub channel_mismatch: f64,
}

impl FeatureVector {
    pub fn to_array(&self) -> [f64; 6] {
        [
            self.amount_deviation,
            self.code_age_norm,
            self.prior_lookup_count_norm,
            self.tier_ordinal_norm,
            self.failed_login_rate_norm,
            self.channel_mismatch,
        ]
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        FeatureVector {
            amount_deviation: a[0],
            code_age_norm: a[1],
            prior_lookup_count_norm: a[2],
            tier_ordinal_norm: a[3],
            failed_login_rate_norm: a[4],
            channel_mismatch: a[5],
        }
    }
}

/// What the pool knows about a payment attempt on an existing code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TxnContext {
    pub assessed: Money,
    pub cash: Money,
    pub issued_at: DateTime<Utc>,
    pub now: DateTime<Utc>,
    /// Lookups of this code recorded before the attempt.
    pub prior_lookups: u32,
    /// Highest tier across the owner's assessed businesses.
    pub owner_tier: Option<Tier>,
    pub presenter_logins: LoginStats,
    pub presenter: Tin,
    pub owner: Tin,
}

fn unit(v: f64) -> f64 {
    v.clamp(0.0, 1.0)
}

pub fn featurize(ctx: &TxnContext) -> Result<FeatureVector, AgentError> {
    if !ctx.assessed.is_positive() {
        return Err(AgentError::MissingContext("assessed amount".into()));
    }
    let tier = ctx.owner_tier.ok_or_else(|| AgentError::MissingContext("owner tier".into()))?;
    let deviation = ctx.cash.abs_diff(ctx.assessed).kobo() as f64 / ctx.assessed.kobo() as f64;
    let age_hours = (ctx.now - ctx.issued_at).num_milliseconds() as f64 / 3_600_000.0;
    let LoginStats { ok, failed } = ctx.presenter_logins;
    let fail_rate = if ok + failed == 0 { 0.0 } else { failed as f64 / (ok + failed) as f64 };
    Ok(FeatureVector {
        amount_deviation: unit(deviation),
        code_age_norm: unit(age_hours / CODE_AGE_SPAN_HOURS),
        prior_lookup_count_norm: ctx.prior_lookups.min(LOOKUP_SATURATION) as f64 / LOOKUP_SATURATION as f64,
        tier_ordinal_norm: tier.ordinal() as f64 / Tier::T5.ordinal() as f64,
        failed_login_rate_norm: unit(fail_rate),
        channel_mismatch: if ctx.presenter == ctx.owner { 0.0 } else { 1.0 },
    })
}

/// Gathers the context for presenting `code` with `cash`. Fails when the
/// code does not exist.
pub fn context_for(
    state: &PoolState,
    code: &CodeText,
    presenter: &Tin,
    cash: Money,
    now: DateTime<Utc>,
) -> Result<TxnContext, AgentError> {
    let rec = state.code(code).ok_or_else(|| AgentError::MissingContext("unknown code".into()))?;
    let owner_tier = state.businesses_of(&rec.taxpayer_id).filter_map(|b| b.tier()).max();
    Ok(TxnContext {
        assessed: rec.assessed_amount,
        cash,
        issued_at: rec.issued_at,
        now,
        prior_lookups: state.code_activity(code).lookups,
        owner_tier,
        presenter_logins: state.login_stats(presenter.as_str()),
        presenter: presenter.clone(),
        owner: rec.owner.clone(),
    })
}

/// One row of training data: features plus 1 for fraud, 0 for legitimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabeledExample {
    #[serde(flatten)]
    pub features: FeatureVector,
    pub label: u8,
}

impl LabeledExample {
    pub fn is_fraud(&self) -> bool {
        self.label == 1
    }
}

pub fn to_training_pairs(examples: &[LabeledExample]) -> Vec<(Vec<f64>, f64)> {
    examples.iter().map(|e| (e.features.to_array().to_vec(), e.label as f64)).collect()
}

/// CSV with the six feature columns then `label`.
pub fn write_examples<W: io::Write>(out: W, examples: &[LabeledExample]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = FEATURE_NAMES.to_vec();
    header.push("label");
    w.write_record(&header)?;
    for e in examples {
        let mut row: Vec<String> = e.features.to_array().iter().map(f64::to_string).collect();
        row.push(e.label.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_examples<R: io::Read>(input: R) -> Result<Vec<LabeledExample>, AgentError> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers().map_err(|e| AgentError::Examples(e.to_string()))?.clone();
    let expected: Vec<&str> = FEATURE_NAMES.iter().copied().chain(["label"]).collect();
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(AgentError::Examples(format!("expected header {}", expected.join(","))));
    }
    let mut out = Vec::new();
    for (i, row) in r.records().enumerate() {
        let row = row.map_err(|e| AgentError::Examples(e.to_string()))?;
        let bad = |what: &str| AgentError::Examples(format!("row {}: {what}", i + 1));
        let mut values = [0.0; 6];
        for (k, v) in values.iter_mut().enumerate() {
            *v = row[k].parse::<f64>().map_err(|_| bad(FEATURE_NAMES[k]))?;
            if !(0.0..=1.0).contains(v) {
                return Err(bad(&format!("{} outside [0, 1]", FEATURE_NAMES[k])));
            }
        }
        let label = match &row[6] {
            "0" => 0,
            "1" => 1,
            _ => return Err(bad("label must be 0 or 1")),
        };
        out.push(LabeledExample { features: FeatureVector::from_array(values), label });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use chrono::{Duration, TimeZone};
    use proptest::prelude::*;

    use super::*;
    use crate::domain::mint_tin;

    fn ctx(assessed: i64, cash: i64) -> TxnContext {
        let t = Utc.with_ymd_and_hms(2024, 3, 1, 0, 0, 0).unwrap();
        TxnContext {
            assessed: Money::from_kobo(assessed),
            cash: Money::from_kobo(cash),
            issued_at: t,
            now: t + Duration::hours(36),
            prior_lookups: 2,
            owner_tier: Some(Tier::T3),
            presenter_logins: LoginStats { ok: 3, failed: 1 },
            presenter: mint_tin(1).unwrap(),
            owner: mint_tin(1).unwrap(),
        }
    }

    #[test]
    fn exact_payment_has_no_deviation() {
        let f = featurize(&ctx(300_000, 300_000)).unwrap();
        assert_eq!(f.amount_deviation, 0.0);
        assert_eq!(f.code_age_norm, 36.0 / 720.0);
        assert_eq!(f.prior_lookup_count_norm, 0.4);
        assert_eq!(f.tier_ordinal_norm, 0.6);
        assert_eq!(f.failed_login_rate_norm, 0.25);
        assert_eq!(f.channel_mismatch, 0.0);
    }

    #[test]
    fn zero_cash_is_full_deviation() {
        assert_eq!(featurize(&ctx(300_000, 0)).unwrap().amount_deviation, 1.0);
        assert_eq!(featurize(&ctx(300_000, 900_000)).unwrap().amount_deviation, 1.0);
        assert_eq!(featurize(&ctx(300_000, 150_000)).unwrap().amount_deviation, 0.5);
    }

    #[test]
    fn missing_context() {
        assert!(matches!(featurize(&ctx(0, 0)), Err(AgentError::MissingContext(_))));
        let mut c = ctx(1, 1);
        c.owner_tier = None;
        assert!(matches!(featurize(&c), Err(AgentError::MissingContext(_))));
    }

    #[test]
    fn examples_csv_round_trip() {
        let ex = vec![
            LabeledExample { features: featurize(&ctx(300_000, 1)).unwrap(), label: 1 },
            LabeledExample { features: featurize(&ctx(300_000, 300_000)).unwrap(), label: 0 },
        ];
        let mut buf = Vec::new();
        write_examples(&mut buf, &ex).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("amount_deviation,code_age_norm,prior_lookup_count_norm,tier_ordinal_norm,failed_login_rate_norm,channel_mismatch,label\n"));
        assert_eq!(read_examples(&buf[..]).unwrap(), ex);
        assert!(read_examples("a,b\n1,2\n".as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn components_stay_in_unit_range(
            assessed in 1i64..10_000_000_000,
            cash in 0i64..100_000_000_000,
            hours in -100i64..10_000,
            lookups in 0u32..100,
            ok in 0u32..50,
            failed in 0u32..50,
            tier in 1u8..=5,
            same in any::<bool>(),
        ) {
            let mut c = ctx(assessed, cash);
            c.now = c.issued_at + Duration::hours(hours);
            c.prior_lookups = lookups;
            c.presenter_logins = LoginStats { ok, failed };
            c.owner_tier = Some(Tier::TAXED[tier as usize - 1]);
            if !same {
                c.presenter = mint_tin(2).unwrap();
            }
            let f = featurize(&c).unwrap();
            prop_assert_eq!(f, featurize(&c).unwrap());
            for v in f.to_array() {
                prop_assert!(v.is_finite() && (0.0..=1.0).contains(&v));
            }
        }
    }
}
