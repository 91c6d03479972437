use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use num_rational::Ratio;
use serde::Serialize;

use super::cleanse::{cleanse, CapturedRecord, RejectReason};
use super::guide::TierRateGuide;
use super::profit::compute_profitability;
use super::tree::assess_tax;
use super::MinerError;
use crate::domain::{AssessmentSource, BusinessId, Money, Period, ScreenMessage, Tier, Tin};
use crate::pool::{DataPool, PoolState, TierAssignment};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MiningEntry {
    pub business_id: BusinessId,
    pub tin: Option<Tin>,
    pub business_name: String,
    pub period: Period,
    pub net_profit: Money,
    #[serde(serialize_with = "ratio_as_string")]
    pub profit_margin: Ratio<i64>,
    pub tier: Tier,
    pub tax: Money,
}

fn ratio_as_string<S: serde::Serializer>(r: &Ratio<i64>, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(r)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Rejection {
    pub business_id: Option<BusinessId>,
    pub business_name: String,
    pub reason: RejectReason,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MiningReport {
    pub run_id: String,
    pub started_at: DateTime<Utc>,
    pub status: ScreenMessage,
    pub tier_counts: BTreeMap<Tier, usize>,
    /// One entry per assessed business, in business-id order.
    pub entries: Vec<MiningEntry>,
    pub rejected: Vec<Rejection>,
}

pub const CSV_HEADER: [&str; 6] = ["business_id", "tin", "period", "net_profit_kobo", "tier", "tax_kobo"];

impl MiningReport {
    fn new(run_id: String, started_at: DateTime<Utc>, entries: Vec<MiningEntry>, rejected: Vec<Rejection>) -> Self {
        let mut tier_counts: BTreeMap<Tier, usize> =
            std::iter::once(Tier::Exempt).chain(Tier::TAXED).map(|t| (t, 0)).collect();
        for e in &entries {
            *tier_counts.get_mut(&e.tier).expect("all tiers present") += 1;
        }
        MiningReport { run_id, started_at, status: ScreenMessage::ExtractionSuccessful, tier_counts, entries, rejected }
    }

    /// Rebuilds a report from the assessments already persisted in `state`.
    pub fn from_state(state: &PoolState) -> Self {
        let mut run_id = String::new();
        let mut started_at = DateTime::<Utc>::UNIX_EPOCH;
        let entries = state
            .businesses()
            .filter_map(|b| {
                let a = b.assessment.as_ref()?;
                if a.assessed_at >= started_at {
                    started_at = a.assessed_at;
                    if let AssessmentSource::Mining { run_id: r } = &a.source {
                        run_id = r.clone();
                    }
                }
                let margin = b
                    .financials
                    .iter()
                    .find(|f| f.period == a.period)
                    .filter(|f| f.revenue.kobo() > 0)
                    .map_or(Ratio::from_integer(0), |f| Ratio::new(a.net_profit.kobo(), f.revenue.kobo()));
                Some(MiningEntry {
                    business_id: b.business_id.clone(),
                    tin: state.taxpayer(&b.owner).and_then(|t| t.tin.clone()),
                    business_name: b.business_name.clone(),
                    period: a.period,
                    net_profit: a.net_profit,
                    profit_margin: margin,
                    tier: a.tier,
                    tax: a.tax,
                })
            })
            .collect();
        MiningReport::new(run_id, started_at, entries, Vec::new())
    }

    pub fn total_tax(&self) -> Money {
        self.entries.iter().map(|e| e.tax).sum()
    }

    /// `business_id,tin,period,net_profit_kobo,tier,tax_kobo`
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(CSV_HEADER).expect("in-memory write");
        for e in &self.entries {
            let tin = e.tin.as_ref().map(Tin::to_string).unwrap_or_default();
            w.write_record([
                e.business_id.as_str(),
                &tin,
                &e.period.to_string(),
                &e.net_profit.kobo().to_string(),
                e.tier.as_str(),
                &e.tax.kobo().to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is UTF-8")
    }

    /// The report with run-specific fields blanked, for comparing runs.
    pub fn content(&self) -> (&BTreeMap<Tier, usize>, &[MiningEntry], &[Rejection], ScreenMessage) {
        (&self.tier_counts, &self.entries, &self.rejected, self.status)
    }
}

/// Each business's latest financials from a month that has ended by `now`.
pub fn captured_records(state: &PoolState, now: DateTime<Utc>) -> Vec<CapturedRecord> {
    let current = Period::of(now);
    state
        .businesses()
        .map(|b| {
            let tin = state.taxpayer(&b.owner).and_then(|t| t.tin.clone());
            let latest = b.financials.iter().rev().find(|f| f.period < current);
            CapturedRecord {
                business_id: Some(b.business_id.clone()),
                owner_key: tin.as_ref().map_or_else(|| b.owner.to_string(), Tin::to_string),
                tin,
                business_name: b.business_name.clone(),
                period: latest.map(|f| f.period),
                revenue: latest.map(|f| f.revenue.kobo().to_string()).unwrap_or_default(),
                expenses: latest.map(|f| f.expenses.kobo().to_string()).unwrap_or_default(),
                captured_at: latest.map_or(now, |f| f.captured_at),
            }
        })
        .collect()
}

/// Cleanses, profiles, classifies and assesses every business in the pool,
/// then persists each assessment. The run reads one committed snapshot.
pub fn run_extraction(
    pool: &DataPool,
    guide: &TierRateGuide,
    now: DateTime<Utc>,
    actor: &str,
) -> Result<MiningReport, MinerError> {
    let state = pool.snapshot();
    let cleansed = cleanse(captured_records(&state, now));
    let rejected: Vec<Rejection> = cleansed
        .rejected
        .iter()
        .map(|(r, reason)| Rejection { business_id: r.business_id.clone(), business_name: r.business_name.clone(), reason: *reason })
        .collect();

    let mut entries = Vec::with_capacity(cleansed.accepted.len());
    for rec in &cleansed.accepted {
        let business_id = rec.business_id.clone().expect("pool records carry ids");
        let profit = compute_profitability(&business_id, &rec.financials)?;
        let (tier, tax) = assess_tax(profit.net_profit, guide);
        entries.push(MiningEntry {
            business_id,
            tin: rec.tin.clone(),
            business_name: rec.business_name.clone(),
            period: profit.period,
            net_profit: profit.net_profit,
            profit_margin: profit.profit_margin,
            tier,
            tax,
        });
    }
    entries.sort_by(|a, b| a.business_id.cmp(&b.business_id));

    let assignments: Vec<TierAssignment> = entries
        .iter()
        .map(|e| TierAssignment {
            business_id: e.business_id.clone(),
            period: e.period,
            net_profit: e.net_profit,
            tier: e.tier,
            tax: e.tax,
        })
        .collect();

    if entries.is_empty() {
        pool.commit_mining(actor, now, &[], ScreenMessage::NoEarningsRecords.text(), rejected.len())?;
        return Err(MinerError::NoEarningsRecords { rejected: rejected.len() });
    }
    let run_id =
        pool.commit_mining(actor, now, &assignments, ScreenMessage::ExtractionSuccessful.text(), rejected.len())?;
    tracing::info!(%run_id, assessed = entries.len(), rejected = rejected.len(), "mining run complete");
    Ok(MiningReport::new(run_id, now, entries, rejected))
}
