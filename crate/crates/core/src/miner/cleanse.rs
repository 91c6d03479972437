use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::domain::{BusinessId, Money, MonthlyFinancials, Period, Tin};

/// A business's figures as captured, before any validation. Amounts are the
/// raw kobo text; blank means not captured.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CapturedRecord {
    pub business_id: Option<BusinessId>,
    /// TIN when issued, otherwise the taxpayer id. Duplicates are judged
    /// on this plus the normalized business name.
    pub owner_key: String,
    pub tin: Option<Tin>,
    pub business_name: String,
    pub period: Option<Period>,
    pub revenue: String,
    pub expenses: String,
    pub captured_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CleanRecord {
    pub business_id: Option<BusinessId>,
    pub owner_key: String,
    pub tin: Option<Tin>,
    pub business_name: String,
    pub financials: MonthlyFinancials,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RejectReason {
    MissingEarnings,
    DuplicateTin,
    MalformedNumeric,
    EmptyName,
}

impl RejectReason {
    pub fn as_str(self) -> &'static str {
        match self {
            RejectReason::MissingEarnings => "MissingEarnings",
            RejectReason::DuplicateTin => "DuplicateTin",
            RejectReason::MalformedNumeric => "MalformedNumeric",
            RejectReason::EmptyName => "EmptyName",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct CleansingReport {
    pub accepted: Vec<CleanRecord>,
    pub rejected: Vec<(CapturedRecord, RejectReason)>,
}

/// Trims, collapses inner whitespace and title-cases each word.
pub fn normalize_name(raw: &str) -> String {
    raw.split_whitespace()
        .map(|word| {
            let mut chars = word.chars();
            match chars.next() {
                Some(first) => first.to_uppercase().chain(chars.flat_map(char::to_lowercase)).collect(),
                None => String::new(),
            }
        })
        .collect::<Vec<String>>()
        .join(" ")
}

enum Amount {
    Blank,
    Bad,
    Kobo(Money),
}

fn parse_amount(raw: &str) -> Amount {
    let t = raw.trim();
    if t.is_empty() {
        return Amount::Blank;
    }
    if !t.bytes().all(|b| b.is_ascii_digit()) {
        return Amount::Bad;
    }
    t.parse::<i64>().map_or(Amount::Bad, |k| Amount::Kobo(Money::from_kobo(k)))
}

/// Validates and normalizes captured records. Every input ends up in exactly
/// one of `accepted` or `rejected`.
///
/// Checks run in order: empty name, missing earnings (blank amount or no
/// period), malformed amount, then duplicates on owner plus name, where the
/// latest `captured_at` survives (input order breaks ties).
pub fn cleanse(raw: Vec<CapturedRecord>) -> CleansingReport {
    let mut report = CleansingReport::default();
    let mut survivors: Vec<(usize, CapturedRecord, CleanRecord)> = Vec::new();

    for (idx, rec) in raw.into_iter().enumerate() {
        let name = normalize_name(&rec.business_name);
        if name.is_empty() {
            report.rejected.push((rec, RejectReason::EmptyName));
            continue;
        }
        let (revenue, expenses) = (parse_amount(&rec.revenue), parse_amount(&rec.expenses));
        let reason = match (&revenue, &expenses, rec.period) {
            (Amount::Blank, _, _) | (_, Amount::Blank, _) | (_, _, None) => Some(RejectReason::MissingEarnings),
            (Amount::Bad, _, _) | (_, Amount::Bad, _) => Some(RejectReason::MalformedNumeric),
            _ => None,
        };
        if let Some(reason) = reason {
            report.rejected.push((rec, reason));
            continue;
        }
        let (Amount::Kobo(revenue), Amount::Kobo(expenses), Some(period)) = (revenue, expenses, rec.period) else {
            unreachable!("checked above")
        };
        let clean = CleanRecord {
            business_id: rec.business_id.clone(),
            owner_key: rec.owner_key.trim().to_string(),
            tin: rec.tin.clone(),
            business_name: name,
            financials: MonthlyFinancials { period, revenue, expenses, captured_at: rec.captured_at },
        };
        survivors.push((idx, rec, clean));
    }

    let mut winner: BTreeMap<(String, String), usize> = BTreeMap::new();
    for (pos, (_, _, c)) in survivors.iter().enumerate() {
        let key = (c.owner_key.clone(), c.business_name.to_lowercase());
        match winner.get(&key) {
            Some(&best) if survivors[best].2.financials.captured_at > c.financials.captured_at => {}
            _ => {
                winner.insert(key, pos);
            }
        }
    }
    let keep: Vec<bool> = {
        let mut keep = vec![false; survivors.len()];
        for &pos in winner.values() {
            keep[pos] = true;
        }
        keep
    };
    for ((_, rec, clean), keep) in survivors.into_iter().zip(keep) {
        if keep {
            report.accepted.push(clean);
        } else {
            report.rejected.push((rec, RejectReason::DuplicateTin));
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use chrono::{Duration, TimeZone};
    use proptest::prelude::*;

    use super::*;

    fn rec(owner: &str, name: &str, revenue: &str, expenses: &str, minute: i64) -> CapturedRecord {
        CapturedRecord {
            business_id: None,
            owner_key: owner.into(),
            tin: None,
            business_name: name.into(),
            period: Period::new(2024, 2),
            revenue: revenue.into(),
            expenses: expenses.into(),
            captured_at: Utc.with_ymd_and_hms(2024, 3, 1, 0, 0, 0).unwrap() + Duration::minutes(minute),
        }
    }

    #[test]
    fn blank_revenue_is_missing_earnings() {
        let r = cleanse(vec![rec("TP000001", "Shop", "  ", "100", 0)]);
        assert_eq!(r.rejected[0].1, RejectReason::MissingEarnings);
        assert!(r.accepted.is_empty());
    }

    #[test]
    fn non_numeric_is_malformed() {
        for bad in ["12a", "-5", "1.5", "1,000"] {
            let r = cleanse(vec![rec("TP000001", "Shop", bad, "100", 0)]);
            assert_eq!(r.rejected[0].1, RejectReason::MalformedNumeric, "{bad}");
        }
    }

    #[test]
    fn empty_name_wins_over_other_reasons() {
        let r = cleanse(vec![rec("TP000001", "   ", "", "x", 0)]);
        assert_eq!(r.rejected[0].1, RejectReason::EmptyName);
    }

    #[test]
    fn latest_duplicate_wins() {
        let r = cleanse(vec![rec("ED000000018", "Shop", "500", "100", 5), rec("ED000000018", " SHOP ", "900", "100", 1)]);
        assert_eq!(r.accepted.len(), 1);
        assert_eq!(r.accepted[0].financials.revenue, Money::from_kobo(500));
        assert_eq!(r.rejected.len(), 1);
        assert_eq!(r.rejected[0].1, RejectReason::DuplicateTin);
        assert_eq!(r.rejected[0].0.revenue, "900");
    }

    #[test]
    fn same_name_under_different_owners_is_fine() {
        let r = cleanse(vec![rec("A", "Shop", "1", "0", 0), rec("B", "Shop", "1", "0", 0)]);
        assert_eq!(r.accepted.len(), 2);
    }

    #[test]
    fn names_are_normalized() {
        assert_eq!(normalize_name(" Mama Peace STORES "), "Mama Peace Stores");
        assert_eq!(normalize_name("oba\t\tmarket  stall"), "Oba Market Stall");
        let r = cleanse(vec![rec("A", " Mama Peace STORES ", "1", "0", 0)]);
        assert_eq!(r.accepted[0].business_name, "Mama Peace Stores");
    }

    fn arb_record() -> impl Strategy<Value = CapturedRecord> {
        (
            prop::sample::select(vec!["A", "B", "C"]),
            prop::sample::select(vec!["", " ", "Shop", "shop ", "Stall"]),
            prop::sample::select(vec!["", "0", "12", "x1", "999999"]),
            prop::sample::select(vec!["", "0", "7", "-1"]),
            0i64..5,
        )
            .prop_map(|(o, n, r, e, m)| rec(o, n, r, e, m))
    }

    proptest! {
        #[test]
        fn conservation(input in prop::collection::vec(arb_record(), 0..40)) {
            let n = input.len();
            let r = cleanse(input);
            prop_assert_eq!(r.accepted.len() + r.rejected.len(), n);
            let mut keys: Vec<_> = r.accepted.iter().map(|c| (c.owner_key.clone(), c.business_name.to_lowercase())).collect();
            let before = keys.len();
            keys.sort();
            keys.dedup();
            prop_assert_eq!(keys.len(), before);
            for c in &r.accepted {
                prop_assert!(!c.business_name.is_empty());
                prop_assert!(c.financials.revenue >= Money::ZERO && c.financials.expenses >= Money::ZERO);
            }
        }
    }
}
