use chrono::{DateTime, Duration, TimeZone, Utc};
use revenue_core::domain::*;
use revenue_core::miner::*;
use revenue_core::pool::*;

fn now() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2024, 3, 10, 12, 0, 0).unwrap()
}

fn business(pool: &DataPool, owner_name: &str, name: &str) -> (TaxpayerId, BusinessId) {
    let draft = TaxpayerDraft { full_name: owner_name.into(), email: "o@example.ng".into(), phone: String::new(), tin: None };
    let RecordId::Taxpayer(owner) = pool.put_record("clerk", now(), NewRecord::Taxpayer(draft)).unwrap() else {
        unreachable!()
    };
    let b = BusinessDraft { owner: owner.clone(), business_name: name.into(), location: "Benin".into(), sector: "Retail".into() };
    let RecordId::Business(id) = pool.put_record("clerk", now(), NewRecord::Business(b)).unwrap() else { unreachable!() };
    (owner, id)
}

fn financials(pool: &DataPool, id: &BusinessId, month: u32, rev_naira: i64, exp_naira: i64) {
    pool.put_record(
        "clerk",
        now(),
        NewRecord::Financials {
            business_id: id.clone(),
            financials: MonthlyFinancials {
                period: Period::new(2024, month).unwrap(),
                revenue: Money::from_naira(rev_naira),
                expenses: Money::from_naira(exp_naira),
                captured_at: now(),
            },
        },
    )
    .unwrap();
}

#[test]
fn single_business_is_assessed_and_persisted() {
    let pool = DataPool::in_memory();
    let (_, id) = business(&pool, "Ada", "Ada Foods");
    financials(&pool, &id, 2, 500_000, 350_000);
    let mut tap = pool.subscribe_tap().unwrap();

    let report = run_extraction(&pool, &TierRateGuide::default(), now(), "officer").unwrap();
    assert_eq!(report.status.text(), "Extraction successful!");
    assert_eq!(report.entries.len(), 1);
    let e = &report.entries[0];
    // Oracle: assess_tax on the same net profit.
    let (tier, tax) = assess_tax(Money::from_naira(150_000), &TierRateGuide::default());
    assert_eq!((e.tier, e.tax), (tier, tax));
    assert_eq!((e.tier, e.tax), (Tier::T2, Money::from_naira(4_500)));
    assert_eq!(report.tier_counts[&Tier::T2], 1);

    let stored = pool.read(|s| s.business(&id).unwrap().assessment.clone()).unwrap();
    assert_eq!((stored.tier, stored.tax), (Tier::T2, Money::from_naira(4_500)));

    let kinds: Vec<EventKind> = std::iter::from_fn(|| tap.try_recv()).map(|e| e.kind).collect();
    assert_eq!(kinds, vec![EventKind::TierAssigned, EventKind::MiningRun]);
}

#[test]
fn businesses_without_financials_cannot_be_clustered() {
    let pool = DataPool::in_memory();
    business(&pool, "Ada", "Ada Foods");
    let err = run_extraction(&pool, &TierRateGuide::default(), now(), "officer").unwrap_err();
    assert_eq!(
        err.to_string(),
        "Tax payers cannot be clustered into tiers..No records found on earnings or profit margin"
    );
    assert!(matches!(err, MinerError::NoEarningsRecords { rejected: 1 }));
}

#[test]
fn empty_pool_cannot_be_clustered() {
    let pool = DataPool::in_memory();
    let err = run_extraction(&pool, &TierRateGuide::default(), now(), "officer").unwrap_err();
    assert!(matches!(err, MinerError::NoEarningsRecords { rejected: 0 }));
}

#[test]
fn current_month_is_not_yet_complete() {
    let pool = DataPool::in_memory();
    let (_, id) = business(&pool, "Ada", "Ada Foods");
    financials(&pool, &id, 3, 900_000, 100_000);
    assert!(run_extraction(&pool, &TierRateGuide::default(), now(), "officer").is_err());
    financials(&pool, &id, 1, 100_000, 40_000);
    let report = run_extraction(&pool, &TierRateGuide::default(), now(), "officer").unwrap();
    assert_eq!(report.entries[0].period, Period::new(2024, 1).unwrap());
    assert_eq!(report.entries[0].net_profit, Money::from_naira(60_000));
}

#[test]
fn rerun_on_unchanged_pool_is_identical() {
    let pool = DataPool::in_memory();
    for (i, (rev, exp)) in [(500_000, 350_000), (80_000, 90_000), (9_000_000, 1_000_000), (60_000, 20_000)].iter().enumerate() {
        let (_, id) = business(&pool, &format!("Owner {i}"), &format!("Shop {i}"));
        financials(&pool, &id, 2, *rev, *exp);
    }
    business(&pool, "Late", "No Figures");
    let guide = TierRateGuide::default();
    let a = run_extraction(&pool, &guide, now(), "officer").unwrap();
    let b = run_extraction(&pool, &guide, now() + Duration::hours(1), "officer").unwrap();
    assert_ne!(a.run_id, b.run_id);
    assert_eq!(a.content(), b.content());
    assert_eq!(a.to_csv(), b.to_csv());
    assert_eq!(a.rejected.len(), 1);
    assert_eq!(a.tier_counts.values().sum::<usize>(), 4);
    assert_eq!(a.tier_counts[&Tier::Exempt], 1);
}

#[test]
fn duplicate_business_under_one_owner_keeps_latest() {
    let pool = DataPool::in_memory();
    let (owner, first) = business(&pool, "Ada", "Ada Foods");
    financials(&pool, &first, 2, 100_000, 10_000);
    let b = BusinessDraft { owner, business_name: " ADA  foods".into(), location: "Benin".into(), sector: "Food".into() };
    let RecordId::Business(second) =
        pool.put_record("clerk", now() + Duration::minutes(5), NewRecord::Business(b)).unwrap()
    else {
        unreachable!()
    };
    pool.put_record(
        "clerk",
        now() + Duration::minutes(5),
        NewRecord::Financials {
            business_id: second.clone(),
            financials: MonthlyFinancials {
                period: Period::new(2024, 2).unwrap(),
                revenue: Money::from_naira(300_000),
                expenses: Money::ZERO,
                captured_at: now() + Duration::minutes(5),
            },
        },
    )
    .unwrap();
    let report = run_extraction(&pool, &TierRateGuide::default(), now() + Duration::hours(1), "officer").unwrap();
    assert_eq!(report.entries.len(), 1);
    assert_eq!(report.entries[0].business_id, second);
    assert_eq!(report.entries[0].business_name, "Ada Foods");
    assert_eq!(report.rejected[0].reason, RejectReason::DuplicateTin);
}

#[test]
fn csv_export_and_report_from_state() {
    let pool = DataPool::in_memory();
    let (owner, id) = business(&pool, "Ada", "Ada Foods");
    pool.issue_tin("clerk", now(), &owner, PasswordHasher::with_iterations(1).hash("x", b"s").unwrap()).unwrap();
    financials(&pool, &id, 2, 500_000, 350_000);
    let report = run_extraction(&pool, &TierRateGuide::default(), now(), "officer").unwrap();
    let csv = report.to_csv();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("business_id,tin,period,net_profit_kobo,tier,tax_kobo"));
    assert_eq!(lines.next(), Some("BUS000001,ED000000018,2024-02,15000000,T2,450000"));
    assert_eq!(lines.next(), None);

    let rebuilt = pool.read(MiningReport::from_state);
    assert_eq!(rebuilt.entries, report.entries);
    assert_eq!(rebuilt.run_id, report.run_id);
}
