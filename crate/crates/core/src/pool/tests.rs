use chrono::{Duration, TimeZone};

use super::*;

fn t0() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2024, 3, 1, 9, 0, 0).unwrap()
}

fn digest() -> PasswordDigest {
    PasswordHasher::with_iterations(1).hash("pw", b"salt").unwrap()
}

fn draft(name: &str) -> TaxpayerDraft {
    TaxpayerDraft { full_name: name.into(), email: format!("{name}@example.ng"), phone: String::new(), tin: None }
}

fn taxpayer_with_tin(pool: &DataPool, name: &str) -> (TaxpayerId, Tin) {
    let RecordId::Taxpayer(id) = pool.put_record("clerk", t0(), NewRecord::Taxpayer(draft(name))).unwrap() else {
        panic!("expected taxpayer id")
    };
    let tin = pool.issue_tin("clerk", t0(), &id, digest()).unwrap();
    (id, tin)
}

fn code_for(pool: &DataPool, id: &TaxpayerId, tin: &Tin, seed: u8, kobo: i64) -> CodeText {
    let code = CodeText::from_bytes(&[seed; 10]);
    pool.issue_code(
        ACTOR_AGENT,
        t0(),
        ReferenceCode {
            code: code.clone(),
            owner: tin.clone(),
            taxpayer_id: id.clone(),
            assessed_amount: Money::from_kobo(kobo),
            issued_at: t0(),
            expires_at: t0() + Duration::hours(72),
            status: CodeStatus::Issued,
        },
    )
    .unwrap();
    code
}

#[test]
fn first_append_is_seq_one() {
    let pool = DataPool::in_memory();
    let mut payload = Payload::new();
    payload.insert("principal".into(), "alice".into());
    let seq = pool
        .append_event(NewEvent { at: t0(), actor: ACTOR_SYSTEM.into(), kind: EventKind::LoginOk, payload })
        .unwrap();
    assert_eq!(seq, 1);
    assert_eq!(pool.read(|s| s.login_stats("alice").ok), 1);
}

#[test]
fn malformed_raw_event_is_rejected_without_a_seq() {
    let pool = DataPool::in_memory();
    let err = pool
        .append_event(NewEvent { at: t0(), actor: "x".into(), kind: EventKind::TinIssued, payload: Payload::new() })
        .unwrap_err();
    assert!(matches!(err, PoolError::InvalidEvent(_)), "{err}");
    assert_eq!(pool.last_seq(), 0);
}

#[test]
fn taxpayer_round_trips_by_id_and_tin() {
    let pool = DataPool::in_memory();
    let (id, tin) = taxpayer_with_tin(&pool, "Ada");
    let Some(Record::Taxpayer(by_id)) = pool.get_record(&RecordId::Taxpayer(id)) else { panic!() };
    let Some(Record::Taxpayer(by_tin)) = pool.get_record(&RecordId::Tin(tin.clone())) else { panic!() };
    assert_eq!(by_id, by_tin);
    assert_eq!(by_id.full_name, "Ada");
    assert_eq!(by_id.tin, Some(tin));
    assert!(by_id.must_change_password);
    assert_eq!(pool.last_seq(), 2);
}

#[test]
fn business_with_unknown_owner_is_an_integrity_violation() {
    let pool = DataPool::in_memory();
    let err = pool
        .put_record(
            "clerk",
            t0(),
            NewRecord::Business(BusinessDraft {
                owner: TaxpayerId::from_serial(7),
                business_name: "Ghost Ltd".into(),
                location: "Benin".into(),
                sector: "Retail".into(),
            }),
        )
        .unwrap_err();
    assert!(matches!(err, PoolError::IntegrityViolation(_)), "{err}");
    assert_eq!(pool.last_seq(), 0);
}

#[test]
fn second_taxpayer_with_same_tin_is_duplicate() {
    let pool = DataPool::in_memory();
    let (_, tin) = taxpayer_with_tin(&pool, "Ada");
    let mut dup = draft("Bola");
    dup.tin = Some(tin.clone());
    let err = pool.put_record("clerk", t0(), NewRecord::Taxpayer(dup)).unwrap_err();
    assert!(matches!(err, PoolError::DuplicateTin(t) if t == tin));
}

#[test]
fn issuance_skips_tins_captured_directly() {
    let pool = DataPool::in_memory();
    let mut pre = draft("Pre");
    pre.tin = Some(mint_tin(1).unwrap());
    pool.put_record("clerk", t0(), NewRecord::Taxpayer(pre)).unwrap();
    let (_, tin) = taxpayer_with_tin(&pool, "Next");
    assert_eq!(tin, mint_tin(2).unwrap());
}

#[test]
fn tin_is_issued_once() {
    let pool = DataPool::in_memory();
    let (id, _) = taxpayer_with_tin(&pool, "Ada");
    assert!(matches!(pool.issue_tin("clerk", t0(), &id, digest()), Err(PoolError::AlreadyIssued(_))));
}

#[test]
fn redeem_is_single_use() {
    let pool = DataPool::in_memory();
    let (id, tin) = taxpayer_with_tin(&pool, "Ada");
    let code = code_for(&pool, &id, &tin, 1, 300_000);
    let rec = pool.redeem_code("teller", t0(), &code).unwrap();
    assert_eq!(rec.status, CodeStatus::Redeemed);
    assert!(matches!(pool.redeem_code("teller", t0(), &code), Err(PoolError::AlreadyRedeemed)));
    let missing = CodeText::from_bytes(&[9; 10]);
    assert!(matches!(pool.redeem_code("teller", t0(), &missing), Err(PoolError::NotFound(_))));
}

#[test]
fn expired_code_cannot_be_redeemed() {
    let pool = DataPool::in_memory();
    let (id, tin) = taxpayer_with_tin(&pool, "Ada");
    let code = code_for(&pool, &id, &tin, 1, 300_000);
    let late = t0() + Duration::hours(73);
    assert!(matches!(pool.redeem_code("teller", late, &code), Err(PoolError::ExpiredOrVoided)));
}

#[test]
fn second_live_code_is_refused() {
    let pool = DataPool::in_memory();
    let (id, tin) = taxpayer_with_tin(&pool, "Ada");
    let first = code_for(&pool, &id, &tin, 1, 300_000);
    let mut second = pool.read(|s| s.code(&first).cloned()).unwrap();
    second.code = CodeText::from_bytes(&[2; 10]);
    assert!(matches!(pool.issue_code(ACTOR_AGENT, t0(), second), Err(PoolError::OutstandingCode(c)) if c == first));
}

#[test]
fn payment_writes_transaction_and_receipt_atomically() {
    let pool = DataPool::in_memory();
    let (id, tin) = taxpayer_with_tin(&pool, "Ada");
    pool.put_record(
        "clerk",
        t0(),
        NewRecord::Business(BusinessDraft {
            owner: id.clone(),
            business_name: "Ada Foods".into(),
            location: "Benin".into(),
            sector: "Food".into(),
        }),
    )
    .unwrap();
    let code = code_for(&pool, &id, &tin, 3, 450_000);
    let before = pool.last_seq();
    let (txn, receipt) = pool.record_payment("teller", t0(), &code).unwrap();
    assert_eq!(pool.last_seq(), before + 1);
    assert_eq!(txn.amount_paid, Money::from_kobo(450_000));
    assert_eq!(txn.outcome, TxnOutcome::Success);
    assert_eq!(receipt.business_name, "Ada Foods");
    assert_eq!(receipt.tin, tin);
    assert_eq!(pool.read(|s| s.receipt(&code).cloned()), Some(receipt));
    assert!(matches!(pool.record_payment("teller", t0(), &code), Err(PoolError::AlreadyRedeemed)));
}

#[test]
fn alert_voids_issued_code_and_keeps_rejected_txn() {
    let pool = DataPool::in_memory();
    let (id, tin) = taxpayer_with_tin(&pool, "Ada");
    let (_, thief) = taxpayer_with_tin(&pool, "Thief");
    let code = code_for(&pool, &id, &tin, 4, 100_000);
    let txn = pool
        .record_alert(
            ACTOR_AGENT,
            t0(),
            AlertDraft {
                probe: code.to_string(),
                presenter: Some(thief.clone()),
                cash: Some(Money::from_kobo(100_000)),
                rule_hits: vec![RuleHit::StolenCode],
                ann_score: Some(0.93),
                void_code: true,
                teller: Some("teller".into()),
            },
        )
        .unwrap()
        .expect("code exists");
    assert_eq!(txn.outcome, TxnOutcome::Rejected);
    assert_eq!(txn.payer, thief);
    assert_eq!(pool.read(|s| s.code(&code).unwrap().status), CodeStatus::Voided);
    assert_eq!(pool.read(|s| s.fraud_alerts()), 1);
}

#[test]
fn tap_sees_events_in_order_from_subscription() {
    let pool = DataPool::in_memory();
    taxpayer_with_tin(&pool, "Ada");
    let n = pool.last_seq();
    let mut a = pool.subscribe_tap().unwrap();
    let mut b = pool.subscribe_tap().unwrap();
    for ok in [true, false, true] {
        pool.record_login(t0(), "ada", ok).unwrap();
    }
    let seqs_a: Vec<u64> = (0..3).map(|_| a.try_recv().unwrap().seq).collect();
    let seqs_b: Vec<u64> = (0..3).map(|_| b.try_recv().unwrap().seq).collect();
    assert_eq!(seqs_a, vec![n + 1, n + 2, n + 3]);
    assert_eq!(seqs_a, seqs_b);
    assert!(a.try_recv().is_none());
}

#[test]
fn closed_pool_refuses_writes_and_taps() {
    let pool = DataPool::in_memory();
    let mut tap = pool.subscribe_tap().unwrap();
    pool.close().unwrap();
    assert!(matches!(pool.record_login(t0(), "x", true), Err(PoolError::PoolClosed)));
    assert!(matches!(pool.subscribe_tap(), Err(PoolError::PoolClosed)));
    assert!(tap.recv().is_none(), "taps end when the pool closes");
}

#[test]
fn review_keeps_tier_and_replaces_tax() {
    let pool = DataPool::in_memory();
    let (id, _) = taxpayer_with_tin(&pool, "Ada");
    let RecordId::Business(bid) = pool
        .put_record(
            "clerk",
            t0(),
            NewRecord::Business(BusinessDraft {
                owner: id,
                business_name: "Ada Foods".into(),
                location: "Benin".into(),
                sector: "Food".into(),
            }),
        )
        .unwrap()
    else {
        panic!()
    };
    assert!(matches!(pool.review_assessment("officer", t0(), &bid, Money::ZERO), Err(PoolError::NotFound(_))));
    let run = pool
        .commit_mining(
            ACTOR_SYSTEM,
            t0(),
            &[TierAssignment {
                business_id: bid.clone(),
                period: Period::new(2024, 2).unwrap(),
                net_profit: Money::from_naira(150_000),
                tier: Tier::T2,
                tax: Money::from_naira(4_500),
            }],
            "Extraction successful!",
            0,
        )
        .unwrap();
    assert_eq!(run, "RUN000001");
    let a = pool.review_assessment("officer", t0(), &bid, Money::from_naira(4_000)).unwrap();
    assert_eq!(a.tier, Tier::T2);
    assert_eq!(a.tax, Money::from_naira(4_000));
    assert_eq!(a.source, AssessmentSource::Review { reviewer: "officer".into() });
}
