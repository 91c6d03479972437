use std::collections::HashSet;

use chrono::TimeZone;
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{RngCore, SeedableRng};

use super::*;
use crate::pool::{BusinessDraft, NewRecord, RecordId, TaxpayerDraft, TierAssignment, ACTOR_SYSTEM};

fn t0() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2024, 3, 5, 10, 0, 0).unwrap()
}

/// Always yields the same bytes.
struct FixedNonce;

impl RngCore for FixedNonce {
    fn next_u32(&mut self) -> u32 {
        7
    }
    fn next_u64(&mut self) -> u64 {
        7
    }
    fn fill_bytes(&mut self, dest: &mut [u8]) {
        dest.fill(7);
    }
}

struct World {
    agent: Birgent,
    pool: Arc<DataPool>,
}

fn world() -> World {
    let pool = Arc::new(DataPool::in_memory());
    let agent = Birgent::with_nonce_source(
        Arc::clone(&pool),
        AgentConfig::new(b"test secret".to_vec()),
        Box::new(StdRng::seed_from_u64(1)),
    );
    World { agent, pool }
}

/// Captures a taxpayer with one T2 business and an issued TIN.
fn taxpayer(pool: &DataPool, name: &str) -> Tin {
    let draft = TaxpayerDraft { full_name: name.into(), email: "a@example.ng".into(), phone: String::new(), tin: None };
    let RecordId::Taxpayer(id) = pool.put_record("clerk", t0(), NewRecord::Taxpayer(draft)).unwrap() else {
        unreachable!()
    };
    let b = BusinessDraft { owner: id.clone(), business_name: format!("{name} Stores"), location: "Benin".into(), sector: "Retail".into() };
    let RecordId::Business(bid) = pool.put_record("clerk", t0(), NewRecord::Business(b)).unwrap() else {
        unreachable!()
    };
    pool.commit_mining(
        ACTOR_SYSTEM,
        t0(),
        &[TierAssignment {
            business_id: bid,
            period: Period::new(2024, 2).unwrap(),
            net_profit: Money::from_naira(100_000),
            tier: Tier::T2,
            tax: Money::from_naira(3_000),
        }],
        ScreenMessage::ExtractionSuccessful.text(),
        0,
    )
    .unwrap();
    pool.issue_tin("clerk", t0(), &id, PasswordHasher::with_iterations(1).hash("pw", b"s").unwrap()).unwrap()
}

fn business_of(pool: &DataPool, tin: &Tin) -> BusinessId {
    pool.read(|s| {
        let id = s.taxpayer_by_tin(tin).unwrap().taxpayer_id.clone();
        let first = s.businesses_of(&id).next().unwrap().business_id.clone();
        first
    })
}

#[test]
fn issue_then_verify_round_trips() {
    let w = world();
    let tin = taxpayer(&w.pool, "Ada");
    let code = w.agent.issue_reference_code(&tin, Money::from_naira(3_000), t0()).unwrap();
    assert_eq!(code.expires_at - code.issued_at, Duration::hours(72));
    match w.agent.verify_reference_code(&code.code.display(), Some(&tin), t0(), "teller").unwrap() {
        VerificationResult::Valid(d) => {
            assert_eq!(d.assessed, Money::from_naira(3_000));
            assert_eq!(d.tin, tin);
            assert_eq!(d.taxpayer_name, "Ada");
            assert_eq!(d.business_name, "Ada Stores");
        }
        other => panic!("{other:?}"),
    }
    assert_eq!(w.pool.read(|s| s.code_activity(&code.code).lookups), 1);
}

#[test]
fn rendered_code_matches_format() {
    let w = world();
    let tin = taxpayer(&w.pool, "Ada");
    let code = w.agent.issue_reference_code(&tin, Money::from_naira(3_000), t0()).unwrap();
    let shown = code.code.display();
    let groups: Vec<&str> = shown.split('-').collect();
    assert_eq!(groups.len(), 4);
    for g in groups {
        assert_eq!(g.len(), 4);
        assert!(g.bytes().all(|b| b"0123456789ABCDEFGHJKMNPQRSTVWXYZ".contains(&b)), "{shown}");
    }
}

#[test]
fn hundred_thousand_mints_do_not_collide() {
    let w = world();
    let tin = mint_tin(1).unwrap();
    let mut seen = HashSet::with_capacity(100_000);
    for i in 0..100_000 {
        assert!(seen.insert(w.agent.mint(&tin, Money::from_kobo(300_000), t0() + Duration::seconds(i % 3))));
    }
}

#[test]
fn issuance_errors() {
    let w = world();
    let tin = taxpayer(&w.pool, "Ada");
    let stranger = mint_tin(999).unwrap();
    assert!(matches!(w.agent.issue_reference_code(&stranger, Money::from_naira(1), t0()), Err(AgentError::UnknownTin(_))));
    assert!(matches!(w.agent.issue_reference_code(&tin, Money::ZERO, t0()), Err(AgentError::NonPositiveAmount)));
    let first = w.agent.issue_reference_code(&tin, Money::from_naira(3_000), t0()).unwrap();
    match w.agent.issue_reference_code(&tin, Money::from_naira(3_000), t0()) {
        Err(AgentError::OutstandingCode(existing)) => assert_eq!(*existing, first),
        other => panic!("{other:?}"),
    }
}

#[test]
fn repeated_collisions_give_up_after_three_tries() {
    let pool = Arc::new(DataPool::in_memory());
    let agent = Birgent::with_nonce_source(Arc::clone(&pool), AgentConfig::new(b"k".to_vec()), Box::new(FixedNonce));
    let tin = taxpayer(&pool, "Ada");
    let first = agent.issue_reference_code(&tin, Money::from_naira(3_000), t0()).unwrap();
    pool.redeem_code("teller", t0(), &first.code).unwrap();
    assert!(matches!(
        agent.issue_reference_code(&tin, Money::from_naira(3_000), t0()),
        Err(AgentError::CollisionRetryExhausted)
    ));
}

#[test]
fn unknown_code_reveals_nothing() {
    let w = world();
    taxpayer(&w.pool, "Ada");
    for probe in ["0000-0000-0000-0000", "garbage", ""] {
        assert_eq!(w.agent.verify_reference_code(probe, None, t0(), "teller").unwrap(), VerificationResult::NotFound);
    }
}

#[test]
fn non_owner_sees_only_the_owner_name() {
    let w = world();
    let ada = taxpayer(&w.pool, "Ada Obi");
    let bola = taxpayer(&w.pool, "Bola");
    let code = w.agent.issue_reference_code(&ada, Money::from_naira(3_000), t0()).unwrap();
    assert_eq!(
        w.agent.verify_reference_code(code.code.as_str(), Some(&bola), t0(), "teller").unwrap(),
        VerificationResult::Stolen { owner_name: "Ada Obi".into() }
    );
}

#[test]
fn redeemed_code_is_replayed_and_stale_code_expires() {
    let w = world();
    let ada = taxpayer(&w.pool, "Ada");
    let code = w.agent.issue_reference_code(&ada, Money::from_naira(3_000), t0()).unwrap();
    w.pool.redeem_code("teller", t0(), &code.code).unwrap();
    assert_eq!(w.agent.verify_reference_code(code.code.as_str(), None, t0(), "t").unwrap(), VerificationResult::Replayed);

    let bola = taxpayer(&w.pool, "Bola");
    let stale = w.agent.issue_reference_code(&bola, Money::from_naira(3_000), t0()).unwrap();
    let late = t0() + Duration::hours(72) + Duration::seconds(1);
    assert_eq!(w.agent.verify_reference_code(stale.code.as_str(), None, late, "t").unwrap(), VerificationResult::Expired);
    assert_eq!(w.pool.read(|s| s.code(&stale.code).unwrap().status), CodeStatus::Expired);
    assert_eq!(w.agent.verify_reference_code(stale.code.as_str(), None, late, "t").unwrap(), VerificationResult::Expired);
}

#[test]
fn exact_payment_is_clear() {
    let w = world();
    let ada = taxpayer(&w.pool, "Ada");
    let code = w.agent.issue_reference_code(&ada, Money::from_naira(3_000), t0()).unwrap();
    let a = w.agent.assess_transaction(code.code.as_str(), &ada, Money::from_naira(3_000), t0(), "teller").unwrap();
    assert_eq!(a.verdict, Verdict::Clear);
    assert!(a.rule_hits.is_empty());
    assert_eq!(a.ann_score, Some(0.5));
    assert_eq!(a.display_message.text(), "Transaction ... successful!");
    assert_eq!(w.pool.read(|s| s.fraud_alerts()), 0);
}

#[test]
fn fabricated_code_is_an_alert() {
    let w = world();
    let ada = taxpayer(&w.pool, "Ada");
    let a = w.agent.assess_transaction("ABCD-EFGH-JKMN-PQRS", &ada, Money::from_naira(3_000), t0(), "teller").unwrap();
    assert_eq!(a.verdict, Verdict::FraudAlert);
    assert_eq!(a.rule_hits, BTreeSet::from([RuleHit::CodeNotFound]));
    assert_eq!(a.ann_score, None);
    assert_eq!(a.display_message.text(), "Fraud Attempt Alert!!!");
    assert_eq!(w.pool.read(|s| s.fraud_alerts()), 1);
}

#[test]
fn short_cash_is_amount_mismatch() {
    let w = world();
    let ada = taxpayer(&w.pool, "Ada");
    let code = w.agent.issue_reference_code(&ada, Money::from_naira(3_000), t0()).unwrap();
    let a = w.agent.assess_transaction(code.code.as_str(), &ada, Money::from_naira(2_000), t0(), "teller").unwrap();
    assert_eq!(a.rule_hits, BTreeSet::from([RuleHit::AmountMismatch]));
    assert_eq!(a.verdict, Verdict::FraudAlert);
    assert!((a.features.unwrap().amount_deviation - 1.0 / 3.0).abs() < 1e-12);
    // Not stolen, so the code stays usable for a correct payment.
    assert_eq!(w.pool.read(|s| s.code(&code.code).unwrap().status), CodeStatus::Issued);
}

#[test]
fn stolen_code_is_voided() {
    let w = world();
    let ada = taxpayer(&w.pool, "Ada");
    let thief = taxpayer(&w.pool, "Thief");
    let code = w.agent.issue_reference_code(&ada, Money::from_naira(3_000), t0()).unwrap();
    let a = w.agent.assess_transaction(code.code.as_str(), &thief, Money::from_naira(3_000), t0(), "teller").unwrap();
    assert_eq!(a.rule_hits, BTreeSet::from([RuleHit::StolenCode]));
    assert_eq!(a.features.unwrap().channel_mismatch, 1.0);
    assert_eq!(w.pool.read(|s| s.code(&code.code).unwrap().status), CodeStatus::Voided);
}

#[test]
fn blocked_alteration_taints_the_code() {
    let w = world();
    let ada = taxpayer(&w.pool, "Ada");
    let code = w.agent.issue_reference_code(&ada, Money::from_naira(3_000), t0()).unwrap();
    let target = AmountTarget { business_id: Some(business_of(&w.pool, &ada)), code: Some(code.code.clone()) };
    let out = w.agent.guard_amount_write(ada.as_str(), SessionRole::Taxpayer, &target, Money::from_naira(10), t0()).unwrap();
    assert_eq!(out, GuardOutcome::Blocked(ScreenMessage::AmountLocked));
    assert_eq!(ScreenMessage::AmountLocked.text(), "Amount cannot be altered by taxpayers.");
    let a = w.agent.assess_transaction(code.code.as_str(), &ada, Money::from_naira(3_000), t0(), "teller").unwrap();
    assert_eq!(a.rule_hits, BTreeSet::from([RuleHit::AlterationAttempt]));
}

#[test]
fn only_bir_staff_may_set_amounts() {
    let w = world();
    let ada = taxpayer(&w.pool, "Ada");
    let target = AmountTarget { business_id: Some(business_of(&w.pool, &ada)), code: None };
    for role in [SessionRole::Taxpayer, SessionRole::BankStaff, SessionRole::Admin] {
        let out = w.agent.guard_amount_write("someone", role, &target, Money::from_naira(1), t0()).unwrap();
        assert_eq!(out, GuardOutcome::Blocked(ScreenMessage::AmountLocked), "{role:?}");
    }
    let mut tap = w.pool.subscribe_tap().unwrap();
    match w.agent.guard_amount_write("officer", SessionRole::BirStaff, &target, Money::from_naira(2_500), t0()).unwrap() {
        GuardOutcome::Allowed(a) => {
            assert_eq!(a.tax, Money::from_naira(2_500));
            assert_eq!(a.source, AssessmentSource::Review { reviewer: "officer".into() });
        }
        other => panic!("{other:?}"),
    }
    assert_eq!(tap.try_recv().unwrap().kind, crate::pool::EventKind::TierAssigned);
}

#[test]
fn unloaded_model_refuses_to_score() {
    let w = world();
    let ada = taxpayer(&w.pool, "Ada");
    w.agent.unload_model();
    assert!(matches!(
        w.agent.assess_transaction("x", &ada, Money::from_naira(1), t0(), "t"),
        Err(AgentError::ModelUnloaded)
    ));
}

#[test]
fn high_score_alone_raises_an_alert() {
    let w = world();
    let ada = taxpayer(&w.pool, "Ada");
    let mut hot = AnnModel::zeros(&LAYER_SIZES, 4);
    hot.biases[1][0] = 5.0;
    w.agent.install_model(hot).unwrap();
    let code = w.agent.issue_reference_code(&ada, Money::from_naira(3_000), t0()).unwrap();
    let a = w.agent.assess_transaction(code.code.as_str(), &ada, Money::from_naira(3_000), t0(), "t").unwrap();
    assert!(a.rule_hits.is_empty());
    assert!(a.ann_score.unwrap() >= DEFAULT_ALERT_THRESHOLD);
    assert_eq!(a.verdict, Verdict::FraudAlert);
    assert_eq!(a.model_version, 4);
    // A score-only alert leaves the code open for review.
    assert_eq!(w.pool.read(|s| s.code(&code.code).unwrap().status), CodeStatus::Issued);
}

#[test]
fn installing_a_mis_sized_model_fails() {
    let w = world();
    assert!(w.agent.install_model(AnnModel::zeros(&[5, 8, 1], 1)).is_err());
}

proptest! {
    #[test]
    fn rule_hits_always_alert(score in proptest::option::of(0.0f64..1.0), hits in prop::collection::btree_set(0usize..6, 1..6)) {
        let all = [RuleHit::CodeNotFound, RuleHit::StolenCode, RuleHit::Replay, RuleHit::AmountMismatch, RuleHit::AlterationAttempt, RuleHit::ExpiredCode];
        let hits: BTreeSet<RuleHit> = hits.into_iter().map(|i| all[i]).collect();
        prop_assert_eq!(decide(&hits, score, DEFAULT_ALERT_THRESHOLD), Verdict::FraudAlert);
    }

    #[test]
    fn near_misses_are_indistinguishable(pos in 0usize..16, sym in 0usize..32) {
        let w = world();
        let ada = taxpayer(&w.pool, "Ada");
        let real = w.agent.issue_reference_code(&ada, Money::from_naira(3_000), t0()).unwrap().code;
        let alphabet = b"0123456789ABCDEFGHJKMNPQRSTVWXYZ";
        let mut bytes = real.as_str().as_bytes().to_vec();
        prop_assume!(bytes[pos] != alphabet[sym]);
        bytes[pos] = alphabet[sym];
        let probe = String::from_utf8(bytes).unwrap();
        let near = w.agent.verify_reference_code(&probe, None, t0(), "t").unwrap();
        let far = w.agent.verify_reference_code("ZZZZ-ZZZZ-ZZZZ-ZZZZ", None, t0(), "t").unwrap();
        prop_assert_eq!(&near, &VerificationResult::NotFound);
        prop_assert_eq!(serde_json::to_string(&near).unwrap(), serde_json::to_string(&far).unwrap());
    }
}
