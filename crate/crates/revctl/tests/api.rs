mod common;

use common::{message, pw_change, Fixture, ADMIN};
use serde_json::{json, Value};

use revctl::client::ApiClient;
use revenue_core::miner::CSV_HEADER;
use revenue_core::sim::{simulate, Behavior, Credentials, FraudMix, SimulationSpec};
use revenue_core::workflow::CAPTURE_HEADER;

fn admin_creds() -> Credentials {
    Credentials { username: ADMIN.0.into(), password: ADMIN.1.into() }
}

fn as_of() -> chrono::DateTime<chrono::Utc> {
    "2024-03-10T09:00:00Z".parse().unwrap()
}

#[test]
fn health_answers_without_a_session() {
    let f = Fixture::new(1);
    let r = f.client.get("/api/health", None).unwrap();
    assert_eq!(r.status, 200);
    assert_eq!(r.str_field("status"), Some("ok"));
}

#[test]
fn unknown_paths_and_bad_bodies() {
    let f = Fixture::new(2);
    let r = f.client.get("/api/nope", None).unwrap();
    assert_eq!((r.status, r.str_field("error")), (404, Some("NotFound")));
    let r = f.client.post("/api/auth/staff-login", None, &json!({ "user": "x" })).unwrap();
    assert_eq!((r.status, r.str_field("error")), (400, Some("BadRequest")));
    let r = f.client.post("/api/admin/tin/not-an-id", Some(&f.admin()), &json!({})).unwrap();
    assert_eq!(r.status, 400);
}

#[test]
fn missing_token_is_401_wrong_role_is_403() {
    let f = Fixture::new(3);
    let r = f.client.get("/api/taxpayer/assessment", None).unwrap();
    assert_eq!((r.status, r.str_field("error")), (401, Some("Unauthorized")));
    let bank = f.staff("teller", "BankStaff");
    let r = f.client.post("/api/bir/mine", Some(&bank), &json!({})).unwrap();
    assert_eq!((r.status, r.str_field("error")), (403, Some("Forbidden")));
    let r = f.client.get("/api/admin/state-hash", Some(&bank)).unwrap();
    assert_eq!(r.status, 403);
    let r = f.client.get("/api/admin/state-hash", Some(&f.admin())).unwrap();
    assert_eq!(r.status, 200);
    assert_eq!(r.str_field("digest").map(str::len), Some(64));
}

#[test]
fn csv_capture_reports_rows() {
    let f = Fixture::new(4);
    let bir = f.staff("capture_clerk", "BirStaff");
    let csv = format!(
        "{}\nAda Obi,ada@example.ng,,Ada Foods,Benin,Food,2024-02,50000000,35000000\nNo Business,nb@example.ng,,,Benin,Food,2024-02,1,1\n",
        CAPTURE_HEADER.join(",")
    );
    let r = f.client.post_csv("/api/bir/taxpayers", Some(&bir), &csv).unwrap();
    assert_eq!(r.status, 200, "{:?}", r.body);
    assert_eq!(r.body["stored"].as_array().unwrap().len(), 1);
    assert_eq!(r.body["failures"][0]["row"], 2);

    let r = f.client.post_csv("/api/bir/taxpayers", Some(&bir), "just,a,bad,header\n").unwrap();
    assert_eq!((r.status, r.str_field("error")), (400, Some("ValidationFailed")));
}

#[test]
fn report_matches_mining_in_json_and_csv() {
    let f = Fixture::new(5);
    let bir = f.staff("miner", "BirStaff");
    f.active_taxpayer(&bir, "Ada Obi", 50_000_000, 35_000_000);
    let json_report = f.client.get("/api/bir/report", Some(&bir)).unwrap();
    assert_eq!(json_report.status, 200);
    let entry = &json_report.body["entries"][0];
    assert_eq!((entry["tier"].as_str(), entry["tax"].as_i64()), (Some("T2"), Some(450_000)));
    let csv = f.client.get("/api/bir/report?format=csv", Some(&bir)).unwrap();
    let text = csv.body.as_str().unwrap();
    assert_eq!(text.lines().next().unwrap(), CSV_HEADER.join(","));
    assert!(text.lines().nth(1).unwrap().ends_with(",T2,450000"), "{text}");
}

#[test]
fn lookup_states_and_fraud_body() {
    let f = Fixture::new(6);
    let bir = f.staff("bir_clerk", "BirStaff");
    let bank = f.staff("bank_clerk", "BankStaff");
    let (tin, _, tp) = f.active_taxpayer(&bir, "Efe Omo", 90_000_000, 20_000_000);
    let (thief_tin, _, _) = f.active_taxpayer(&bir, "Tunde Bello", 90_000_000, 20_000_000);
    let slip = f.client.post("/api/taxpayer/reference-code", Some(&tp), &json!({})).unwrap();
    assert_eq!(slip.status, 201);
    let again = f.client.post("/api/taxpayer/reference-code", Some(&tp), &json!({})).unwrap();
    assert_eq!((again.status, &again.body["reissued"]), (200, &Value::Bool(true)));
    let code = slip.str_field("reference_code").unwrap().to_string();
    let amount = slip.body["tax_amount"].as_i64().unwrap();

    let genuine = f.client.get(&format!("/api/bank/lookup/{code}?presenter={tin}"), Some(&bank)).unwrap();
    assert_eq!(genuine.str_field("state"), Some("Genuine"));
    assert_eq!(genuine.str_field("business_name"), Some("Efe Omo Ventures"));
    let empty = f.client.get("/api/bank/lookup/ZZZZZZZZZZZZZZZZ", Some(&bank)).unwrap();
    assert_eq!(empty.body, json!({ "state": "Empty" }));

    let short = f
        .client
        .post("/api/bank/payment", Some(&bank), &json!({ "code": code, "cash_kobo": amount - 100, "presenter_tin": tin }))
        .unwrap();
    assert_eq!(short.status, 409);
    assert_eq!(message(&short), "Fraud Attempt Alert!!!");
    assert_eq!(short.str_field("error"), Some("FraudDetected"));
    assert!(short.body["assessment"]["rule_hits"].as_array().unwrap().contains(&json!("AmountMismatch")));

    let stolen = f.client.get(&format!("/api/bank/lookup/{code}?presenter={thief_tin}"), Some(&bank)).unwrap();
    assert_eq!(stolen.str_field("state"), Some("StolenNotice"));
    assert_eq!(stolen.str_field("owner_name"), Some("Efe Omo"));
}

#[test]
fn amount_is_locked_for_taxpayers_but_reviewable_by_bir() {
    let f = Fixture::new(7);
    let bir = f.staff("reviewer", "BirStaff");
    let (_, _, tp) = f.active_taxpayer(&bir, "Ngozi Eze", 30_000_000, 10_000_000);
    let view = f.client.get("/api/taxpayer/assessment", Some(&tp)).unwrap();
    assert_eq!(view.body["amount_editable"], json!(false));
    let business = view.body["businesses"][0]["business_id"].as_str().unwrap().to_string();
    let r = f.client.put("/api/taxpayer/assessment", Some(&tp), &json!({ "amount_kobo": 1 })).unwrap();
    assert_eq!((r.status, message(&r)), (403, "Amount cannot be altered by taxpayers."));
    let r = f.client.put(&format!("/api/bir/assessment/{business}"), Some(&bir), &json!({ "amount_kobo": 777_700 })).unwrap();
    assert_eq!(r.status, 200, "{:?}", r.body);
    let view = f.client.get("/api/taxpayer/assessment", Some(&tp)).unwrap();
    assert_eq!(view.body["tax_amount"], json!(777_700));
}

#[test]
fn password_errors_are_400() {
    let f = Fixture::new(8);
    let bir = f.staff("pw_bir", "BirStaff");
    let (_, pw, tp) = f.active_taxpayer(&bir, "Bisi Ade", 30_000_000, 10_000_000);
    for (body, kind) in [
        (pw_change("wrong", "x-new-1", "x-new-1"), "OldPasswordWrong"),
        (pw_change(&pw, "x-new-1", "x-new-2"), "ConfirmMismatch"),
        (pw_change(&pw, &pw, &pw), "SameAsOld"),
    ] {
        let r = f.client.post("/api/taxpayer/password", Some(&tp), &body).unwrap();
        assert_eq!((r.status, r.str_field("error")), (400, Some(kind)));
    }
}

#[test]
fn model_install_is_admin_only() {
    let f = Fixture::new(9);
    let model = revenue_core::agent::AnnModel::random(&revenue_core::agent::LAYER_SIZES, 3, 1);
    let bir = f.staff("model_bir", "BirStaff");
    let r = f.client.post("/api/admin/model", Some(&bir), &model).unwrap();
    assert_eq!(r.status, 403);
    let r = f.client.post("/api/admin/model", Some(&f.admin()), &model).unwrap();
    assert_eq!(r.status, 200, "{:?}", r.body);
    assert_eq!(f.svc.agent().model().unwrap().version, 1);
    let mut broken = model.clone();
    broken.weights[0].pop();
    let r = f.client.post("/api/admin/model", Some(&f.admin()), &broken).unwrap();
    assert!(!r.is_success());
}

#[test]
fn honest_stream_over_http_raises_no_alert() {
    let f = Fixture::new(10);
    let mut spec = SimulationSpec::new(30, FraudMix::only(Behavior::Honest), 4);
    spec.parallelism = 6;
    let out = simulate(&f.gateway(), &spec, &admin_creds(), as_of()).unwrap();
    assert_eq!(out.fraud_alerts(), 0);
    assert!(out.attempts.iter().all(|a| a.accepted));
    let alerts = f.svc.pool().read(|s| s.fraud_alerts());
    assert_eq!(alerts, 0);
}

#[test]
fn fabricated_stream_over_http_is_always_refused() {
    let f = Fixture::new(11);
    let spec = SimulationSpec::new(20, FraudMix::only(Behavior::FabricatedCode), 5);
    let out = simulate(&f.gateway(), &spec, &admin_creds(), as_of()).unwrap();
    assert_eq!(out.attempts.len(), 20);
    for a in &out.attempts {
        assert!(!a.accepted);
        assert_eq!(a.display_message, "Fraud Attempt Alert!!!");
    }
    assert_eq!(f.svc.pool().read(|s| s.receipts().count()), 0);
}

#[test]
fn ground_truth_is_byte_identical_across_servers() {
    let run = |parallelism| {
        let f = Fixture::new(12);
        let mut spec = SimulationSpec::new(40, FraudMix::standard(), 99);
        spec.parallelism = parallelism;
        let out = simulate(&f.gateway(), &spec, &admin_creds(), as_of()).unwrap();
        // Feature values track the wall clock (code age); labels do not.
        let labels: Vec<u8> = out.examples.iter().map(|e| e.label).collect();
        (out.ground_truth_csv(), labels)
    };
    let (a, ea) = run(1);
    let (b, eb) = run(8);
    assert_eq!(a, b);
    assert_eq!(ea, eb);
}

#[test]
fn unreachable_service_is_reported() {
    let client = ApiClient::new("http://127.0.0.1:9").unwrap();
    let e = client.get("/api/health", None).unwrap_err();
    assert_eq!(e.kind, "ServiceUnreachable");
}
