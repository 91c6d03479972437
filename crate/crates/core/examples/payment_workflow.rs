//! One taxpayer from capture to receipt: staff accounts, capture, mining,
//! TIN issuance, first login, reference code, bank payment and reprint.
//!
//! ```bash
//! cargo run -p revenue-core --example payment_workflow
//! ```

use std::sync::Arc;

use revenue_core::domain::{PasswordHasher, Role};
use revenue_core::pool::DataPool;
use revenue_core::workflow::{AmountWrite, CaptureForm, LookupView, MemoryNotifier, PaymentRequest, RevenueService};

fn main() {
    let notes = Arc::new(MemoryNotifier::new());
    let svc = RevenueService::builder(Arc::new(DataPool::in_memory()), b"workflow example".to_vec())
        .notifier(notes.clone())
        .hasher(PasswordHasher::with_iterations(1_000))
        .build();

    svc.system().bootstrap_admin("admin", "admin-pass").unwrap();
    let admin = svc.login_staff("admin", "admin-pass").unwrap().token;
    svc.create_staff(&admin, "bir_ada", Role::BirStaff, "bir-pass").unwrap();
    svc.create_staff(&admin, "bank_olu", Role::BankStaff, "bank-pass").unwrap();

    let bir = svc.login_staff("bir_ada", "bir-pass").unwrap();
    println!("[bir] {}", bir.display_message.text());
    let form = CaptureForm {
        full_name: "Osaro Igbinedion".into(),
        email: "osaro@example.ng".into(),
        business_name: "Osaro Printing Press".into(),
        location: "Benin City".into(),
        sector: "Printing".into(),
        period: Some("2024-02".into()),
        revenue_kobo: Some("120000000".into()),
        expenses_kobo: Some("70000000".into()),
        ..Default::default()
    };
    let captured = svc.register_taxpayer(&bir.token, &form).unwrap();
    let mined = svc.mine(&bir.token).unwrap();
    let entry = &mined.report.entries[0];
    println!("[bir] {} {} profit {} -> {:?}, tax {}", mined.display_message.text(), entry.business_name, entry.net_profit, entry.tier, entry.tax);

    let tin = svc.issue_tin(&admin, &captured.taxpayer_id).unwrap().tin;
    let note = notes.last_for(&tin).unwrap();
    println!("[notice] {}", note.body.lines().next().unwrap_or_default());

    let tp = svc.login_taxpayer(tin.as_str(), &note.default_password).unwrap();
    println!("[taxpayer] {} (must change password: {})", tp.display_message.text(), tp.must_change_password);
    let ack = svc.change_password(&tp.token, &note.default_password, "osaro-2024", "osaro-2024").unwrap();
    println!("[taxpayer] {}", ack.display_message.unwrap().text());
    let view = svc.view_assessment(&tp.token).unwrap();
    println!("[taxpayer] assessed {} (editable: {})", view.tax_amount, view.amount_editable);
    let refused = svc.write_assessment_amount(&tp.token, &AmountWrite { business_id: None, amount_kobo: 100 }).unwrap_err();
    println!("[taxpayer] tried to lower it: {refused}");
    let slip = svc.request_reference_code(&tp.token).unwrap();
    println!("[taxpayer] slip {} for {} ({})", slip.reference_display, slip.tax_amount, slip.business_name);

    let bank = svc.login_staff("bank_olu", "bank-pass").unwrap().token;
    if let LookupView::Genuine { business_name, tax_amount, .. } = svc.bank_lookup(&bank, &slip.reference_display, Some(tin.as_str())).unwrap() {
        println!("[bank] lookup: genuine, {business_name}, {tax_amount}");
    }
    let request = PaymentRequest { code: slip.reference_display.clone(), cash_kobo: slip.tax_amount.kobo(), presenter_tin: tin.to_string() };
    let paid = svc.record_payment(&bank, &request).unwrap();
    println!("[bank] {} receipt {} on {}", paid.display_message.text(), paid.receipt.receipt_no, paid.receipt.date.date_naive());
    let replay = svc.record_payment(&bank, &request).unwrap_err();
    println!("[bank] same slip again: {replay}");
    svc.logout(&bank);

    let reprint = svc.reprint_receipt(&tp.token, slip.reference_code.as_str()).unwrap();
    println!("[taxpayer] reprint matches: {}", reprint == paid.receipt);
    svc.logout(&tp.token);
}
