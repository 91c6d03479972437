//! Issue a payment reference code and look it up the way a teller would:
//! by its owner, by a stranger, after payment, and as a typo.
//!
//! ```bash
//! cargo run -p revenue-core --example reference_codes
//! ```

use std::sync::Arc;

use chrono::Utc;
use revenue_core::domain::{Money, PasswordHasher};
use revenue_core::pool::DataPool;
use revenue_core::workflow::{MemoryNotifier, RevenueService, CAPTURE_HEADER};

fn main() {
    let notes = Arc::new(MemoryNotifier::new());
    let svc = RevenueService::builder(Arc::new(DataPool::in_memory()), b"reference-code secret".to_vec())
        .notifier(notes.clone())
        .hasher(PasswordHasher::with_iterations(1_000))
        .build();
    let csv = format!(
        "{}\nEsosa Obaseki,esosa@example.ng,,Esosa Bakery,Benin City,Food,2024-02,30000000,10000000\n\
         Ada Okon,ada@example.ng,,Okon Salon,Auchi,Beauty,2024-02,9000000,2000000\n",
        CAPTURE_HEADER.join(",")
    );
    let batch = svc.system().import_captures(&csv).unwrap();
    let owner = svc.system().issue_tin(&batch.stored[0].taxpayer_id).unwrap().tin;
    let stranger = svc.system().issue_tin(&batch.stored[1].taxpayer_id).unwrap().tin;

    let agent = svc.agent();
    let now = Utc::now();
    let code = agent.issue_reference_code(&owner, Money::from_naira(4_000), now).unwrap();
    println!("issued {} to {} for {}, expires {}", code.code.display(), owner.display(), code.assessed_amount, code.expires_at);

    // A second request while the first is live is refused; the slip is reissued instead.
    let again = agent.issue_reference_code(&owner, Money::from_naira(4_000), now);
    println!("second issue: {}", again.unwrap_err());

    let probe = code.code.display().to_lowercase();
    let show = |label: &str, presenter| {
        let result = agent.verify_reference_code(&probe, presenter, now, "example-teller").unwrap();
        println!("{label:<18} {}", serde_json::to_string(&result).unwrap());
    };
    show("owner presents:", Some(&owner));
    show("stranger presents:", Some(&stranger));

    let mut typo = probe.clone().into_bytes();
    let last = typo.len() - 1;
    typo[last] = if typo[last] == b'0' { b'1' } else { b'0' };
    let typo = String::from_utf8(typo).unwrap();
    let result = agent.verify_reference_code(&typo, Some(&owner), now, "example-teller").unwrap();
    println!("{:<18} {}", "typo:", serde_json::to_string(&result).unwrap());

    let verdict = agent.assess_transaction(&probe, &owner, Money::from_naira(4_000), now, "example-teller").unwrap();
    println!("exact-amount payment by owner: {:?}, rules {:?}", verdict.verdict, verdict.rule_hits);
    let short = agent.assess_transaction(&probe, &owner, Money::from_naira(3_000), now, "example-teller").unwrap();
    println!("short payment by owner: {:?}, rules {:?}", short.verdict, short.rule_hits);
}
