//! Drive a population of honest and fraudulent taxpayers through the
//! service and see what the rules catch.
//!
//! ```bash
//! cargo run -p revenue-core --example fraud_simulation
//! ```

use std::sync::Arc;

use chrono::Utc;
use revenue_core::domain::PasswordHasher;
use revenue_core::pool::DataPool;
use revenue_core::sim::{simulate, Credentials, FraudMix, InProcessGateway, SimulationSpec};
use revenue_core::workflow::{MemoryNotifier, RevenueService};

fn main() {
    let notes = Arc::new(MemoryNotifier::new());
    let svc = RevenueService::builder(Arc::new(DataPool::in_memory()), b"simulation".to_vec())
        .notifier(notes.clone())
        .hasher(PasswordHasher::with_iterations(100))
        .build();
    svc.system().bootstrap_admin("admin", "admin-pass").unwrap();
    let admin = Credentials { username: "admin".into(), password: "admin-pass".into() };

    let mut spec = SimulationSpec::new(200, FraudMix::standard(), 42);
    spec.parallelism = 4;
    let out = simulate(&InProcessGateway::new(&svc, &notes), &spec, &admin, Utc::now()).unwrap();

    println!("{:<16}{:>9}{:>12}{:>10}{:>14}", "behavior", "attempts", "fraudulent", "accepted", "rule_flagged");
    for (behavior, s) in out.summary() {
        println!("{:<16}{:>9}{:>12}{:>10}{:>14}", behavior.as_str(), s.attempts, s.fraudulent, s.accepted, s.rule_flagged);
    }
    println!("rule recall {:.3}, honest payments flagged {}", out.rule_recall(), out.honest_rule_flags());
    println!("{} labeled examples ready for training", out.examples.len());
    println!("fraud alerts on record: {}", svc.pool().read(|s| s.fraud_alerts()));
}
