//! Revenue collection with fraud monitoring.
//!
//! Taxpayers and their monthly figures are captured into an append-only
//! data pool, mined into tax tiers, and billed through single-use payment
//! reference codes. An agent checks every bank payment against fixed rules
//! and a small neural scorer before it is recorded.
//!
//! | Module | Role |
//! |---|---|
//! | [`domain`] | Money, TINs, passwords, reference codes, records, screen messages |
//! | [`pool`] | Event-sourced store: audit log, snapshots, replay, live tap |
//! | [`miner`] | Cleansing, profitability and tier classification |
//! | [`agent`] | Code issue and verification, fraud rules, scorer training |
//! | [`workflow`] | Sessions and role-checked operations for every actor |
//! | [`sim`] | Honest and fraudulent taxpayer populations for testing and training |
//!
//! ## Examples
//!
//! ```bash
//! cargo run -p revenue-core --example tin_and_passwords   # TIN check digits, password hashing
//! cargo run -p revenue-core --example tier_mining         # CSV capture, mining, tax report
//! cargo run -p revenue-core --example reference_codes     # issue, verify, stolen and mistyped codes
//! cargo run -p revenue-core --example payment_workflow    # one taxpayer from capture to receipt
//! cargo run -p revenue-core --example fraud_simulation    # planted fraud against the rules
//! cargo run -p revenue-core --example ann_training        # train and evaluate the scorer
//! cargo run -p revenue-core --example audit_tap           # live audit feed, reload and replay
//! ```

pub mod agent;
pub mod domain;
pub mod miner;
pub mod pool;
pub mod sim;
pub mod workflow;
