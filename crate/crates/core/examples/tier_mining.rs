//! Capture a batch of businesses from CSV, then mine them into tax tiers.
//!
//! ```bash
//! cargo run -p revenue-core --example tier_mining
//! ```

use std::sync::Arc;

use revenue_core::domain::Money;
use revenue_core::miner::{assess_tax, TierRateGuide};
use revenue_core::pool::DataPool;
use revenue_core::workflow::{RevenueService, CAPTURE_HEADER};

const ROWS: &[&str] = &[
    "Ngozi Eze,ngozi@example.ng,,Ngozi Tailoring,Benin City,Fashion,2024-02,4500000,1500000",
    "Tunde Bello,tunde@example.ng,,Bello Motors,Ekpoma,Transport,2024-02,60000000,35000000",
    "Ife Adeyemi,ife@example.ng,,Ife Pharmacy,Auchi,Health,2024-02,180000000,95000000",
    "Chidi Okafor,,+234 802 111 2222,Okafor Cement,Uromi,Building,2024-02,900000000,310000000",
    "Amaka Nwosu,amaka@example.ng,,Amaka Kitchen,Benin City,Food,2024-02,12000000,14000000",
    // No earnings figures: kept as a taxpayer, left out of mining.
    "Musa Garba,musa@example.ng,,Garba Stores,Igarra,Retail,,,",
    // Rejected at capture: no way to reach the taxpayer.
    "Bad Row,,,Nowhere Ltd,Benin City,Retail,2024-02,100,50",
];

fn main() {
    let guide = TierRateGuide::default();
    println!("rate guide:");
    for band in guide.bands() {
        let upper = band.upper.map_or("and above".to_string(), |m| format!("up to {m}"));
        println!("  {:?}: {upper} at {} per mille", band.tier, band.rate_permille);
    }
    let (tier, tax) = assess_tax(Money::from_naira(75_000), &guide);
    println!("profit of N75,000 -> {tier:?}, tax {tax}\n");

    let svc = RevenueService::builder(Arc::new(DataPool::in_memory()), b"example".to_vec()).build();
    let csv = format!("{}\n{}\n", CAPTURE_HEADER.join(","), ROWS.join("\n"));
    let batch = svc.system().import_captures(&csv).unwrap();
    println!("captured {} taxpayers", batch.stored.len());
    for f in &batch.failures {
        println!("  row {} refused: {}", f.row, f.reason);
    }

    let mined = svc.system().mine().unwrap();
    println!("\n{}", mined.display_message.text());
    print!("{}", mined.report.to_csv());
    for r in &mined.report.rejected {
        println!("left out: {} ({})", r.business_name, r.reason.as_str());
    }
    println!("total tax due: {}", mined.report.total_tax());
}
