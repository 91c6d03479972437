//! The data pool on disk: watch its audit feed live, then reload it from the
//! snapshot and log, and replay the log alone.
//!
//! ```bash
//! cargo run -p revenue-core --example audit_tap
//! ```

use std::sync::Arc;

use revenue_core::agent::Sentinel;
use revenue_core::domain::PasswordHasher;
use revenue_core::pool::{replay_log_file, DataPool, PoolOptions, LOG_FILE};
use revenue_core::workflow::{MemoryNotifier, RevenueService, CAPTURE_HEADER};

fn main() {
    let dir = std::env::temp_dir().join(format!("revenue-audit-example-{}", std::process::id()));
    let pool = Arc::new(DataPool::open(&dir, PoolOptions::default()).unwrap());
    let sentinel = Sentinel::spawn(&pool).unwrap();

    let notes = Arc::new(MemoryNotifier::new());
    let svc = RevenueService::builder(pool.clone(), b"audit".to_vec())
        .notifier(notes.clone())
        .hasher(PasswordHasher::with_iterations(100))
        .build();
    svc.system().bootstrap_admin("admin", "admin-pass").unwrap();
    let csv = format!(
        "{}\nIyobosa Ehigie,iyo@example.ng,,Ehigie Farms,Ogba,Agriculture,2024-02,25000000,9000000\n",
        CAPTURE_HEADER.join(",")
    );
    let batch = svc.system().import_captures(&csv).unwrap();
    svc.system().mine().unwrap();
    let tin = svc.system().issue_tin(&batch.stored[0].taxpayer_id).unwrap().tin;
    let _ = svc.login_taxpayer(tin.as_str(), "not the password");
    let pw = notes.last_for(&tin).unwrap().default_password;
    let tp = svc.login_taxpayer(tin.as_str(), &pw).unwrap().token;
    svc.change_password(&tp, &pw, "farm-2024", "farm-2024").unwrap();
    svc.request_reference_code(&tp).unwrap();

    let digest = pool.digest();
    let seq = pool.last_seq();
    drop(svc);
    pool.close().unwrap();
    drop(pool);
    let stats = sentinel.join();
    println!("sentinel saw {} events (last seq {}, gaps {}):", stats.events, stats.last_seq, stats.gaps);
    for (kind, n) in &stats.by_kind {
        println!("  {kind:?}: {n}");
    }

    print!("\nfirst log lines:\n");
    let log = std::fs::read_to_string(dir.join(LOG_FILE)).unwrap();
    for line in log.lines().take(3) {
        println!("  {line}");
    }

    let reopened = DataPool::open(&dir, PoolOptions::default()).unwrap();
    println!("\ndigest before close {digest}\ndigest on reopen    {}", reopened.digest());
    println!("seq {seq} -> {}", reopened.last_seq());
    drop(reopened);
    let replayed = replay_log_file(&dir.join(LOG_FILE)).unwrap();
    println!("log-only replay agrees: {}", replayed.digest() == digest);
    std::fs::remove_dir_all(&dir).unwrap();
}
