//! Serve the HTTP API on a loopback port and talk to it with the bundled
//! client: staff login, a CSV capture, mining and the JSON report.
//!
//! ```bash
//! cargo run -p revctl --example http_api
//! ```

use std::sync::Arc;

use revctl::client::ApiClient;
use revctl::server::BackgroundServer;
use revenue_core::domain::PasswordHasher;
use revenue_core::pool::DataPool;
use revenue_core::workflow::{RevenueService, CAPTURE_HEADER};
use serde_json::json;

fn main() {
    let svc = RevenueService::builder(Arc::new(DataPool::in_memory()), b"http example".to_vec())
        .hasher(PasswordHasher::with_iterations(1_000))
        .build();
    svc.system().bootstrap_admin("admin", "admin-pass").unwrap();
    let server = BackgroundServer::start(Arc::new(svc)).unwrap();
    println!("serving on {}", server.url());

    let client = ApiClient::new(&server.url()).unwrap();
    println!("GET /api/health -> {}", client.get("/api/health", None).unwrap().body);

    let bad = client.post("/api/auth/staff-login", None, &json!({ "username": "admin", "password": "nope" })).unwrap();
    println!("bad login -> {} {:?}", bad.status, bad.display_message());

    let admin = client.staff_login("admin", "admin-pass").unwrap();
    client.post("/api/admin/staff", Some(&admin), &json!({ "username": "bir_ada", "role": "BirStaff", "password": "bir-pass" })).unwrap();
    let bir = client.staff_login("bir_ada", "bir-pass").unwrap();

    let csv = format!(
        "{}\nOsas Aigbe,osas@example.ng,,Aigbe Stores,Benin City,Retail,2024-02,40000000,12000000\n\
         Efe Omo,efe@example.ng,,Omo Foods,Warri,Food,2024-02,8000000,3000000\n",
        CAPTURE_HEADER.join(",")
    );
    let batch = client.post_csv("/api/bir/taxpayers", Some(&bir), &csv).unwrap();
    println!("POST /api/bir/taxpayers (text/csv) -> {} {}", batch.status, batch.body["stored"].as_array().map_or(0, Vec::len));

    let mined = client.post("/api/bir/mine", Some(&bir), &json!({})).unwrap();
    println!("POST /api/bir/mine -> {} {:?}", mined.status, mined.display_message());
    let report = client.get("/api/bir/report?format=csv", Some(&bir)).unwrap();
    println!("GET /api/bir/report?format=csv ->\n{}", report.body.as_str().unwrap_or_default());

    server.stop().unwrap();
}
