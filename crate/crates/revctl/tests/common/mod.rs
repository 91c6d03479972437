#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use serde_json::{json, Value};
use tempfile::TempDir;

use revctl::client::{ApiClient, HttpGateway, Reply};
use revctl::server::BackgroundServer;
use revenue_core::domain::{PasswordHasher, Tin};
use revenue_core::pool::DataPool;
use revenue_core::workflow::{RevenueService, SpoolNotifier};

pub const ADMIN: (&str, &str) = ("admin", "admin-pass");

/// A live API over an in-memory pool, with notifications spooled to a
/// temporary directory.
pub struct Fixture {
    pub dir: TempDir,
    pub svc: Arc<RevenueService>,
    pub server: BackgroundServer,
    pub client: ApiClient,
}

impl Fixture {
    pub fn new(seed: u64) -> Fixture {
        let dir = tempfile::tempdir().unwrap();
        let spool = SpoolNotifier::new(dir.path().join("spool")).unwrap();
        let svc = RevenueService::builder(Arc::new(DataPool::in_memory()), b"api fixture secret".to_vec())
            .notifier(Arc::new(spool))
            .hasher(PasswordHasher::with_iterations(16))
            .seed(seed)
            .build();
        svc.system().bootstrap_admin(ADMIN.0, ADMIN.1).unwrap();
        let svc = Arc::new(svc);
        let server = BackgroundServer::start(svc.clone()).unwrap();
        let client = ApiClient::new(&server.url()).unwrap();
        Fixture { dir, svc, server, client }
    }

    pub fn spool(&self) -> PathBuf {
        self.dir.path().join("spool")
    }

    pub fn gateway(&self) -> HttpGateway {
        HttpGateway::new(self.client.clone(), self.spool())
    }

    pub fn admin(&self) -> String {
        self.client.staff_login(ADMIN.0, ADMIN.1).unwrap()
    }

    /// Creates a staff account and returns a session token for it.
    pub fn staff(&self, username: &str, role: &str) -> String {
        let admin = self.admin();
        let r = self
            .client
            .post("/api/admin/staff", Some(&admin), &json!({ "username": username, "role": role, "password": "staff-pw" }))
            .unwrap();
        assert_eq!(r.status, 201, "{:?}", r.body);
        self.client.staff_login(username, "staff-pw").unwrap()
    }

    pub fn default_password(&self, tin: &str) -> String {
        let tin: Tin = tin.parse().unwrap();
        SpoolNotifier::read(&self.spool(), &tin).unwrap().default_password
    }

    /// Captures, mines and issues a TIN for one taxpayer; returns
    /// (TIN, active password, taxpayer token).
    pub fn active_taxpayer(&self, bir: &str, name: &str, revenue_kobo: i64, expenses_kobo: i64) -> (String, String, String) {
        let form = json!({
            "full_name": name,
            "email": format!("{}@example.ng", name.to_lowercase().replace(' ', ".")),
            "business_name": format!("{name} Ventures"),
            "location": "Benin City",
            "sector": "Retail",
            "period": "2024-02",
            "revenue_kobo": revenue_kobo.to_string(),
            "expenses_kobo": expenses_kobo.to_string(),
        });
        let captured = self.client.post("/api/bir/taxpayers", Some(bir), &form).unwrap();
        assert_eq!(captured.status, 201, "{:?}", captured.body);
        let mined = self.client.post("/api/bir/mine", Some(bir), &json!({})).unwrap();
        assert!(mined.is_success(), "{:?}", mined.body);
        let id = captured.str_field("taxpayer_id").unwrap().to_string();
        let grant = self.client.post(&format!("/api/admin/tin/{id}"), Some(&self.admin()), &json!({})).unwrap();
        let tin = grant.str_field("tin").unwrap().to_string();
        let default = self.default_password(&tin);
        let token = self.client.taxpayer_login(&tin, &default).unwrap();
        let password = format!("{}-pw", tin.to_lowercase());
        let changed = self
            .client
            .post("/api/taxpayer/password", Some(&token), &pw_change(&default, &password, &password))
            .unwrap();
        assert!(changed.is_success(), "{:?}", changed.body);
        (tin, password, token)
    }
}

pub fn pw_change(old: &str, new: &str, confirm: &str) -> Value {
    json!({ "old_password": old, "new_password": new, "confirm_password": confirm })
}

pub fn message(r: &Reply) -> &str {
    r.display_message().unwrap_or("")
}
