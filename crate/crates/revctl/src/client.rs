//! Blocking HTTP client for the API, and the simulator gateway built on it.

use std::path::PathBuf;
use std::time::Duration;

use reqwest::blocking::Client;
use reqwest::Method;
use serde::Serialize;
use serde_json::{json, Value};

use revenue_core::domain::{Money, Role, TaxpayerId, Tin};
use revenue_core::sim::{Gateway, GatewayError, PaymentReply};
use revenue_core::workflow::{AmountWrite, CaptureBatch, FinancialsForm, PaymentRequest, SpoolNotifier};

const TIMEOUT: Duration = Duration::from_secs(60);

/// A decoded response: status and JSON body (`Value::String` for non-JSON).
#[derive(Debug, Clone, PartialEq)]
pub struct Reply {
    pub status: u16,
    pub body: Value,
}

impl Reply {
    pub fn is_success(&self) -> bool {
        (200..300).contains(&self.status)
    }

    /// `display_message` of the body, if any.
    pub fn display_message(&self) -> Option<&str> {
        self.body.get("display_message").and_then(Value::as_str)
    }

    pub fn str_field(&self, key: &str) -> Option<&str> {
        self.body.get(key).and_then(Value::as_str)
    }

    fn into_error(self) -> GatewayError {
        let kind = self.str_field("error").unwrap_or("Http").to_string();
        let message = self
            .display_message()
            .or_else(|| self.str_field("message"))
            .map(str::to_string)
            .unwrap_or_else(|| self.body.to_string());
        GatewayError { status: self.status, kind, message }
    }

    fn ok(self) -> Result<Value, GatewayError> {
        if self.is_success() {
            Ok(self.body)
        } else {
            Err(self.into_error())
        }
    }
}

fn unreachable_error(e: reqwest::Error) -> GatewayError {
    GatewayError { status: 0, kind: "ServiceUnreachable".into(), message: e.to_string() }
}

fn decode_error(what: &str, e: impl std::fmt::Display) -> GatewayError {
    GatewayError { status: 0, kind: "BadResponse".into(), message: format!("{what}: {e}") }
}

#[derive(Debug, Clone)]
pub struct ApiClient {
    base: String,
    http: Client,
}

impl ApiClient {
    pub fn new(base_url: &str) -> Result<ApiClient, GatewayError> {
        let http = Client::builder().timeout(TIMEOUT).build().map_err(unreachable_error)?;
        Ok(ApiClient { base: base_url.trim_end_matches('/').to_string(), http })
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    fn send(
        &self,
        method: Method,
        path: &str,
        token: Option<&str>,
        build: impl FnOnce(reqwest::blocking::RequestBuilder) -> reqwest::blocking::RequestBuilder,
    ) -> Result<Reply, GatewayError> {
        let mut req = self.http.request(method, format!("{}{}", self.base, path));
        if let Some(t) = token {
            req = req.bearer_auth(t);
        }
        let resp = build(req).send().map_err(unreachable_error)?;
        let status = resp.status().as_u16();
        let text = resp.text().map_err(unreachable_error)?;
        let body = serde_json::from_str(&text).unwrap_or(Value::String(text));
        Ok(Reply { status, body })
    }

    pub fn get(&self, path: &str, token: Option<&str>) -> Result<Reply, GatewayError> {
        self.send(Method::GET, path, token, |r| r)
    }

    pub fn post<B: Serialize + ?Sized>(&self, path: &str, token: Option<&str>, body: &B) -> Result<Reply, GatewayError> {
        self.send(Method::POST, path, token, |r| r.json(body))
    }

    pub fn put<B: Serialize + ?Sized>(&self, path: &str, token: Option<&str>, body: &B) -> Result<Reply, GatewayError> {
        self.send(Method::PUT, path, token, |r| r.json(body))
    }

    pub fn post_csv(&self, path: &str, token: Option<&str>, csv: &str) -> Result<Reply, GatewayError> {
        let csv = csv.to_string();
        self.send(Method::POST, path, token, |r| r.header(reqwest::header::CONTENT_TYPE, "text/csv").body(csv))
    }

    pub fn staff_login(&self, username: &str, password: &str) -> Result<String, GatewayError> {
        let body = self.post("/api/auth/staff-login", None, &json!({ "username": username, "password": password }))?.ok()?;
        token_of(&body)
    }

    pub fn taxpayer_login(&self, tin: &str, password: &str) -> Result<String, GatewayError> {
        let body = self.post("/api/auth/taxpayer-login", None, &json!({ "tin": tin, "password": password }))?.ok()?;
        token_of(&body)
    }
}

fn token_of(body: &Value) -> Result<String, GatewayError> {
    body.get("token").and_then(Value::as_str).map(str::to_string).ok_or_else(|| decode_error("login", "no token"))
}

/// Drives a running service over HTTP. Default passwords are read from the
/// service's notification spool, which must be visible to this process.
pub struct HttpGateway {
    client: ApiClient,
    spool_dir: PathBuf,
}

impl HttpGateway {
    pub fn new(client: ApiClient, spool_dir: impl Into<PathBuf>) -> Self {
        HttpGateway { client, spool_dir: spool_dir.into() }
    }

    pub fn client(&self) -> &ApiClient {
        &self.client
    }
}

impl Gateway for HttpGateway {
    fn staff_login(&self, username: &str, password: &str) -> Result<String, GatewayError> {
        self.client.staff_login(username, password)
    }

    fn taxpayer_login(&self, tin: &str, password: &str) -> Result<String, GatewayError> {
        self.client.taxpayer_login(tin, password)
    }

    fn create_staff(&self, token: &str, username: &str, role: Role, password: &str) -> Result<(), GatewayError> {
        let body = json!({ "username": username, "role": role, "password": password });
        self.client.post("/api/admin/staff", Some(token), &body)?.ok().map(drop)
    }

    fn register_batch(&self, token: &str, csv: &str) -> Result<CaptureBatch, GatewayError> {
        let body = self.client.post_csv("/api/bir/taxpayers", Some(token), csv)?.ok()?;
        serde_json::from_value(body).map_err(|e| decode_error("capture batch", e))
    }

    fn capture_financials(&self, token: &str, form: &FinancialsForm) -> Result<(), GatewayError> {
        self.client.post("/api/bir/financials", Some(token), form)?.ok().map(drop)
    }

    fn issue_tin(&self, token: &str, taxpayer_id: &TaxpayerId) -> Result<Tin, GatewayError> {
        let body = self.client.post(&format!("/api/admin/tin/{taxpayer_id}"), Some(token), &json!({}))?.ok()?;
        let tin = body.get("tin").and_then(Value::as_str).ok_or_else(|| decode_error("tin grant", "no tin"))?;
        tin.parse().map_err(|e| decode_error("tin grant", e))
    }

    fn default_password(&self, tin: &Tin) -> Result<String, GatewayError> {
        SpoolNotifier::read(&self.spool_dir, tin).map(|n| n.default_password).map_err(|e| GatewayError {
            status: 404,
            kind: "NotFound".into(),
            message: format!("no spooled notification for {tin}: {e}"),
        })
    }

    fn change_password(&self, token: &str, old: &str, new: &str) -> Result<(), GatewayError> {
        let body = json!({ "old_password": old, "new_password": new, "confirm_password": new });
        self.client.post("/api/taxpayer/password", Some(token), &body)?.ok().map(drop)
    }

    fn mine(&self, token: &str) -> Result<(), GatewayError> {
        self.client.post("/api/bir/mine", Some(token), &json!({}))?.ok().map(drop)
    }

    fn request_code(&self, token: &str) -> Result<(String, Money), GatewayError> {
        let body = self.client.post("/api/taxpayer/reference-code", Some(token), &json!({}))?.ok()?;
        let code = body.get("reference_code").and_then(Value::as_str).ok_or_else(|| decode_error("slip", "no code"))?;
        let amount = body.get("tax_amount").and_then(Value::as_i64).ok_or_else(|| decode_error("slip", "no amount"))?;
        Ok((code.to_string(), Money::from_kobo(amount)))
    }

    fn bank_lookup(&self, token: &str, code: &str, presenter: Option<&str>) -> Result<(), GatewayError> {
        let path = format!("/api/bank/lookup/{code}");
        let reply = self.client.send(Method::GET, &path, Some(token), |r| match presenter {
            Some(p) => r.query(&[("presenter", p)]),
            None => r,
        })?;
        reply.ok().map(drop)
    }

    fn pay(&self, token: &str, req: &PaymentRequest) -> Result<PaymentReply, GatewayError> {
        let reply = self.client.post("/api/bank/payment", Some(token), req)?;
        let assessment = reply
            .body
            .get("assessment")
            .map(|a| serde_json::from_value(a.clone()))
            .transpose()
            .map_err(|e| decode_error("assessment", e))?;
        if reply.is_success() {
            let display_message = reply.display_message().unwrap_or_default().to_string();
            return Ok(PaymentReply { accepted: true, display_message, assessment });
        }
        match reply.str_field("error") {
            Some("FraudDetected" | "AlreadyRedeemed" | "CodeUnusable") => {
                let display_message = reply
                    .display_message()
                    .or_else(|| reply.str_field("message"))
                    .unwrap_or_default()
                    .to_string();
                Ok(PaymentReply { accepted: false, display_message, assessment })
            }
            _ => Err(reply.into_error()),
        }
    }

    fn write_amount(&self, token: &str, write: &AmountWrite) -> Result<(), GatewayError> {
        self.client.put("/api/taxpayer/assessment", Some(token), write)?.ok().map(drop)
    }
}
