//! JSON over HTTP for every workflow operation. Handlers only translate:
//! the service owns authorization, validation and the display messages.

use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::header::{AUTHORIZATION, CONTENT_TYPE};
use axum::http::{HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::services::ServeDir;

use revenue_core::agent::AnnModel;
use revenue_core::domain::{BusinessId, Role, TaxpayerId};
use revenue_core::workflow::{
    AmountWrite, CaptureForm, FinancialsForm, PaymentRequest, RevenueService, WorkflowError,
};

pub type Shared = Arc<RevenueService>;

/// Everything that can go wrong in a handler.
#[derive(Debug)]
pub enum ApiError {
    Workflow(WorkflowError),
    BadRequest(String),
    Internal(String),
}

impl From<WorkflowError> for ApiError {
    fn from(e: WorkflowError) -> Self {
        ApiError::Workflow(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, body) = match self {
            ApiError::Workflow(e) => {
                let status = StatusCode::from_u16(e.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
                let mut body = json!({
                    "error": e.kind(),
                    "message": e.to_string(),
                    "display_message": e.display_message().map(|m| m.text()),
                });
                if let Some(a) = e.assessment() {
                    body["assessment"] = serde_json::to_value(a).unwrap_or_default();
                }
                if !e.row_failures().is_empty() {
                    body["failures"] = serde_json::to_value(e.row_failures()).unwrap_or_default();
                }
                (status, body)
            }
            ApiError::BadRequest(message) => (
                StatusCode::BAD_REQUEST,
                json!({ "error": "BadRequest", "message": message, "display_message": null }),
            ),
            ApiError::Internal(message) => (
                StatusCode::INTERNAL_SERVER_ERROR,
                json!({ "error": "Internal", "message": message, "display_message": null }),
            ),
        };
        (status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

fn bearer(headers: &HeaderMap) -> String {
    headers
        .get(AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "))
        .map(|t| t.trim().to_string())
        .unwrap_or_default()
}

fn body<T: DeserializeOwned>(bytes: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(bytes).map_err(|e| ApiError::BadRequest(format!("malformed JSON body: {e}")))
}

/// Runs a service call off the async workers; password hashing is slow on
/// purpose.
async fn call<T, F>(svc: &Shared, f: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce(&RevenueService) -> Result<T, WorkflowError> + Send + 'static,
{
    let svc = Arc::clone(svc);
    tokio::task::spawn_blocking(move || f(&svc))
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))?
        .map_err(ApiError::from)
}

#[derive(Deserialize)]
struct StaffLogin {
    username: String,
    password: String,
}

#[derive(Deserialize)]
struct TaxpayerLogin {
    tin: String,
    password: String,
}

#[derive(Deserialize)]
struct NewStaff {
    username: String,
    role: Role,
    password: String,
}

#[derive(Deserialize)]
struct PasswordChange {
    old_password: String,
    new_password: String,
    confirm_password: String,
}

#[derive(Deserialize)]
struct AmountOnly {
    amount_kobo: i64,
}

#[derive(Deserialize)]
struct LookupQuery {
    presenter: Option<String>,
}

#[derive(Deserialize)]
struct ReportQuery {
    format: Option<String>,
}

#[derive(Serialize)]
struct Health {
    status: &'static str,
    last_seq: u64,
}

async fn health(State(svc): State<Shared>) -> Json<Health> {
    Json(Health { status: "ok", last_seq: svc.pool().last_seq() })
}

async fn staff_login(State(svc): State<Shared>, raw: Bytes) -> Result<Response, ApiError> {
    let req: StaffLogin = body(&raw)?;
    Ok(Json(call(&svc, move |s| s.login_staff(&req.username, &req.password)).await?).into_response())
}

async fn taxpayer_login(State(svc): State<Shared>, raw: Bytes) -> Result<Response, ApiError> {
    let req: TaxpayerLogin = body(&raw)?;
    Ok(Json(call(&svc, move |s| s.login_taxpayer(&req.tin, &req.password)).await?).into_response())
}

async fn logout(State(svc): State<Shared>, headers: HeaderMap) -> Result<Response, ApiError> {
    let token = bearer(&headers);
    Ok(Json(call(&svc, move |s| Ok(s.logout(&token))).await?).into_response())
}

async fn create_staff(State(svc): State<Shared>, headers: HeaderMap, raw: Bytes) -> Result<Response, ApiError> {
    let req: NewStaff = body(&raw)?;
    let token = bearer(&headers);
    let view = call(&svc, move |s| s.create_staff(&token, &req.username, req.role, &req.password)).await?;
    Ok((StatusCode::CREATED, Json(view)).into_response())
}

/// One capture form as JSON, or a CSV batch when sent as `text/csv`.
async fn register(State(svc): State<Shared>, headers: HeaderMap, raw: Bytes) -> Result<Response, ApiError> {
    let token = bearer(&headers);
    let is_csv = headers
        .get(CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.starts_with("text/csv"));
    if is_csv {
        let text = String::from_utf8(raw.to_vec()).map_err(|_| ApiError::BadRequest("CSV body is not UTF-8".into()))?;
        let batch = call(&svc, move |s| s.register_batch(&token, &text)).await?;
        Ok(Json(batch).into_response())
    } else {
        let form: CaptureForm = body(&raw)?;
        let captured = call(&svc, move |s| s.register_taxpayer(&token, &form)).await?;
        Ok((StatusCode::CREATED, Json(captured)).into_response())
    }
}

async fn capture_financials(State(svc): State<Shared>, headers: HeaderMap, raw: Bytes) -> Result<Response, ApiError> {
    let form: FinancialsForm = body(&raw)?;
    let token = bearer(&headers);
    Ok(Json(call(&svc, move |s| s.capture_financials(&token, &form)).await?).into_response())
}

async fn issue_tin(State(svc): State<Shared>, headers: HeaderMap, Path(id): Path<String>) -> Result<Response, ApiError> {
    let id: TaxpayerId = id.parse().map_err(ApiError::BadRequest)?;
    let token = bearer(&headers);
    let grant = call(&svc, move |s| s.issue_tin(&token, &id)).await?;
    Ok((StatusCode::CREATED, Json(grant)).into_response())
}

async fn change_password(State(svc): State<Shared>, headers: HeaderMap, raw: Bytes) -> Result<Response, ApiError> {
    let req: PasswordChange = body(&raw)?;
    let token = bearer(&headers);
    let ack =
        call(&svc, move |s| s.change_password(&token, &req.old_password, &req.new_password, &req.confirm_password))
            .await?;
    Ok(Json(ack).into_response())
}

async fn view_assessment(State(svc): State<Shared>, headers: HeaderMap) -> Result<Response, ApiError> {
    let token = bearer(&headers);
    Ok(Json(call(&svc, move |s| s.view_assessment(&token)).await?).into_response())
}

async fn taxpayer_amount(State(svc): State<Shared>, headers: HeaderMap, raw: Bytes) -> Result<Response, ApiError> {
    let write: AmountWrite = body(&raw)?;
    let token = bearer(&headers);
    Ok(Json(call(&svc, move |s| s.write_assessment_amount(&token, &write)).await?).into_response())
}

async fn review_amount(
    State(svc): State<Shared>,
    headers: HeaderMap,
    Path(id): Path<String>,
    raw: Bytes,
) -> Result<Response, ApiError> {
    let id: BusinessId = id.parse().map_err(ApiError::BadRequest)?;
    let req: AmountOnly = body(&raw)?;
    let token = bearer(&headers);
    let write = AmountWrite { business_id: Some(id), amount_kobo: req.amount_kobo };
    Ok(Json(call(&svc, move |s| s.write_assessment_amount(&token, &write)).await?).into_response())
}

async fn reference_code(State(svc): State<Shared>, headers: HeaderMap) -> Result<Response, ApiError> {
    let token = bearer(&headers);
    let slip = call(&svc, move |s| s.request_reference_code(&token)).await?;
    let status = if slip.reissued { StatusCode::OK } else { StatusCode::CREATED };
    Ok((status, Json(slip)).into_response())
}

async fn bank_lookup(
    State(svc): State<Shared>,
    headers: HeaderMap,
    Path(code): Path<String>,
    Query(q): Query<LookupQuery>,
) -> Result<Response, ApiError> {
    let token = bearer(&headers);
    let view = call(&svc, move |s| s.bank_lookup(&token, &code, q.presenter.as_deref())).await?;
    Ok(Json(view).into_response())
}

async fn payment(State(svc): State<Shared>, headers: HeaderMap, raw: Bytes) -> Result<Response, ApiError> {
    let req: PaymentRequest = body(&raw)?;
    let token = bearer(&headers);
    Ok(Json(call(&svc, move |s| s.record_payment(&token, &req)).await?).into_response())
}

async fn receipt(State(svc): State<Shared>, headers: HeaderMap, Path(code): Path<String>) -> Result<Response, ApiError> {
    let token = bearer(&headers);
    Ok(Json(call(&svc, move |s| s.reprint_receipt(&token, &code)).await?).into_response())
}

async fn mine(State(svc): State<Shared>, headers: HeaderMap) -> Result<Response, ApiError> {
    let token = bearer(&headers);
    Ok(Json(call(&svc, move |s| s.mine(&token)).await?).into_response())
}

async fn report(State(svc): State<Shared>, headers: HeaderMap, Query(q): Query<ReportQuery>) -> Result<Response, ApiError> {
    let token = bearer(&headers);
    let report = call(&svc, move |s| s.mining_report(&token)).await?;
    match q.format.as_deref() {
        Some("csv") => Ok(([(CONTENT_TYPE, HeaderValue::from_static("text/csv"))], report.to_csv()).into_response()),
        None | Some("json") => Ok(Json(report).into_response()),
        Some(other) => Err(ApiError::BadRequest(format!("unknown report format {other:?}"))),
    }
}

async fn state_hash(State(svc): State<Shared>, headers: HeaderMap) -> ApiResult<serde_json::Value> {
    let token = bearer(&headers);
    let (digest, last_seq) = call(&svc, move |s| Ok((s.state_digest(&token)?, s.pool().last_seq()))).await?;
    Ok(Json(json!({ "digest": digest, "last_seq": last_seq })))
}

async fn install_model(State(svc): State<Shared>, headers: HeaderMap, raw: Bytes) -> Result<Response, ApiError> {
    let model: AnnModel = body(&raw)?;
    let token = bearer(&headers);
    Ok(Json(call(&svc, move |s| s.install_model(&token, model)).await?).into_response())
}

async fn not_found() -> ApiError {
    ApiError::Workflow(WorkflowError::NotFound("no such endpoint".into()))
}

/// All routes. With `static_dir`, unmatched non-API paths serve files from it.
pub fn router(svc: Shared, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/health", get(health))
        .route("/api/admin/staff", post(create_staff))
        .route("/api/admin/tin/{taxpayer_id}", post(issue_tin))
        .route("/api/admin/state-hash", get(state_hash))
        .route("/api/admin/model", post(install_model))
        .route("/api/auth/staff-login", post(staff_login))
        .route("/api/auth/taxpayer-login", post(taxpayer_login))
        .route("/api/auth/logout", post(logout))
        .route("/api/bir/taxpayers", post(register))
        .route("/api/bir/financials", post(capture_financials))
        .route("/api/bir/assessment/{business_id}", put(review_amount))
        .route("/api/bir/mine", post(mine))
        .route("/api/bir/report", get(report))
        .route("/api/taxpayer/password", post(change_password))
        .route("/api/taxpayer/assessment", get(view_assessment).put(taxpayer_amount))
        .route("/api/taxpayer/reference-code", post(reference_code))
        .route("/api/taxpayer/receipt/{code}", get(receipt))
        .route("/api/bank/lookup/{code}", get(bank_lookup))
        .route("/api/bank/payment", post(payment))
        .route("/api/{*rest}", axum::routing::any(not_found))
        .with_state(svc);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.fallback(not_found),
    }
}
