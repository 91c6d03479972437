use serde::{Deserialize, Serialize};

use crate::domain::{Money, Period, TaxpayerId};

/// Column order of a capture CSV batch.
pub const CAPTURE_HEADER: [&str; 9] = [
    "full_name",
    "email",
    "phone",
    "business_name",
    "location",
    "sector",
    "period",
    "revenue_kobo",
    "expenses_kobo",
];

/// One taxpayer-and-business capture, as typed into the BIR form. With
/// `taxpayer_id` set the business is added to an existing taxpayer and the
/// personal fields are ignored.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CaptureForm {
    pub taxpayer_id: Option<TaxpayerId>,
    pub full_name: String,
    pub email: String,
    pub phone: String,
    pub business_name: String,
    pub location: String,
    pub sector: String,
    pub period: Option<String>,
    pub revenue_kobo: Option<String>,
    pub expenses_kobo: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowFailure {
    /// 1-based data row; the header is not counted.
    pub row: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct ValidCapture {
    pub taxpayer_id: Option<TaxpayerId>,
    pub full_name: String,
    pub email: String,
    pub phone: String,
    pub business_name: String,
    pub location: String,
    pub sector: String,
    pub financials: Option<(Period, Money, Money)>,
}

fn blank(s: &Option<String>) -> bool {
    s.as_deref().is_none_or(|v| v.trim().is_empty())
}

fn amount(field: &str, raw: &str) -> Result<Money, String> {
    let kobo: i64 = raw.trim().parse().map_err(|_| format!("{field} is not a whole number of kobo: {raw:?}"))?;
    if kobo < 0 {
        return Err(format!("{field} must not be negative"));
    }
    Ok(Money::from_kobo(kobo))
}

fn plausible_email(s: &str) -> bool {
    match s.split_once('@') {
        Some((user, host)) => !user.is_empty() && host.contains('.') && !host.starts_with('.') && !host.ends_with('.'),
        None => false,
    }
}

fn plausible_phone(s: &str) -> bool {
    let digits = s.bytes().filter(u8::is_ascii_digit).count();
    digits >= 7 && s.bytes().all(|b| b.is_ascii_digit() || b"+- ()".contains(&b))
}

impl CaptureForm {
    pub(crate) fn validate(&self) -> Result<ValidCapture, String> {
        let full_name = self.full_name.trim().to_string();
        let email = self.email.trim().to_string();
        let phone = self.phone.trim().to_string();
        if self.taxpayer_id.is_none() {
            if full_name.is_empty() {
                return Err("full_name is required".into());
            }
            if email.is_empty() && phone.is_empty() {
                return Err("an email address or phone number is required".into());
            }
            if !email.is_empty() && !plausible_email(&email) {
                return Err(format!("malformed email {email:?}"));
            }
            if !phone.is_empty() && !plausible_phone(&phone) {
                return Err(format!("malformed phone number {phone:?}"));
            }
        }
        let business_name = self.business_name.trim().to_string();
        if business_name.is_empty() {
            return Err("business_name is required".into());
        }

        let financials = match (blank(&self.revenue_kobo), blank(&self.expenses_kobo)) {
            (true, true) => None,
            (false, false) => {
                let period = self
                    .period
                    .as_deref()
                    .filter(|p| !p.trim().is_empty())
                    .ok_or("period is required with revenue and expenses")?
                    .parse::<Period>()
                    .map_err(|e| e.to_string())?;
                let revenue = amount("revenue_kobo", self.revenue_kobo.as_deref().unwrap_or_default())?;
                let expenses = amount("expenses_kobo", self.expenses_kobo.as_deref().unwrap_or_default())?;
                Some((period, revenue, expenses))
            }
            _ => return Err("revenue_kobo and expenses_kobo must be given together".into()),
        };
        Ok(ValidCapture {
            taxpayer_id: self.taxpayer_id.clone(),
            full_name,
            email,
            phone,
            business_name,
            location: self.location.trim().to_string(),
            sector: self.sector.trim().to_string(),
            financials,
        })
    }
}

/// Splits a capture CSV into forms. Rows that cannot even be read become
/// failures; the header must match [`CAPTURE_HEADER`].
pub fn parse_capture_csv(text: &str) -> Result<Vec<(usize, Result<CaptureForm, String>)>, String> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| e.to_string())?;
    if header.iter().ne(CAPTURE_HEADER) {
        return Err(format!("expected header {}", CAPTURE_HEADER.join(",")));
    }
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let row = i + 1;
        let form = match rec {
            Err(e) => Err(e.to_string()),
            Ok(r) if r.len() != CAPTURE_HEADER.len() => {
                Err(format!("expected {} fields, found {}", CAPTURE_HEADER.len(), r.len()))
            }
            Ok(r) => {
                let opt = |s: &str| (!s.is_empty()).then(|| s.to_string());
                Ok(CaptureForm {
                    taxpayer_id: None,
                    full_name: r[0].to_string(),
                    email: r[1].to_string(),
                    phone: r[2].to_string(),
                    business_name: r[3].to_string(),
                    location: r[4].to_string(),
                    sector: r[5].to_string(),
                    period: opt(&r[6]),
                    revenue_kobo: opt(&r[7]),
                    expenses_kobo: opt(&r[8]),
                })
            }
        };
        rows.push((row, form));
    }
    Ok(rows)
}
