use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::FraudAssessment;
use crate::domain::{Money, Role, TaxpayerId, Tin};
use crate::workflow::{
    AmountWrite, CaptureBatch, FinancialsForm, MemoryNotifier, PaymentRequest, RevenueService, WorkflowError,
};

/// A failed call, reduced to what travels over HTTP.
#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[error("{kind} ({status}): {message}")]
pub struct GatewayError {
    pub status: u16,
    pub kind: String,
    pub message: String,
}

impl From<WorkflowError> for GatewayError {
    fn from(e: WorkflowError) -> Self {
        GatewayError {
            status: e.status(),
            kind: e.kind().to_string(),
            message: e.display_message().map(|m| m.text().to_string()).unwrap_or_else(|| e.to_string()),
        }
    }
}

/// How a payment attempt ended. Refusals that carry the agent's assessment
/// are replies, not errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaymentReply {
    pub accepted: bool,
    pub display_message: String,
    pub assessment: Option<FraudAssessment>,
}

/// The subset of the workflow the simulator drives.
pub trait Gateway: Sync {
    fn staff_login(&self, username: &str, password: &str) -> Result<String, GatewayError>;
    fn taxpayer_login(&self, tin: &str, password: &str) -> Result<String, GatewayError>;
    fn create_staff(&self, token: &str, username: &str, role: Role, password: &str) -> Result<(), GatewayError>;
    fn register_batch(&self, token: &str, csv: &str) -> Result<CaptureBatch, GatewayError>;
    fn capture_financials(&self, token: &str, form: &FinancialsForm) -> Result<(), GatewayError>;
    fn issue_tin(&self, token: &str, taxpayer_id: &TaxpayerId) -> Result<Tin, GatewayError>;
    /// The default password delivered with a freshly issued TIN.
    fn default_password(&self, tin: &Tin) -> Result<String, GatewayError>;
    fn change_password(&self, token: &str, old: &str, new: &str) -> Result<(), GatewayError>;
    fn mine(&self, token: &str) -> Result<(), GatewayError>;
    /// Returns the compact code and the amount on the slip.
    fn request_code(&self, token: &str) -> Result<(String, Money), GatewayError>;
    fn bank_lookup(&self, token: &str, code: &str, presenter: Option<&str>) -> Result<(), GatewayError>;
    fn pay(&self, token: &str, req: &PaymentRequest) -> Result<PaymentReply, GatewayError>;
    fn write_amount(&self, token: &str, write: &AmountWrite) -> Result<(), GatewayError>;
}

/// Calls a [`RevenueService`] directly.
pub struct InProcessGateway<'a> {
    svc: &'a RevenueService,
    notes: &'a MemoryNotifier,
}

impl<'a> InProcessGateway<'a> {
    /// `notes` must be the notifier the service was built with.
    pub fn new(svc: &'a RevenueService, notes: &'a MemoryNotifier) -> Self {
        InProcessGateway { svc, notes }
    }
}

impl Gateway for InProcessGateway<'_> {
    fn staff_login(&self, username: &str, password: &str) -> Result<String, GatewayError> {
        Ok(self.svc.login_staff(username, password)?.token)
    }

    fn taxpayer_login(&self, tin: &str, password: &str) -> Result<String, GatewayError> {
        Ok(self.svc.login_taxpayer(tin, password)?.token)
    }

    fn create_staff(&self, token: &str, username: &str, role: Role, password: &str) -> Result<(), GatewayError> {
        self.svc.create_staff(token, username, role, password)?;
        Ok(())
    }

    fn register_batch(&self, token: &str, csv: &str) -> Result<CaptureBatch, GatewayError> {
        Ok(self.svc.register_batch(token, csv)?)
    }

    fn capture_financials(&self, token: &str, form: &FinancialsForm) -> Result<(), GatewayError> {
        self.svc.capture_financials(token, form)?;
        Ok(())
    }

    fn issue_tin(&self, token: &str, taxpayer_id: &TaxpayerId) -> Result<Tin, GatewayError> {
        Ok(self.svc.issue_tin(token, taxpayer_id)?.tin)
    }

    fn default_password(&self, tin: &Tin) -> Result<String, GatewayError> {
        self.notes.last_for(tin).map(|n| n.default_password).ok_or_else(|| GatewayError {
            status: 404,
            kind: "NotFound".into(),
            message: format!("no notification for {tin}"),
        })
    }

    fn change_password(&self, token: &str, old: &str, new: &str) -> Result<(), GatewayError> {
        self.svc.change_password(token, old, new, new)?;
        Ok(())
    }

    fn mine(&self, token: &str) -> Result<(), GatewayError> {
        self.svc.mine(token)?;
        Ok(())
    }

    fn request_code(&self, token: &str) -> Result<(String, Money), GatewayError> {
        let slip = self.svc.request_reference_code(token)?;
        Ok((slip.reference_code.to_string(), slip.tax_amount))
    }

    fn bank_lookup(&self, token: &str, code: &str, presenter: Option<&str>) -> Result<(), GatewayError> {
        self.svc.bank_lookup(token, code, presenter)?;
        Ok(())
    }

    fn pay(&self, token: &str, req: &PaymentRequest) -> Result<PaymentReply, GatewayError> {
        match self.svc.record_payment(token, req) {
            Ok(out) => Ok(PaymentReply {
                accepted: true,
                display_message: out.display_message.text().to_string(),
                assessment: Some(out.assessment),
            }),
            Err(e @ (WorkflowError::FraudDetected(_) | WorkflowError::AlreadyRedeemed(_) | WorkflowError::CodeUnusable)) => {
                Ok(PaymentReply {
                    accepted: false,
                    display_message: e.display_message().map(|m| m.text().to_string()).unwrap_or_else(|| e.to_string()),
                    assessment: e.assessment().cloned(),
                })
            }
            Err(e) => Err(e.into()),
        }
    }

    fn write_amount(&self, token: &str, write: &AmountWrite) -> Result<(), GatewayError> {
        self.svc.write_assessment_amount(token, write)?;
        Ok(())
    }
}
