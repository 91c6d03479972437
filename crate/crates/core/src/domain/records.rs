use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{CodeText, Money, PasswordDigest, Period, Tier, Tin};

macro_rules! opaque_id {
    ($(#[$meta:meta])* $name:ident, $prefix:literal, $width:literal) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(String);

        impl $name {
            pub const PREFIX: &'static str = $prefix;

            pub fn from_serial(n: u64) -> Self {
                $name(format!(concat!($prefix, "{:0", $width, "}"), n))
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl FromStr for $name {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                let s = s.trim();
                match s.strip_prefix($prefix) {
                    Some(rest) if !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()) => {
                        Ok($name(s.to_string()))
                    }
                    _ => Err(format!(concat!("not a ", stringify!($name), ": {:?}"), s)),
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }
    };
}

opaque_id!(TaxpayerId, "TP", 6);
opaque_id!(BusinessId, "BUS", 6);
opaque_id!(TxnId, "TXN", 8);
opaque_id!(ReceiptNo, "RCT", 8);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AccountStatus {
    Provisional,
    Active,
}

/// A captured taxpayer. The TIN and credentials exist only after issuance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaxpayerRecord {
    pub taxpayer_id: TaxpayerId,
    pub tin: Option<Tin>,
    pub full_name: String,
    pub email: String,
    pub phone: String,
    pub password_hash: Option<PasswordDigest>,
    pub must_change_password: bool,
    pub status: AccountStatus,
    pub captured_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonthlyFinancials {
    pub period: Period,
    pub revenue: Money,
    pub expenses: Money,
    pub captured_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum AssessmentSource {
    Mining { run_id: String },
    Review { reviewer: String },
}

/// The tier and tax currently assessed on a business.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assessment {
    pub period: Period,
    pub net_profit: Money,
    pub tier: Tier,
    pub tax: Money,
    pub source: AssessmentSource,
    pub assessed_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BusinessRecord {
    pub business_id: BusinessId,
    pub owner: TaxpayerId,
    pub business_name: String,
    pub location: String,
    pub sector: String,
    /// Sorted by period, at most one entry per period.
    pub financials: Vec<MonthlyFinancials>,
    pub assessment: Option<Assessment>,
}

impl BusinessRecord {
    pub fn tier(&self) -> Option<Tier> {
        self.assessment.as_ref().map(|a| a.tier)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TxnOutcome {
    Success,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransactionRecord {
    pub txn_id: TxnId,
    pub code: CodeText,
    pub payer: Tin,
    pub amount_paid: Money,
    pub teller: String,
    pub at: DateTime<Utc>,
    pub outcome: TxnOutcome,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Receipt {
    pub receipt_no: ReceiptNo,
    pub business_name: String,
    pub taxpayer_name: String,
    pub amount_paid: Money,
    pub date: DateTime<Utc>,
    pub reference_code: CodeText,
    pub tin: Tin,
    pub txn_id: TxnId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Role {
    Admin,
    BirStaff,
    BankStaff,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Admin => "Admin",
            Role::BirStaff => "BirStaff",
            Role::BankStaff => "BankStaff",
        }
    }
}

impl FromStr for Role {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "Admin" => Ok(Role::Admin),
            "BirStaff" => Ok(Role::BirStaff),
            "BankStaff" => Ok(Role::BankStaff),
            other => Err(format!("unknown role {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserAccount {
    pub username: String,
    pub password_hash: PasswordDigest,
    pub role: Role,
}

/// Who is acting in a session: a staff role or a taxpayer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SessionRole {
    Admin,
    BirStaff,
    BankStaff,
    Taxpayer,
}

impl SessionRole {
    pub const ALL: [SessionRole; 4] = [SessionRole::Admin, SessionRole::BirStaff, SessionRole::BankStaff, SessionRole::Taxpayer];

    pub fn as_str(self) -> &'static str {
        match self {
            SessionRole::Admin => "Admin",
            SessionRole::BirStaff => "BirStaff",
            SessionRole::BankStaff => "BankStaff",
            SessionRole::Taxpayer => "Taxpayer",
        }
    }
}

impl From<Role> for SessionRole {
    fn from(r: Role) -> Self {
        match r {
            Role::Admin => SessionRole::Admin,
            Role::BirStaff => SessionRole::BirStaff,
            Role::BankStaff => SessionRole::BankStaff,
        }
    }
}
