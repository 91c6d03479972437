//! Shared vocabulary: identities, money, tiers, codes, transactions and receipts.

mod code;
mod fraud;
mod messages;
mod money;
mod password;
mod period;
mod records;
mod tier;
mod tin;

pub use code::{CodeStatus, CodeText, IllegalTransition, MalformedCode, ReferenceCode, CODE_LEN};
pub use fraud::{LookupOutcome, RuleHit, Verdict};
pub use messages::ScreenMessage;
pub use money::{Money, KOBO_PER_NAIRA};
pub use password::{hash_password, verify_password, PasswordDigest, PasswordError, PasswordHasher, DEFAULT_ITERATIONS};
pub use period::{Period, PeriodError};
pub use records::{
    AccountStatus, Assessment, AssessmentSource, BusinessId, BusinessRecord, MonthlyFinancials, Receipt, ReceiptNo,
    Role, SessionRole, TaxpayerId, TaxpayerRecord, TransactionRecord, TxnId, TxnOutcome, UserAccount,
};
pub use tier::Tier;
pub use tin::{mint_tin, validate_tin, Tin, TinError, TIN_CAPACITY};
