use std::fmt;

use serde::{Serialize, Serializer};

/// Every string the system ever shows a user. The texts are fixed and
/// compared byte-for-byte by the conformance tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScreenMessage {
    Welcome,
    InvalidTaxpayerLogin,
    InvalidStaffLogin,
    AmountLocked,
    ExtractionSuccessful,
    NoEarningsRecords,
    PasswordChanged,
    TransactionSuccessful,
    FraudAlert,
}

impl ScreenMessage {
    pub const ALL: [ScreenMessage; 9] = [
        ScreenMessage::Welcome,
        ScreenMessage::InvalidTaxpayerLogin,
        ScreenMessage::InvalidStaffLogin,
        ScreenMessage::AmountLocked,
        ScreenMessage::ExtractionSuccessful,
        ScreenMessage::NoEarningsRecords,
        ScreenMessage::PasswordChanged,
        ScreenMessage::TransactionSuccessful,
        ScreenMessage::FraudAlert,
    ];

    pub const fn text(self) -> &'static str {
        match self {
            ScreenMessage::Welcome => "Welcome!",
            ScreenMessage::InvalidTaxpayerLogin => "Invalid TIN or password...try again",
            ScreenMessage::InvalidStaffLogin => "Invalid username or password...try again",
            ScreenMessage::AmountLocked => "Amount cannot be altered by taxpayers.",
            ScreenMessage::ExtractionSuccessful => "Extraction successful!",
            ScreenMessage::NoEarningsRecords => {
                "Tax payers cannot be clustered into tiers..No records found on earnings or profit margin"
            }
            ScreenMessage::PasswordChanged => "Password change successful!",
            ScreenMessage::TransactionSuccessful => "Transaction ... successful!",
            ScreenMessage::FraudAlert => "Fraud Attempt Alert!!!",
        }
    }

    pub fn from_text(text: &str) -> Option<ScreenMessage> {
        Self::ALL.into_iter().find(|m| m.text() == text)
    }
}

impl fmt::Display for ScreenMessage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.text())
    }
}

impl Serialize for ScreenMessage {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.text())
    }
}

impl<'de> serde::Deserialize<'de> for ScreenMessage {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        ScreenMessage::from_text(&s).ok_or_else(|| serde::de::Error::custom(format!("not a screen message: {s:?}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn texts_are_distinct_and_round_trip() {
        for m in ScreenMessage::ALL {
            assert_eq!(ScreenMessage::from_text(m.text()), Some(m));
            let json = serde_json::to_string(&m).unwrap();
            assert_eq!(serde_json::from_str::<ScreenMessage>(&json).unwrap(), m);
        }
    }

    #[test]
    fn exact_bytes() {
        assert_eq!(ScreenMessage::FraudAlert.text(), "Fraud Attempt Alert!!!");
        assert_eq!(ScreenMessage::TransactionSuccessful.text(), "Transaction ... successful!");
        assert_eq!(
            ScreenMessage::NoEarningsRecords.text(),
            "Tax payers cannot be clustered into tiers..No records found on earnings or profit margin"
        );
    }
}
