use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Money, TaxpayerId, Tin};

pub const CODE_LEN: usize = 16;
const CROCKFORD: &[u8; 32] = b"0123456789ABCDEFGHJKMNPQRSTVWXYZ";

/// A 16-character Crockford base32 payment reference, stored compact and
/// rendered `XXXX-XXXX-XXXX-XXXX`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct CodeText(String);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("not a reference code: {0:?}")]
pub struct MalformedCode(pub String);

impl CodeText {
    /// Accepts what a teller types: any case, optional hyphens/spaces, and
    /// the Crockford aliases `I`/`L` → `1`, `O` → `0`.
    pub fn parse_lenient(input: &str) -> Result<Self, MalformedCode> {
        let mut out = String::with_capacity(CODE_LEN);
        for ch in input.chars() {
            let c = match ch.to_ascii_uppercase() {
                '-' | ' ' => continue,
                'I' | 'L' => '1',
                'O' => '0',
                c => c,
            };
            if !c.is_ascii() || !CROCKFORD.contains(&(c as u8)) {
                return Err(MalformedCode(input.to_string()));
            }
            out.push(c);
        }
        if out.len() != CODE_LEN {
            return Err(MalformedCode(input.to_string()));
        }
        Ok(CodeText(out))
    }

    pub fn from_bytes(bytes: &[u8; 10]) -> Self {
        let encoded = base32::encode(base32::Alphabet::Crockford, bytes);
        debug_assert_eq!(encoded.len(), CODE_LEN);
        CodeText(encoded)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn display(&self) -> String {
        let s = &self.0;
        format!("{}-{}-{}-{}", &s[0..4], &s[4..8], &s[8..12], &s[12..16])
    }
}

impl FromStr for CodeText {
    type Err = MalformedCode;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CodeText::parse_lenient(s)
    }
}

impl TryFrom<String> for CodeText {
    type Error = MalformedCode;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        CodeText::parse_lenient(&value)
    }
}

impl From<CodeText> for String {
    fn from(c: CodeText) -> String {
        c.0
    }
}

impl fmt::Display for CodeText {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.display())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CodeStatus {
    Issued,
    Redeemed,
    Expired,
    Voided,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("reference code cannot move from {from:?} to {to:?}")]
pub struct IllegalTransition {
    pub from: CodeStatus,
    pub to: CodeStatus,
}

impl CodeStatus {
    pub fn is_terminal(self) -> bool {
        self != CodeStatus::Issued
    }

    /// The only legal moves are `Issued → {Redeemed, Expired, Voided}`.
    pub fn transition(self, to: CodeStatus) -> Result<CodeStatus, IllegalTransition> {
        match (self, to) {
            (CodeStatus::Issued, CodeStatus::Redeemed | CodeStatus::Expired | CodeStatus::Voided) => Ok(to),
            (from, to) => Err(IllegalTransition { from, to }),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CodeStatus::Issued => "Issued",
            CodeStatus::Redeemed => "Redeemed",
            CodeStatus::Expired => "Expired",
            CodeStatus::Voided => "Voided",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferenceCode {
    pub code: CodeText,
    pub owner: Tin,
    pub taxpayer_id: TaxpayerId,
    pub assessed_amount: Money,
    pub issued_at: DateTime<Utc>,
    pub expires_at: DateTime<Utc>,
    pub status: CodeStatus,
}

impl ReferenceCode {
    pub fn is_live(&self, now: DateTime<Utc>) -> bool {
        self.status == CodeStatus::Issued && now <= self.expires_at
    }
}
