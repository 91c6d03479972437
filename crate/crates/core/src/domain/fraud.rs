use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Deterministic fraud rules evaluated ahead of the neural scorer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RuleHit {
    CodeNotFound,
    StolenCode,
    Replay,
    AmountMismatch,
    AlterationAttempt,
    ExpiredCode,
}

impl RuleHit {
    pub fn as_str(self) -> &'static str {
        match self {
            RuleHit::CodeNotFound => "CodeNotFound",
            RuleHit::StolenCode => "StolenCode",
            RuleHit::Replay => "Replay",
            RuleHit::AmountMismatch => "AmountMismatch",
            RuleHit::AlterationAttempt => "AlterationAttempt",
            RuleHit::ExpiredCode => "ExpiredCode",
        }
    }
}

impl FromStr for RuleHit {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "CodeNotFound" => RuleHit::CodeNotFound,
            "StolenCode" => RuleHit::StolenCode,
            "Replay" => RuleHit::Replay,
            "AmountMismatch" => RuleHit::AmountMismatch,
            "AlterationAttempt" => RuleHit::AlterationAttempt,
            "ExpiredCode" => RuleHit::ExpiredCode,
            other => return Err(format!("unknown rule {other:?}")),
        })
    }
}

impl fmt::Display for RuleHit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    Clear,
    FraudAlert,
}

/// Result class of a reference-code lookup, as recorded in the audit log.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LookupOutcome {
    Valid,
    NotFound,
    Stolen,
    Replayed,
    Expired,
}

impl LookupOutcome {
    pub fn as_str(self) -> &'static str {
        match self {
            LookupOutcome::Valid => "Valid",
            LookupOutcome::NotFound => "NotFound",
            LookupOutcome::Stolen => "Stolen",
            LookupOutcome::Replayed => "Replayed",
            LookupOutcome::Expired => "Expired",
        }
    }
}

impl FromStr for LookupOutcome {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "Valid" => LookupOutcome::Valid,
            "NotFound" => LookupOutcome::NotFound,
            "Stolen" => LookupOutcome::Stolen,
            "Replayed" => LookupOutcome::Replayed,
            "Expired" => LookupOutcome::Expired,
            other => return Err(format!("unknown lookup outcome {other:?}")),
        })
    }
}
