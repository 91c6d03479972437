use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

const PREFIX: &str = "ED";
const BODY_DIGITS: usize = 8;
pub const TIN_CAPACITY: u64 = 100_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TinError {
    #[error("TIN counter {0} exceeds the 8-digit capacity")]
    CounterExhausted(u64),
    #[error("malformed TIN {0:?}")]
    Malformed(String),
}

/// Tax Identification Number: `ED` + 8 digits + 1 Luhn check digit.
///
/// Stored as the 11-character compact form; [`Tin::display`] gives the
/// hyphenated `ED-XXXXXXXX-C` rendering.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Tin(String);

impl Tin {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// The counter this TIN was minted from.
    pub fn counter(&self) -> u64 {
        self.0[2..10].parse().expect("validated on construction")
    }

    pub fn display(&self) -> String {
        format!("{}-{}-{}", &self.0[..2], &self.0[2..10], &self.0[10..])
    }
}

/// Mints the TIN for `counter`. Injective over `0..10^8`.
pub fn mint_tin(counter: u64) -> Result<Tin, TinError> {
    if counter >= TIN_CAPACITY {
        return Err(TinError::CounterExhausted(counter));
    }
    let body = format!("{counter:0width$}", width = BODY_DIGITS);
    let check = luhn_check_digit(body.as_bytes());
    Ok(Tin(format!("{PREFIX}{body}{}", check as char)))
}

/// True iff `text` is a well-formed TIN (compact or hyphenated) whose check
/// digit validates.
pub fn validate_tin(text: &str) -> bool {
    compact(text).is_some()
}

fn compact(text: &str) -> Option<String> {
    let candidate: String = match text.len() {
        11 => text.to_string(),
        13 if text.as_bytes()[2] == b'-' && text.as_bytes()[11] == b'-' => {
            format!("{}{}{}", &text[..2], &text[3..11], &text[12..])
        }
        _ => return None,
    };
    let digits = candidate.strip_prefix(PREFIX)?;
    if digits.len() != BODY_DIGITS + 1 || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    luhn_valid(digits.as_bytes()).then_some(candidate)
}

/// Check digit that makes `payload ‖ digit` pass the Luhn test.
fn luhn_check_digit(payload: &[u8]) -> u8 {
    // Doubling starts at the rightmost payload digit once the check digit is appended.
    let sum: u32 = payload
        .iter()
        .rev()
        .enumerate()
        .map(|(i, &b)| luhn_term(b - b'0', i % 2 == 0))
        .sum();
    b'0' + ((10 - sum % 10) % 10) as u8
}

fn luhn_valid(digits: &[u8]) -> bool {
    let sum: u32 = digits
        .iter()
        .rev()
        .enumerate()
        .map(|(i, &b)| luhn_term(b - b'0', i % 2 == 1))
        .sum();
    sum % 10 == 0
}

fn luhn_term(digit: u8, double: bool) -> u32 {
    let d = digit as u32;
    if double {
        let v = d * 2;
        if v > 9 {
            v - 9
        } else {
            v
        }
    } else {
        d
    }
}

impl FromStr for Tin {
    type Err = TinError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        compact(s.trim())
            .map(Tin)
            .ok_or_else(|| TinError::Malformed(s.to_string()))
    }
}

impl TryFrom<String> for Tin {
    type Error = TinError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        value.parse()
    }
}

impl From<Tin> for String {
    fn from(t: Tin) -> String {
        t.0
    }
}

impl fmt::Display for Tin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_counter() {
        let tin = mint_tin(0).unwrap();
        assert_eq!(tin.as_str(), "ED000000000");
        assert_eq!(tin.display(), "ED-00000000-0");
        assert!(validate_tin("ED000000000"));
        assert!(validate_tin("ED-00000000-0"));
    }

    #[test]
    fn broken_check_digit() {
        assert!(!validate_tin("ED000000001"));
    }

    #[test]
    fn known_check_digits() {
        // "00000001" + d: the 1 is doubled -> 2, so d = 8.
        assert_eq!(mint_tin(1).unwrap().as_str(), "ED000000018");
        // Classic Luhn example 7992739871 -> 3, left-padded payload unaffected.
        assert!(luhn_valid(b"79927398713"));
        assert_eq!(luhn_check_digit(b"7992739871"), b'3');
    }

    #[test]
    fn capacity() {
        assert!(mint_tin(TIN_CAPACITY - 1).is_ok());
        assert_eq!(mint_tin(TIN_CAPACITY), Err(TinError::CounterExhausted(TIN_CAPACITY)));
    }

    #[test]
    fn rejects_garbage() {
        for bad in ["", "ED", "XX000000000", "ED00000000a", "ED-000000000", "ed000000000", "ED0000000000"] {
            assert!(!validate_tin(bad), "{bad}");
        }
    }

    #[test]
    fn distinct_small_counters() {
        assert_ne!(mint_tin(1).unwrap(), mint_tin(2).unwrap());
    }
}
