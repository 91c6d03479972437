use std::fmt;
use std::iter::Sum;
use std::ops::{Add, Neg, Sub};

use serde::{Deserialize, Serialize};

/// An amount of Nigerian naira held as an integer count of kobo.
///
/// `₦1 = 100 kobo`. Arithmetic is integer-only; nothing in the system ever
/// produces a fractional kobo.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Money(i64);

pub const KOBO_PER_NAIRA: i64 = 100;

impl Money {
    pub const ZERO: Money = Money(0);

    pub const fn from_kobo(kobo: i64) -> Self {
        Money(kobo)
    }

    pub const fn from_naira(naira: i64) -> Self {
        Money(naira * KOBO_PER_NAIRA)
    }

    pub const fn kobo(self) -> i64 {
        self.0
    }

    pub fn is_positive(self) -> bool {
        self.0 > 0
    }

    pub fn checked_add(self, other: Money) -> Option<Money> {
        self.0.checked_add(other.0).map(Money)
    }

    pub fn checked_sub(self, other: Money) -> Option<Money> {
        self.0.checked_sub(other.0).map(Money)
    }

    /// `floor(self × permille / 1000)`, rounding toward negative infinity.
    pub fn mul_permille_floor(self, permille: u32) -> Money {
        let product = self.0 as i128 * permille as i128;
        Money(product.div_euclid(1000) as i64)
    }

    pub fn abs_diff(self, other: Money) -> Money {
        Money((self.0 - other.0).abs())
    }
}

impl Add for Money {
    type Output = Money;

    fn add(self, rhs: Money) -> Money {
        Money(self.0 + rhs.0)
    }
}

impl Sub for Money {
    type Output = Money;

    fn sub(self, rhs: Money) -> Money {
        Money(self.0 - rhs.0)
    }
}

impl Neg for Money {
    type Output = Money;

    fn neg(self) -> Money {
        Money(-self.0)
    }
}

impl Sum for Money {
    fn sum<I: Iterator<Item = Money>>(iter: I) -> Money {
        iter.fold(Money::ZERO, Add::add)
    }
}

/// Renders as `₦N,NNN.NN`; negative amounts get a leading minus sign.
impl fmt::Display for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        let naira = abs / KOBO_PER_NAIRA as u64;
        let kobo = abs % KOBO_PER_NAIRA as u64;
        let digits = naira.to_string();
        let mut grouped = String::with_capacity(digits.len() + digits.len() / 3);
        for (i, ch) in digits.chars().enumerate() {
            if i > 0 && (digits.len() - i) % 3 == 0 {
                grouped.push(',');
            }
            grouped.push(ch);
        }
        write!(f, "{sign}₦{grouped}.{kobo:02}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_with_grouping() {
        assert_eq!(Money::from_kobo(0).to_string(), "₦0.00");
        assert_eq!(Money::from_kobo(66_666).to_string(), "₦666.66");
        assert_eq!(Money::from_naira(1_234_567).to_string(), "₦1,234,567.00");
        assert_eq!(Money::from_naira(-20_000).to_string(), "-₦20,000.00");
        assert_eq!(Money::from_kobo(105).to_string(), "₦1.05");
    }

    #[test]
    fn permille_floor() {
        assert_eq!(Money::from_naira(100_000).mul_permille_floor(30), Money::from_naira(3_000));
        assert_eq!(Money::from_kobo(3_333_300).mul_permille_floor(20), Money::from_kobo(66_666));
        assert_eq!(Money::from_kobo(1).mul_permille_floor(20), Money::ZERO);
        assert_eq!(Money::from_kobo(-1).mul_permille_floor(20), Money::from_kobo(-1));
    }

    #[test]
    fn serializes_as_integer_kobo() {
        let json = serde_json::to_string(&Money::from_naira(5)).unwrap();
        assert_eq!(json, "500");
    }
}
