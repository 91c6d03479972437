use num_rational::Ratio;
use serde::Serialize;

use super::MinerError;
use crate::domain::{BusinessId, Money, MonthlyFinancials, Period};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ProfitReport {
    pub business_id: BusinessId,
    pub period: Period,
    pub net_profit: Money,
    /// `net_profit / revenue`, exactly; zero when revenue is zero.
    #[serde(serialize_with = "ratio_as_string")]
    pub profit_margin: Ratio<i64>,
}

fn ratio_as_string<S: serde::Serializer>(r: &Ratio<i64>, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(r)
}

pub fn compute_profitability(business_id: &BusinessId, fin: &MonthlyFinancials) -> Result<ProfitReport, MinerError> {
    let (revenue, expenses) = (fin.revenue.kobo(), fin.expenses.kobo());
    if revenue < 0 || expenses < 0 {
        return Err(MinerError::NegativeInput);
    }
    let net = revenue - expenses;
    let profit_margin = if revenue == 0 { Ratio::from_integer(0) } else { Ratio::new(net, revenue) };
    Ok(ProfitReport { business_id: business_id.clone(), period: fin.period, net_profit: Money::from_kobo(net), profit_margin })
}

#[cfg(test)]
mod tests {
    use chrono::Utc;
    use proptest::prelude::*;

    use super::*;

    fn fin(revenue: Money, expenses: Money) -> MonthlyFinancials {
        MonthlyFinancials { period: Period::new(2024, 2).unwrap(), revenue, expenses, captured_at: Utc::now() }
    }

    fn report(rev_naira: i64, exp_naira: i64) -> ProfitReport {
        compute_profitability(&BusinessId::from_serial(1), &fin(Money::from_naira(rev_naira), Money::from_naira(exp_naira)))
            .unwrap()
    }

    #[test]
    fn examples() {
        let r = report(500_000, 350_000);
        assert_eq!(r.net_profit, Money::from_naira(150_000));
        assert_eq!(r.profit_margin, Ratio::new(3, 10));

        let r = report(0, 0);
        assert_eq!((r.net_profit, r.profit_margin), (Money::ZERO, Ratio::from_integer(0)));

        let r = report(100_000, 120_000);
        assert_eq!(r.net_profit, Money::from_naira(-20_000));
        assert_eq!(r.profit_margin, Ratio::new(-1, 5));
    }

    #[test]
    fn negative_input() {
        let r = compute_profitability(&BusinessId::from_serial(1), &fin(Money::from_kobo(-1), Money::ZERO));
        assert!(matches!(r, Err(MinerError::NegativeInput)));
    }

    proptest! {
        #[test]
        fn net_is_exact_and_margin_at_most_one(rev in 0i64..1_000_000_000_000, exp in 0i64..1_000_000_000_000) {
            let r = compute_profitability(
                &BusinessId::from_serial(1),
                &fin(Money::from_kobo(rev), Money::from_kobo(exp)),
            ).unwrap();
            prop_assert_eq!(r.net_profit.kobo() + exp, rev);
            prop_assert!(r.profit_margin <= Ratio::from_integer(1));
            if rev > 0 {
                prop_assert_eq!(r.profit_margin * Ratio::from_integer(rev), Ratio::from_integer(rev - exp));
            }
        }
    }
}
