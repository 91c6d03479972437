use std::path::Path;

use serde::{Deserialize, Serialize};

use super::MinerError;
use crate::domain::{Money, Tier};

/// One taxed band: profits up to and including `upper` pay `rate_permille`.
/// The last band has no upper edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Band {
    #[serde(rename = "upper_kobo")]
    pub upper: Option<Money>,
    pub tier: Tier,
    pub rate_permille: u32,
}

/// Tier bands and rates. Net profit at or below zero is always Exempt at
/// rate 0; the five bands cover everything above.
///
/// Only valid guides can be constructed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TierRateGuide {
    bands: Vec<Band>,
    currency: String,
}

#[derive(Deserialize)]
struct RawGuide {
    bands: Vec<Band>,
    currency: String,
}

pub const CURRENCY: &str = "NGN";

impl TierRateGuide {
    pub fn new(bands: Vec<Band>) -> Result<Self, MinerError> {
        let invalid = |why: String| Err(MinerError::InvalidGuide(why));
        if bands.len() != Tier::TAXED.len() {
            return invalid(format!("expected {} bands, got {}", Tier::TAXED.len(), bands.len()));
        }
        for (band, want) in bands.iter().zip(Tier::TAXED) {
            if band.tier != want {
                return invalid(format!("band for {want} is labelled {}", band.tier));
            }
            if band.rate_permille > 1000 {
                return invalid(format!("rate {}‰ for {want} exceeds 1000‰", band.rate_permille));
            }
        }
        let (open, bounded) = bands.split_last().expect("five bands");
        if open.upper.is_some() {
            return invalid("the last band must be unbounded".into());
        }
        let mut floor = Money::ZERO;
        for band in bounded {
            match band.upper {
                Some(upper) if upper > floor => floor = upper,
                Some(upper) => return invalid(format!("upper edge {} of {} is not above {}", upper.kobo(), band.tier, floor.kobo())),
                None => return invalid(format!("only the last band may be unbounded, not {}", band.tier)),
            }
        }
        if bands.windows(2).any(|w| w[1].rate_permille < w[0].rate_permille) {
            return invalid("rates must not decrease across bands".into());
        }
        Ok(TierRateGuide { bands, currency: CURRENCY.to_string() })
    }

    pub fn bands(&self) -> &[Band] {
        &self.bands
    }

    pub fn rate_of(&self, tier: Tier) -> u32 {
        self.bands.iter().find(|b| b.tier == tier).map_or(0, |b| b.rate_permille)
    }

    pub fn from_json(text: &str) -> Result<Self, MinerError> {
        let raw: RawGuide = serde_json::from_str(text).map_err(|e| MinerError::InvalidGuide(e.to_string()))?;
        if raw.currency != CURRENCY {
            return Err(MinerError::InvalidGuide(format!("unsupported currency {:?}", raw.currency)));
        }
        Self::new(raw.bands)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("guide always serializes")
    }

    pub fn load(path: &Path) -> Result<Self, MinerError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| MinerError::InvalidGuide(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

impl Default for TierRateGuide {
    /// T1 up to ₦50,000 at 20‰, T2 to ₦200,000 at 30‰, T3 to ₦1,000,000 at
    /// 40‰, T4 to ₦5,000,000 at 50‰, T5 above at 60‰.
    fn default() -> Self {
        let band = |naira: Option<i64>, tier, rate_permille| Band { upper: naira.map(Money::from_naira), tier, rate_permille };
        TierRateGuide::new(vec![
            band(Some(50_000), Tier::T1, 20),
            band(Some(200_000), Tier::T2, 30),
            band(Some(1_000_000), Tier::T3, 40),
            band(Some(5_000_000), Tier::T4, 50),
            band(None, Tier::T5, 60),
        ])
        .expect("default guide is valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_guide_json_shape() {
        let json: serde_json::Value = serde_json::from_str(&TierRateGuide::default().to_json()).unwrap();
        assert_eq!(json["currency"], "NGN");
        assert_eq!(json["bands"][0]["upper_kobo"], 5_000_000);
        assert_eq!(json["bands"][0]["tier"], "T1");
        assert_eq!(json["bands"][0]["rate_permille"], 20);
        assert!(json["bands"][4]["upper_kobo"].is_null());
    }

    #[test]
    fn json_round_trip() {
        let g = TierRateGuide::default();
        assert_eq!(TierRateGuide::from_json(&g.to_json()).unwrap(), g);
    }

    #[test]
    fn rejects_bad_guides() {
        let good = TierRateGuide::default().bands().to_vec();
        let mut cases = Vec::new();
        cases.push(good[..4].to_vec());
        let mut swapped = good.clone();
        swapped.swap(0, 1);
        cases.push(swapped);
        let mut flat = good.clone();
        flat[1].upper = flat[0].upper;
        cases.push(flat);
        let mut falling = good.clone();
        falling[4].rate_permille = 10;
        cases.push(falling);
        let mut capped = good.clone();
        capped[4].upper = Some(Money::from_naira(9_000_000));
        cases.push(capped);
        let mut open_early = good.clone();
        open_early[2].upper = None;
        cases.push(open_early);
        let mut zero_edge = good.clone();
        zero_edge[0].upper = Some(Money::ZERO);
        cases.push(zero_edge);
        let mut over = good;
        over[4].rate_permille = 1001;
        cases.push(over);
        for bands in cases {
            assert!(matches!(TierRateGuide::new(bands.clone()), Err(MinerError::InvalidGuide(_))), "{bands:?}");
        }
    }

    #[test]
    fn rejects_foreign_currency() {
        let text = TierRateGuide::default().to_json().replace("NGN", "USD");
        assert!(TierRateGuide::from_json(&text).is_err());
    }
}
