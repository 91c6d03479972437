use super::guide::TierRateGuide;
use crate::domain::{Money, Tier};

/// Fixed-depth decision tree over net profit. The root separates exempt
/// profits; below it a balanced tree of `profit <= edge` tests leads to one
/// leaf per tier.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Node {
    Split { edge: Money, at_or_below: Box<Node>, above: Box<Node> },
    Leaf { tier: Tier, rate_permille: u32 },
}

impl Node {
    pub fn for_guide(guide: &TierRateGuide) -> Node {
        Node::Split {
            edge: Money::ZERO,
            at_or_below: Box::new(Node::Leaf { tier: Tier::Exempt, rate_permille: 0 }),
            above: Box::new(Self::build(guide.bands())),
        }
    }

    fn build(bands: &[super::guide::Band]) -> Node {
        if let [only] = bands {
            return Node::Leaf { tier: only.tier, rate_permille: only.rate_permille };
        }
        let mid = bands.len().div_ceil(2);
        Node::Split {
            edge: bands[mid - 1].upper.expect("only the last band is open"),
            at_or_below: Box::new(Self::build(&bands[..mid])),
            above: Box::new(Self::build(&bands[mid..])),
        }
    }

    pub fn decide(&self, net_profit: Money) -> (Tier, u32) {
        let mut node = self;
        loop {
            match node {
                Node::Leaf { tier, rate_permille } => return (*tier, *rate_permille),
                Node::Split { edge, at_or_below, above } => {
                    node = if net_profit <= *edge { at_or_below } else { above };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Node::Leaf { .. } => 0,
            Node::Split { at_or_below, above, .. } => 1 + at_or_below.depth().max(above.depth()),
        }
    }
}

pub fn classify_tier(net_profit: Money, guide: &TierRateGuide) -> Tier {
    Node::for_guide(guide).decide(net_profit).0
}

/// Tier and tax owed: `floor(net_profit × rate / 1000)`, zero when exempt.
pub fn assess_tax(net_profit: Money, guide: &TierRateGuide) -> (Tier, Money) {
    let (tier, rate) = Node::for_guide(guide).decide(net_profit);
    match tier {
        Tier::Exempt => (tier, Money::ZERO),
        _ => (tier, net_profit.mul_permille_floor(rate)),
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn naira(n: i64) -> Money {
        Money::from_naira(n)
    }

    /// Reference classifier: walk the bands in order.
    fn linear_scan(net: Money, guide: &TierRateGuide) -> Tier {
        if net <= Money::ZERO {
            return Tier::Exempt;
        }
        guide.bands().iter().find(|b| b.upper.is_none_or(|u| net <= u)).map(|b| b.tier).unwrap()
    }

    #[test]
    fn band_examples() {
        let g = TierRateGuide::default();
        assert_eq!(classify_tier(naira(30_000), &g), Tier::T1);
        assert_eq!(classify_tier(naira(50_000), &g), Tier::T1);
        assert_eq!(classify_tier(naira(50_001), &g), Tier::T2);
        assert_eq!(classify_tier(naira(-10_000), &g), Tier::Exempt);
        assert_eq!(classify_tier(Money::ZERO, &g), Tier::Exempt);
    }

    #[test]
    fn assessment_examples() {
        let g = TierRateGuide::default();
        assert_eq!(assess_tax(naira(100_000), &g), (Tier::T2, Money::from_kobo(300_000)));
        assert_eq!(assess_tax(naira(-5_000), &g), (Tier::Exempt, Money::ZERO));
        assert_eq!(assess_tax(naira(33_333), &g), (Tier::T1, Money::from_kobo(66_666)));
        assert_eq!(assess_tax(naira(150_000), &g), (Tier::T2, naira(4_500)));
    }

    #[test]
    fn tree_is_shallow() {
        // Exempt test plus ceil(log2(5)) band tests.
        assert_eq!(Node::for_guide(&TierRateGuide::default()).depth(), 4);
    }

    #[test]
    fn every_edge_and_neighbour_matches_scan() {
        let g = TierRateGuide::default();
        let mut probes = vec![i64::MIN, -1, 0, 1, i64::MAX];
        for b in g.bands() {
            if let Some(u) = b.upper {
                probes.extend([u.kobo() - 1, u.kobo(), u.kobo() + 1]);
            }
        }
        for k in probes {
            let m = Money::from_kobo(k);
            assert_eq!(classify_tier(m, &g), linear_scan(m, &g), "{k}");
        }
    }

    #[test]
    fn agrees_with_scan_on_1e5_random_profits() {
        use rand::{Rng, SeedableRng};
        let g = TierRateGuide::default();
        let tree = Node::for_guide(&g);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..100_000 {
            let k = if rng.random_bool(0.5) { rng.random_range(-1_000_000_000..1_000_000_000) } else { rng.random() };
            let m = Money::from_kobo(k);
            assert_eq!(tree.decide(m).0, linear_scan(m, &g), "{k}");
        }
    }

    fn arb_guide() -> impl Strategy<Value = TierRateGuide> {
        (
            proptest::collection::btree_set(1i64..1_000_000_000_000, 4),
            proptest::collection::vec(0u32..=1000, 5),
        )
            .prop_map(|(edges, mut rates)| {
                rates.sort_unstable();
                let mut uppers: Vec<Option<Money>> = edges.into_iter().map(|k| Some(Money::from_kobo(k))).collect();
                uppers.push(None);
                let bands = uppers
                    .into_iter()
                    .zip(Tier::TAXED)
                    .zip(rates)
                    .map(|((upper, tier), rate_permille)| super::super::guide::Band { upper, tier, rate_permille })
                    .collect();
                TierRateGuide::new(bands).unwrap()
            })
    }

    proptest! {
        #[test]
        fn monotone(g in arb_guide(), a in any::<i64>(), b in any::<i64>()) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(classify_tier(Money::from_kobo(lo), &g) <= classify_tier(Money::from_kobo(hi), &g));
        }

        #[test]
        fn tree_matches_scan(g in arb_guide(), k in any::<i64>()) {
            let m = Money::from_kobo(k);
            prop_assert_eq!(classify_tier(m, &g), linear_scan(m, &g));
        }

        #[test]
        fn tax_never_exceeds_profit(g in arb_guide(), k in any::<i64>()) {
            let net = Money::from_kobo(k);
            let (tier, tax) = assess_tax(net, &g);
            prop_assert!(tax >= Money::ZERO);
            if tier != Tier::Exempt {
                prop_assert!(tax <= net);
                // Independent floor: integer division of the exact product.
                let want = (k as i128 * g.rate_of(tier) as i128) / 1000;
                prop_assert_eq!(tax.kobo() as i128, want);
            }
        }
    }
}
