//! Leader bidding against a follower whose value is known only through a
//! discrete prior.
//!
//! The follower still best-responds with its realized value, so the leader's
//! payoff at bid `p` is `m (p - v1)` against every follower value `>= p` and
//! `m (v1 - p + 1/2)` against every lower one. The expectation is piecewise
//! linear in `p` with kinks only at support points, which confines the
//! optimum to `{v, v + 1}` for `v` in the support.

use std::collections::BTreeSet;

use serde::Serialize;
use thiserror::Error;

use crate::mechanism::{Bid, Valuation};
use crate::scalar::ExactScalar;
use crate::two_player::{best_response_follower, EquilibriumProfile2P};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DistributionError {
    #[error("support is empty")]
    EmptySupport,
    #[error("support has {support} points but {probs} probabilities")]
    LengthMismatch { support: usize, probs: usize },
    #[error("support must be strictly ascending")]
    NotAscending,
    #[error("probability of value {0} is not positive")]
    NonPositive(u32),
    #[error("probabilities sum to {0}, not 1")]
    NotNormalized(String),
}

/// Finite prior over integer valuations with exact probabilities.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DiscreteValueDistribution<P> {
    support: Vec<Valuation>,
    probs: Vec<P>,
}

impl<P: ExactScalar> DiscreteValueDistribution<P> {
    pub fn new(support: Vec<Valuation>, probs: Vec<P>) -> Result<Self, DistributionError> {
        if support.is_empty() {
            return Err(DistributionError::EmptySupport);
        }
        if support.len() != probs.len() {
            return Err(DistributionError::LengthMismatch {
                support: support.len(),
                probs: probs.len(),
            });
        }
        if support.windows(2).any(|w| w[0] >= w[1]) {
            return Err(DistributionError::NotAscending);
        }
        if let Some((v, _)) = support.iter().zip(&probs).find(|(_, p)| !p.is_positive()) {
            return Err(DistributionError::NonPositive(v.get()));
        }
        let total = probs.iter().fold(P::zero(), |acc, p| acc + p.clone());
        if !total.is_one() {
            return Err(DistributionError::NotNormalized(total.to_string()));
        }
        Ok(DiscreteValueDistribution { support, probs })
    }

    /// Point mass on a single value.
    pub fn degenerate(v0: Valuation) -> Self {
        DiscreteValueDistribution {
            support: vec![v0],
            probs: vec![P::one()],
        }
    }

    pub fn support(&self) -> &[Valuation] {
        &self.support
    }

    pub fn probs(&self) -> &[P] {
        &self.probs
    }

    pub fn iter(&self) -> impl Iterator<Item = (Valuation, &P)> {
        self.support.iter().copied().zip(&self.probs)
    }

    pub fn max_value(&self) -> Valuation {
        *self.support.last().expect("support is non-empty")
    }

    /// Probability mass on support points `>= support[index]`.
    pub fn upper_mass(&self, index: usize) -> P {
        self.probs[index..].iter().fold(P::zero(), |acc, p| acc + p.clone())
    }

    /// Probability mass on support points `< support[index]`.
    pub fn lower_mass(&self, index: usize) -> P {
        self.probs[..index].iter().fold(P::zero(), |acc, p| acc + p.clone())
    }

    /// Whether, on the bids strictly above `support[index - 1]` and at most
    /// `support[index]`, the top of the interval is an optimum.
    pub fn prefers_interval_top(&self, index: usize) -> bool {
        self.upper_mass(index) >= self.lower_mass(index)
    }
}

/// Expected leader utility in currency units.
pub fn expected_leader_utility<P: ExactScalar>(
    p1: Bid,
    v1: Valuation,
    dist: &DiscreteValueDistribution<P>,
    units: u64,
) -> P {
    let m = P::from_int(units as i64);
    let p = i64::from(p1.get());
    let own = i64::from(v1.get());
    let half = P::from_fraction(1, 2).expect("1/2 is representable");
    let matched = m.clone() * P::from_int(p - own);
    let undercut = m * (P::from_int(own - p) + half);
    dist.iter().fold(P::zero(), |acc, (v0, prob)| {
        let payoff = if v0.as_bid() >= p1 { &matched } else { &undercut };
        acc + payoff.clone() * prob.clone()
    })
}

/// The bids the optimum is confined to: every support value and its successor.
pub fn candidate_bids<P: ExactScalar>(dist: &DiscreteValueDistribution<P>) -> BTreeSet<Bid> {
    dist.support().iter().flat_map(|v| [v.as_bid(), v.outbid()]).collect()
}

/// Smallest bid maximizing the expected utility, found by scanning the candidates.
pub fn optimal_bayesian_leader_bid<P: ExactScalar>(
    v1: Valuation,
    dist: &DiscreteValueDistribution<P>,
    units: u64,
) -> Bid {
    let mut best: Option<(Bid, P)> = None;
    for bid in candidate_bids(dist) {
        let e = expected_leader_utility(bid, v1, dist, units);
        // ascending scan; strict comparison keeps the smallest maximizer
        if best.as_ref().is_none_or(|(_, top)| e > *top) {
            best = Some((bid, e));
        }
    }
    best.expect("candidate set is non-empty").0
}

/// Every bid attaining the maximal expected utility, with that maximum.
///
/// The expectation falls by `m` per unit beyond the largest support value
/// plus one, so the scan stops there.
pub fn leader_bid_maximizers<P: ExactScalar>(
    v1: Valuation,
    dist: &DiscreteValueDistribution<P>,
    units: u64,
) -> (Vec<Bid>, P) {
    let top = dist.max_value().get() + 1;
    let values: Vec<(Bid, P)> = (0..=top)
        .map(|b| (Bid(b), expected_leader_utility(Bid(b), v1, dist, units)))
        .collect();
    let max = values.iter().map(|(_, e)| e).max().expect("non-empty scan").clone();
    let bids = values.into_iter().filter(|(_, e)| *e == max).map(|(b, _)| b).collect();
    (bids, max)
}

/// Equilibrium play when the follower's realized value is `actual_v0`.
pub fn bayesian_se<P: ExactScalar>(
    actual_v0: Valuation,
    v1: Valuation,
    dist: &DiscreteValueDistribution<P>,
    units: u64,
) -> EquilibriumProfile2P {
    let p1 = optimal_bayesian_leader_bid(v1, dist, units);
    let p0 = best_response_follower(p1, actual_v0);
    EquilibriumProfile2P::evaluate(units, actual_v0, v1, p0, p1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::two_player::solve_se;
    use crate::Rational;

    fn v(x: u32) -> Valuation {
        Valuation::new(x).unwrap()
    }

    fn r(n: i64, d: i64) -> Rational {
        Rational::new(n, d)
    }

    fn two_point() -> DiscreteValueDistribution<Rational> {
        DiscreteValueDistribution::new(vec![v(2), v(4)], vec![r(1, 2), r(1, 2)]).unwrap()
    }

    #[test]
    fn expected_utility_examples() {
        let d = two_point();
        assert_eq!(expected_leader_utility(Bid(3), v(3), &d, 1), r(1, 4));
        assert_eq!(expected_leader_utility(Bid(2), v(3), &d, 1), r(-1, 1));
        assert_eq!(expected_leader_utility(Bid(5), v(3), &d, 1), r(-3, 2));
    }

    #[test]
    fn optimal_bid_examples() {
        let d = two_point();
        assert_eq!(optimal_bayesian_leader_bid(v(3), &d, 1), Bid(3));
        let (ties, max) = leader_bid_maximizers(v(3), &d, 1);
        assert_eq!(ties, vec![Bid(3), Bid(4)]);
        assert_eq!(max, r(1, 4));

        let point = DiscreteValueDistribution::<Rational>::degenerate(v(5));
        assert_eq!(optimal_bayesian_leader_bid(v(3), &point, 1), Bid(5));
        assert_eq!(optimal_bayesian_leader_bid(v(9), &point, 1), Bid(6));
    }

    #[test]
    fn equilibrium_examples() {
        let d = two_point();
        let low = bayesian_se(v(2), v(3), &d, 1);
        assert_eq!((low.p0, low.p1), (Bid(2), Bid(3)));
        let high = bayesian_se(v(4), v(3), &d, 1);
        assert_eq!((high.p0, high.p1), (Bid(3), Bid(3)));
    }

    #[test]
    fn degenerate_prior_reduces_to_complete_information() {
        for a in 1..=10 {
            for b in 1..=10 {
                let point = DiscreteValueDistribution::<Rational>::degenerate(v(a));
                assert_eq!(
                    bayesian_se(v(a), v(b), &point, 2),
                    solve_se(v(a), v(b), 2),
                    "v0={a} v1={b}"
                );
            }
        }
    }

    #[test]
    fn rejects_bad_distributions() {
        use DistributionError::*;
        let d = |s: Vec<u32>, p: Vec<Rational>| DiscreteValueDistribution::new(s.into_iter().map(v).collect(), p);
        assert_eq!(d(vec![], vec![]), Err(EmptySupport));
        assert_eq!(
            d(vec![2], vec![r(1, 2), r(1, 2)]),
            Err(LengthMismatch { support: 1, probs: 2 })
        );
        assert_eq!(d(vec![4, 2], vec![r(1, 2), r(1, 2)]), Err(NotAscending));
        assert_eq!(d(vec![2, 2], vec![r(1, 2), r(1, 2)]), Err(NotAscending));
        assert_eq!(d(vec![2, 4], vec![r(0, 1), r(1, 1)]), Err(NonPositive(2)));
        assert_eq!(d(vec![2, 4], vec![r(1, 2), r(1, 3)]), Err(NotNormalized("5/6".into())));
    }

    #[test]
    fn big_rationals_agree() {
        use num_rational::BigRational;
        let probs = [(1, 3), (1, 6), (1, 2)]
            .iter()
            .map(|&(n, d)| BigRational::from_fraction(n, d).unwrap())
            .collect();
        let big = DiscreteValueDistribution::new(vec![v(2), v(5), v(9)], probs).unwrap();
        let small = DiscreteValueDistribution::new(vec![v(2), v(5), v(9)], vec![r(1, 3), r(1, 6), r(1, 2)]).unwrap();
        for v1 in 1..=12 {
            assert_eq!(
                optimal_bayesian_leader_bid(v(v1), &big, 3),
                optimal_bayesian_leader_bid(v(v1), &small, 3)
            );
        }
    }

    #[test]
    fn interval_masses() {
        let d = DiscreteValueDistribution::new(vec![v(2), v(5), v(9)], vec![r(1, 3), r(1, 6), r(1, 2)]).unwrap();
        assert_eq!(d.upper_mass(1), r(2, 3));
        assert_eq!(d.lower_mass(1), r(1, 3));
        assert!(d.prefers_interval_top(1));
        assert!(d.prefers_interval_top(2));
    }
}
