//! Single-round repurchase game between the majority holder (follower, N0)
//! and one minority holder (leader, N1) under complete information.

use serde::{Deserialize, Serialize};

use crate::mechanism::{pairwise_outcome, Bid, Valuation};
use crate::money::HalfUnits;

/// Bids and utilities of a two-player profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EquilibriumProfile2P {
    pub p0: Bid,
    pub p1: Bid,
    pub u0: HalfUnits,
    pub u1: HalfUnits,
}

impl EquilibriumProfile2P {
    pub fn evaluate(units: u64, v0: Valuation, v1: Valuation, p0: Bid, p1: Bid) -> Self {
        let o = pairwise_outcome(units, v0, v1, p0, p1);
        EquilibriumProfile2P {
            p0,
            p1,
            u0: o.u_follower,
            u1: o.u_leader,
        }
    }
}

pub fn follower_utility(units: u64, v0: Valuation, p0: Bid, p1: Bid) -> HalfUnits {
    // the leader's value does not enter the follower's payoff
    pairwise_outcome(units, v0, v0, p0, p1).u_follower
}

pub fn leader_utility(units: u64, v1: Valuation, p0: Bid, p1: Bid) -> HalfUnits {
    pairwise_outcome(units, v1, v1, p0, p1).u_leader
}

/// The follower matches any bid up to its value and undercuts by one above it.
pub fn best_response_follower(p1: Bid, v0: Valuation) -> Bid {
    if p1.get() > v0.get() {
        Bid(p1.get() - 1)
    } else {
        p1
    }
}

pub fn optimal_leader_bid(v0: Valuation, v1: Valuation) -> Bid {
    if v1 <= v0 {
        v0.as_bid()
    } else {
        v0.outbid()
    }
}

/// The unique Stackelberg equilibrium: the follower always bids its value,
/// and the leader either matches it or outbids it by one.
pub fn solve_se(v0: Valuation, v1: Valuation, units: u64) -> EquilibriumProfile2P {
    let p1 = optimal_leader_bid(v0, v1);
    let p0 = best_response_follower(p1, v0);
    EquilibriumProfile2P::evaluate(units, v0, v1, p0, p1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: u32) -> Valuation {
        Valuation::new(x).unwrap()
    }

    #[test]
    fn follower_response() {
        assert_eq!(best_response_follower(Bid(5), v(3)), Bid(4));
        assert_eq!(best_response_follower(Bid(3), v(3)), Bid(3));
        assert_eq!(best_response_follower(Bid(0), v(1)), Bid(0));
    }

    #[test]
    fn leader_bid() {
        assert_eq!(optimal_leader_bid(v(4), v(2)), Bid(4));
        assert_eq!(optimal_leader_bid(v(4), v(5)), Bid(5));
        assert_eq!(optimal_leader_bid(v(4), v(4)), Bid(4));
    }

    #[test]
    fn equilibria() {
        let se = solve_se(v(4), v(2), 1);
        assert_eq!((se.p0, se.p1), (Bid(4), Bid(4)));
        assert_eq!((se.u0, se.u1), (HalfUnits::ZERO, HalfUnits::from_units(2)));

        let se = solve_se(v(4), v(5), 2);
        assert_eq!((se.p0, se.p1), (Bid(4), Bid(5)));
        assert_eq!((se.u0, se.u1), (HalfUnits::ZERO, HalfUnits::from_units(1)));

        let se = solve_se(v(7), v(7), 3);
        assert_eq!((se.p0, se.p1), (Bid(7), Bid(7)));
        assert_eq!((se.u0, se.u1), (HalfUnits::ZERO, HalfUnits::ZERO));
    }

    #[test]
    fn follower_never_gains_in_equilibrium() {
        for a in 1..=20 {
            for b in 1..=20 {
                for m in 1..=3 {
                    assert_eq!(solve_se(v(a), v(b), m).u0, HalfUnits::ZERO);
                }
            }
        }
    }

    #[test]
    fn payoff_helpers_ignore_other_value() {
        assert_eq!(follower_utility(2, v(5), Bid(5), Bid(6)), HalfUnits::ZERO);
        assert_eq!(leader_utility(2, v(7), Bid(5), Bid(6)), HalfUnits::from_units(3));
    }
}
