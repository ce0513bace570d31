//! The bilateral repurchase rule between the majority holder and one
//! minority holder, and the exact payoffs it induces.
//!
//! The majority holder (the follower) buys the counterparty's shares at the
//! bid midpoint whenever its bid is at least the counterparty's. Otherwise it
//! sells its own matching block of shares at the midpoint, but only receives
//! the midpoint less half a unit per share.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::money::HalfUnits;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("valuations must be at least 1")]
pub struct ZeroValuation;

/// Per-unit private value, an integer in `{1, 2, ...}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct Valuation(u32);

impl Valuation {
    pub const fn new(v: u32) -> Result<Self, ZeroValuation> {
        if v == 0 {
            Err(ZeroValuation)
        } else {
            Ok(Valuation(v))
        }
    }

    pub const fn get(self) -> u32 {
        self.0
    }

    /// Truthful bid.
    pub const fn as_bid(self) -> Bid {
        Bid(self.0)
    }

    /// Bid one above this value.
    pub const fn outbid(self) -> Bid {
        Bid(self.0 + 1)
    }
}

impl TryFrom<u32> for Valuation {
    type Error = ZeroValuation;
    fn try_from(v: u32) -> Result<Self, ZeroValuation> {
        Valuation::new(v)
    }
}

impl From<Valuation> for u32 {
    fn from(v: Valuation) -> u32 {
        v.0
    }
}

impl fmt::Display for Valuation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A bid, an integer in `{0, 1, ...}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Bid(pub u32);

impl Bid {
    pub const fn get(self) -> u32 {
        self.0
    }

    /// One below, saturating at zero.
    pub const fn lowered(self) -> Bid {
        Bid(self.0.saturating_sub(1))
    }

    pub const fn raised(self) -> Bid {
        Bid(self.0 + 1)
    }
}

impl From<Valuation> for Bid {
    fn from(v: Valuation) -> Bid {
        v.as_bid()
    }
}

impl fmt::Display for Bid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TradeDirection {
    /// The majority holder bid at least as much and buys the minority block.
    FollowerBuys,
    /// The minority holder outbid and buys a matching block from the majority holder.
    LeaderBuys,
}

/// Result of one pairwise deal. Utilities are totals over all moved units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairwiseOutcome {
    pub direction: TradeDirection,
    pub unit_price: HalfUnits,
    pub seller_unit_revenue: HalfUnits,
    pub u_follower: HalfUnits,
    pub u_leader: HalfUnits,
}

fn halves(x: u32) -> i64 {
    2 * i64::from(x)
}

/// Settle one deal of `units` shares between the majority holder
/// (value `v_follower`, bid `p_follower`) and a minority holder.
///
/// # Panics
/// If `units` is zero.
pub fn pairwise_outcome(
    units: u64,
    v_follower: Valuation,
    v_leader: Valuation,
    p_follower: Bid,
    p_leader: Bid,
) -> PairwiseOutcome {
    assert!(units >= 1, "a deal moves at least one unit");
    let m = units as i64;
    let bid_sum = i64::from(p_follower.0) + i64::from(p_leader.0);
    let unit_price = HalfUnits::from_halves(bid_sum);
    if p_follower >= p_leader {
        PairwiseOutcome {
            direction: TradeDirection::FollowerBuys,
            unit_price,
            seller_unit_revenue: unit_price,
            u_follower: HalfUnits::from_halves(halves(v_follower.0) - bid_sum) * m,
            u_leader: HalfUnits::from_halves(bid_sum - halves(v_leader.0)) * m,
        }
    } else {
        let revenue = unit_price - HalfUnits::HALF;
        PairwiseOutcome {
            direction: TradeDirection::LeaderBuys,
            unit_price,
            seller_unit_revenue: revenue,
            u_follower: (revenue - HalfUnits::from_halves(halves(v_follower.0))) * m,
            u_leader: HalfUnits::from_halves(halves(v_leader.0) - bid_sum) * m,
        }
    }
}

/// Joint utility of one deal. A failed repurchase burns half a unit per share.
pub fn utility_sum(
    units: u64,
    v_follower: Valuation,
    v_leader: Valuation,
    p_follower: Bid,
    p_leader: Bid,
) -> HalfUnits {
    let m = units as i64;
    let gap = halves(v_follower.0) - halves(v_leader.0);
    if p_follower >= p_leader {
        HalfUnits::from_halves(gap) * m
    } else {
        HalfUnits::from_halves(-gap) * m - HalfUnits::HALF * m
    }
}

/// Joint utility with the failed-trade discount charged once per deal
/// instead of once per share. Only meaningful for the coalition bound in
/// [`crate::multiplayer::coalition_bound`]; payoffs never use it.
pub fn utility_sum_flat_discount(
    units: u64,
    v_follower: Valuation,
    v_leader: Valuation,
    p_follower: Bid,
    p_leader: Bid,
) -> HalfUnits {
    let m = units as i64;
    let gap = halves(v_follower.0) - halves(v_leader.0);
    if p_follower >= p_leader {
        HalfUnits::from_halves(gap) * m
    } else {
        HalfUnits::from_halves(-gap) * m - HalfUnits::HALF
    }
}

/// Largest joint utility any pair of bids can reach.
pub fn max_utility_sum(units: u64, v_follower: Valuation, v_leader: Valuation) -> HalfUnits {
    let m = units as i64;
    let gap = halves(v_follower.0) - halves(v_leader.0);
    if v_follower >= v_leader {
        HalfUnits::from_halves(gap) * m
    } else {
        HalfUnits::from_halves(-gap) * m - HalfUnits::HALF * m
    }
}
