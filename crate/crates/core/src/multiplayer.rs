//! One majority holder (the follower, N0) against several minority holders
//! (the leaders, N1..Nk), each settling a separate pairwise deal.
//!
//! Leader bids are passed as slices aligned with [`MultiplayerGame::leaders`].

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mechanism::{pairwise_outcome, utility_sum_flat_discount, Bid, Valuation};
use crate::money::HalfUnits;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MultiplayerError {
    #[error("at least one leader is required")]
    NoLeaders,
    #[error("leader indices start at 1, got 0")]
    ZeroIndex,
    #[error("leader N{0} listed twice")]
    DuplicateLeader(usize),
    #[error("leader N{0} holds no units")]
    ZeroUnits(usize),
    #[error("follower holds {m0} of {supply} units, not a strict majority")]
    NotMajority { m0: u64, supply: u64 },
    #[error("N{0} is not a leader")]
    UnknownLeader(usize),
    #[error("expected {expected} leader bids, got {got}")]
    IncompleteProfile { expected: usize, got: usize },
    #[error("the deviation leaves every leader at its equilibrium bid")]
    EmptyCoalition,
}

/// A minority holder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Holding {
    pub index: usize,
    pub units: u64,
    pub value: Valuation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MultiplayerGame {
    pub v0: Valuation,
    pub m0: u64,
    pub leaders: Vec<Holding>,
}

/// Follower bid plus every leader's bid, keyed by leader index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BidProfile {
    pub p0: Bid,
    pub leader_bids: BTreeMap<usize, Bid>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProfileOutcome {
    pub profile: BidProfile,
    pub u0: HalfUnits,
    pub leader_utilities: BTreeMap<usize, HalfUnits>,
}

/// Result of a coalition deviation, with both sides of the comparison.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollusionWitness {
    pub coalition: BTreeSet<usize>,
    pub deviated_bids: BTreeMap<usize, Bid>,
    pub follower_response: Bid,
    pub deviated_utility: HalfUnits,
    pub equilibrium_utility: HalfUnits,
    /// The coalition ends strictly worse off.
    pub resisted: bool,
}

/// Equilibrium leader bid: match the follower's value, or outbid it by one.
pub fn leader_bid_star(v0: Valuation, vi: Valuation) -> Bid {
    if vi <= v0 {
        v0.as_bid()
    } else {
        v0.outbid()
    }
}

impl MultiplayerGame {
    pub fn new(v0: Valuation, m0: u64, leaders: Vec<Holding>) -> Result<Self, MultiplayerError> {
        if leaders.is_empty() {
            return Err(MultiplayerError::NoLeaders);
        }
        let mut seen = BTreeSet::new();
        for h in &leaders {
            if h.index == 0 {
                return Err(MultiplayerError::ZeroIndex);
            }
            if !seen.insert(h.index) {
                return Err(MultiplayerError::DuplicateLeader(h.index));
            }
            if h.units == 0 {
                return Err(MultiplayerError::ZeroUnits(h.index));
            }
        }
        let supply = m0 + leaders.iter().map(|h| h.units).sum::<u64>();
        if 2 * m0 <= supply {
            return Err(MultiplayerError::NotMajority { m0, supply });
        }
        Ok(MultiplayerGame { v0, m0, leaders })
    }

    pub fn supply(&self) -> u64 {
        self.m0 + self.leaders.iter().map(|h| h.units).sum::<u64>()
    }

    fn position(&self, index: usize) -> Result<usize, MultiplayerError> {
        self.leaders
            .iter()
            .position(|h| h.index == index)
            .ok_or(MultiplayerError::UnknownLeader(index))
    }

    fn check_len(&self, bids: &[Bid]) {
        assert_eq!(bids.len(), self.leaders.len(), "one bid per leader");
    }

    pub fn equilibrium_bids(&self) -> Vec<Bid> {
        self.leaders.iter().map(|h| leader_bid_star(self.v0, h.value)).collect()
    }

    /// Leader bids aligned with [`Self::leaders`], from a map keyed by index.
    pub fn bids_from_map(&self, bids: &BTreeMap<usize, Bid>) -> Result<Vec<Bid>, MultiplayerError> {
        if let Some(&extra) = bids.keys().find(|i| self.position(**i).is_err()) {
            return Err(MultiplayerError::UnknownLeader(extra));
        }
        if bids.len() != self.leaders.len() {
            return Err(MultiplayerError::IncompleteProfile {
                expected: self.leaders.len(),
                got: bids.len(),
            });
        }
        Ok(self.leaders.iter().map(|h| bids[&h.index]).collect())
    }

    fn bid_map(&self, bids: &[Bid]) -> BTreeMap<usize, Bid> {
        self.leaders.iter().map(|h| h.index).zip(bids.iter().copied()).collect()
    }

    /// Follower's total utility over all deals.
    pub fn follower_utility(&self, p0: Bid, bids: &[Bid]) -> HalfUnits {
        self.check_len(bids);
        self.leaders
            .iter()
            .zip(bids)
            .map(|(h, &pi)| pairwise_outcome(h.units, self.v0, h.value, p0, pi).u_follower)
            .sum()
    }

    /// Follower's utility from the deals with the given leader positions only.
    pub fn follower_utility_from(&self, p0: Bid, bids: &[Bid], positions: &[usize]) -> HalfUnits {
        positions
            .iter()
            .map(|&k| pairwise_outcome(self.leaders[k].units, self.v0, self.leaders[k].value, p0, bids[k]).u_follower)
            .sum()
    }

    pub fn leader_utility(&self, position: usize, p0: Bid, bids: &[Bid]) -> HalfUnits {
        let h = &self.leaders[position];
        pairwise_outcome(h.units, self.v0, h.value, p0, bids[position]).u_leader
    }

    /// Smallest follower bid maximizing its total utility.
    ///
    /// Each deal's follower payoff rises with `p0` up to `pi - 1`, jumps at
    /// `pi` and falls after, so the total is piecewise linear with kinks
    /// only at `{pi - 1, pi}`. Every maximal run of tied optima starts at
    /// one of those points, which makes the candidate scan exact.
    pub fn follower_best_response(&self, bids: &[Bid]) -> Bid {
        self.check_len(bids);
        let mut candidates: BTreeSet<Bid> = BTreeSet::from([Bid(0)]);
        for &p in bids {
            candidates.insert(p);
            if p.get() > 0 {
                candidates.insert(Bid(p.get() - 1));
            }
        }
        let mut best: Option<(Bid, HalfUnits)> = None;
        for p0 in candidates {
            let u = self.follower_utility(p0, bids);
            if best.is_none_or(|(_, top)| u > top) {
                best = Some((p0, u));
            }
        }
        best.expect("candidates are never empty").0
    }

    pub fn evaluate(&self, p0: Bid, bids: &[Bid]) -> ProfileOutcome {
        self.check_len(bids);
        let leader_utilities = (0..self.leaders.len())
            .map(|k| (self.leaders[k].index, self.leader_utility(k, p0, bids)))
            .collect();
        ProfileOutcome {
            profile: BidProfile {
                p0,
                leader_bids: self.bid_map(bids),
            },
            u0: self.follower_utility(p0, bids),
            leader_utilities,
        }
    }

    /// The equilibrium profile: leaders bid [`leader_bid_star`], the follower bids its value.
    pub fn solve(&self) -> ProfileOutcome {
        self.evaluate(self.v0.as_bid(), &self.equilibrium_bids())
    }

    /// Total utility of the coalition members (positions) after the
    /// follower best-responds to `bids`. Returns the response too.
    pub fn coalition_utility(&self, bids: &[Bid], coalition: &[usize]) -> (Bid, HalfUnits) {
        let p0 = self.follower_best_response(bids);
        let total = coalition.iter().map(|&k| self.leader_utility(k, p0, bids)).sum();
        (p0, total)
    }

    /// Compare the deviators' total utility against equilibrium play.
    ///
    /// Entries equal to the equilibrium bid are not part of the coalition;
    /// leaders missing from `deviation` keep their equilibrium bid.
    pub fn check_collusion_resistance(
        &self,
        deviation: &BTreeMap<usize, Bid>,
    ) -> Result<CollusionWitness, MultiplayerError> {
        let star = self.equilibrium_bids();
        let mut bids = star.clone();
        let mut members = Vec::new();
        for (&index, &bid) in deviation {
            let k = self.position(index)?;
            if bid != star[k] {
                bids[k] = bid;
                members.push(k);
            }
        }
        if members.is_empty() {
            return Err(MultiplayerError::EmptyCoalition);
        }
        let equilibrium_utility = members
            .iter()
            .map(|&k| self.leader_utility(k, self.v0.as_bid(), &star))
            .sum();
        let (follower_response, deviated_utility) = self.coalition_utility(&bids, &members);
        Ok(CollusionWitness {
            coalition: members.iter().map(|&k| self.leaders[k].index).collect(),
            deviated_bids: members.iter().map(|&k| (self.leaders[k].index, bids[k])).collect(),
            follower_response,
            deviated_utility,
            equilibrium_utility,
            resisted: deviated_utility < equilibrium_utility,
        })
    }

    /// Upper bound on the coalition's joint surplus with the follower,
    /// charging the failed-trade discount once per member rather than per unit.
    pub fn coalition_bound(&self, coalition: &[usize]) -> HalfUnits {
        coalition
            .iter()
            .map(|&k| {
                let h = &self.leaders[k];
                let (p0, pi) = if h.value <= self.v0 {
                    (self.v0.as_bid(), self.v0.as_bid())
                } else {
                    (self.v0.as_bid(), self.v0.outbid())
                };
                utility_sum_flat_discount(h.units, self.v0, h.value, p0, pi)
            })
            .sum()
    }

    /// Positions of the given leader indices.
    pub fn positions(&self, indices: &BTreeSet<usize>) -> Result<Vec<usize>, MultiplayerError> {
        indices.iter().map(|&i| self.position(i)).collect()
    }
}
