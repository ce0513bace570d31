//! Exhaustive checks that do not rely on any closed form.
//!
//! Every search scans bids in ascending order and reports the first
//! counterexample it meets, so witnesses are deterministic and
//! lexicographically smallest.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mechanism::{pairwise_outcome, Bid, Valuation};
use crate::money::HalfUnits;
use crate::multiplayer::MultiplayerGame;
use crate::repeated::{
    play_round, simulate, GameTrace, MarkovTable, Next, Participant, RepeatedGame, RepeatedState, Role, Strategy,
};

/// Inclusive upper limit for bid scans.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BidBound(pub u32);

impl BidBound {
    /// Two above the largest value, enough to see every kink of the payoffs.
    pub fn for_values(values: impl IntoIterator<Item = Valuation>) -> Self {
        BidBound(values.into_iter().map(Valuation::get).max().unwrap_or(0) + 2)
    }

    pub fn bids(self) -> impl Iterator<Item = Bid> {
        (0..=self.0).map(Bid)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "verdict", content = "witness")]
pub enum Verdict<W> {
    Verified,
    Falsified(W),
}

impl<W> Verdict<W> {
    pub fn holds(&self) -> bool {
        matches!(self, Verdict::Verified)
    }

    pub fn witness(&self) -> Option<&W> {
        match self {
            Verdict::Verified => None,
            Verdict::Falsified(w) => Some(w),
        }
    }
}

/// Every bid in `[0, B]` attaining the maximum, ascending, and the maximum.
pub fn brute_best_response<U: Ord + Clone>(utility: impl Fn(Bid) -> U, bound: BidBound) -> (Vec<Bid>, U) {
    let scored: Vec<(Bid, U)> = bound.bids().map(|b| (b, utility(b))).collect();
    let max = scored
        .iter()
        .map(|(_, u)| u)
        .max()
        .expect("bid range is never empty")
        .clone();
    let argmax = scored.into_iter().filter(|(_, u)| *u == max).map(|(b, _)| b).collect();
    (argmax, max)
}

/// Smallest maximizer.
pub fn brute_best_bid<U: Ord + Clone>(utility: impl Fn(Bid) -> U, bound: BidBound) -> Bid {
    brute_best_response(utility, bound).0[0]
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NashWitness {
    pub player: usize,
    pub profile: Vec<Bid>,
    pub deviation: Bid,
    pub utility: HalfUnits,
    pub deviated_utility: HalfUnits,
}

/// No player gains by changing only its own bid within `[0, B]`.
/// `utility(player, profile)` is player's payoff at a full profile.
pub fn verify_nash(
    profile: &[Bid],
    utility: impl Fn(usize, &[Bid]) -> HalfUnits,
    bound: BidBound,
) -> Verdict<NashWitness> {
    let mut trial = profile.to_vec();
    for player in 0..profile.len() {
        let base = utility(player, profile);
        for b in bound.bids() {
            trial[player] = b;
            let u = utility(player, &trial);
            if u > base {
                return Verdict::Falsified(NashWitness {
                    player,
                    profile: profile.to_vec(),
                    deviation: b,
                    utility: base,
                    deviated_utility: u,
                });
            }
        }
        trial[player] = profile[player];
    }
    Verdict::Verified
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum StackelbergWitness {
    /// The follower's claimed response is not a maximizer.
    FollowerNotBest {
        leader_bids: Vec<Bid>,
        response: Bid,
        utility: HalfUnits,
        better: Bid,
        better_utility: HalfUnits,
    },
    /// A leader gains by moving its bid, with the follower re-optimizing.
    LeaderDeviation {
        leader: usize,
        leader_bids: Vec<Bid>,
        deviation: Bid,
        follower_response: Bid,
        utility: HalfUnits,
        deviated_utility: HalfUnits,
    },
}

/// Check a leader-follower profile. Player 0 is the follower and players
/// `1..=k` are the leaders, so `utility(player, p0, leader_bids)`.
///
/// After a leader deviation the follower answers with its smallest
/// brute-force best response.
pub fn verify_stackelberg(
    leader_bids: &[Bid],
    follower_br: impl Fn(&[Bid]) -> Bid,
    utility: impl Fn(usize, Bid, &[Bid]) -> HalfUnits,
    bound: BidBound,
) -> Verdict<StackelbergWitness> {
    let p0 = follower_br(leader_bids);
    let (argmax, best) = brute_best_response(|b| utility(0, b, leader_bids), bound);
    let claimed = utility(0, p0, leader_bids);
    if claimed < best {
        return Verdict::Falsified(StackelbergWitness::FollowerNotBest {
            leader_bids: leader_bids.to_vec(),
            response: p0,
            utility: claimed,
            better: argmax[0],
            better_utility: best,
        });
    }
    let mut trial = leader_bids.to_vec();
    for k in 0..leader_bids.len() {
        let base = utility(k + 1, p0, leader_bids);
        for b in bound.bids() {
            trial[k] = b;
            let response = brute_best_bid(|q| utility(0, q, &trial), bound);
            let u = utility(k + 1, response, &trial);
            if u > base {
                return Verdict::Falsified(StackelbergWitness::LeaderDeviation {
                    leader: k + 1,
                    leader_bids: leader_bids.to_vec(),
                    deviation: b,
                    follower_response: response,
                    utility: base,
                    deviated_utility: u,
                });
            }
        }
        trial[k] = leader_bids[k];
    }
    Verdict::Verified
}

/// Payoffs of the single-leader game as `utility(player, profile)` over `[p0, p1]`.
pub fn two_player_payoffs(units: u64, v0: Valuation, v1: Valuation) -> impl Fn(usize, &[Bid]) -> HalfUnits {
    move |player, profile| {
        let o = pairwise_outcome(units, v0, v1, profile[0], profile[1]);
        if player == 0 {
            o.u_follower
        } else {
            o.u_leader
        }
    }
}

/// Payoffs of a multi-leader game as `utility(player, p0, leader_bids)`.
pub fn multiplayer_payoffs(game: &MultiplayerGame) -> impl Fn(usize, Bid, &[Bid]) -> HalfUnits + '_ {
    move |player, p0, bids| {
        if player == 0 {
            game.follower_utility(p0, bids)
        } else {
            game.leader_utility(player - 1, p0, bids)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("search space too large: supply {supply} (max 9), horizon {horizon} (max 12), bound {bound} (max 8)")]
    SearchSpaceTooLarge { supply: u64, horizon: u32, bound: u32 },
}

pub const MAX_SEARCH_SUPPLY: u64 = 9;
pub const MAX_SEARCH_HORIZON: u32 = 12;
pub const MAX_SEARCH_BOUND: u32 = 8;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeviationWitness {
    pub deviator: Participant,
    pub table: MarkovTable,
    pub baseline_utility: HalfUnits,
    pub deviated_utility: HalfUnits,
    pub trace: GameTrace,
}

struct Search<'a> {
    game: &'a RepeatedGame,
    opponent: &'a dyn Strategy,
    me: Participant,
    horizon: u32,
    bound: BidBound,
    baseline: HalfUnits,
    table: BTreeMap<u64, Bid>,
}

impl Search<'_> {
    fn step(&mut self, state: RepeatedState, round: u32, mine: Bid) -> (Next, HalfUnits) {
        let (p_leader, p_follower) = match state.role_of(self.me) {
            Role::Leader => (mine, self.opponent.bid(Role::Follower, &state, Some(mine))),
            Role::Follower => {
                let lead = self.opponent.bid(Role::Leader, &state, None);
                (lead, mine)
            }
        };
        let (next, record) = play_round(state, self.game.values, p_leader, p_follower, round);
        (next, record.utility(self.me))
    }

    /// Depth-first over bids for newly visited states; true once a gain is found.
    fn explore(&mut self, state: RepeatedState, round: u32, acc: HalfUnits) -> bool {
        if round > self.horizon {
            return acc > self.baseline;
        }
        let key = state.m0();
        if let Some(&mine) = self.table.get(&key) {
            return self.advance(state, round, acc, mine);
        }
        for mine in self.bound.bids() {
            self.table.insert(key, mine);
            if self.advance(state, round, acc, mine) {
                return true;
            }
        }
        self.table.remove(&key);
        false
    }

    fn advance(&mut self, state: RepeatedState, round: u32, acc: HalfUnits, mine: Bid) -> bool {
        let (next, u) = self.step(state, round, mine);
        match next {
            Next::Continue(s) => self.explore(s, round + 1, acc + u),
            Next::Ended(_) => acc + u > self.baseline,
        }
    }
}

/// Search every state-indexed pure bid table in `[0, B]` for either player
/// against the other's baseline over `horizon` rounds. `None` certifies the
/// baseline within that class.
pub fn bounded_deviation_search(
    game: &RepeatedGame,
    baseline: [&dyn Strategy; 2],
    horizon: u32,
    bound: BidBound,
) -> Result<Option<DeviationWitness>, OracleError> {
    if game.supply() > MAX_SEARCH_SUPPLY || horizon > MAX_SEARCH_HORIZON || bound.0 > MAX_SEARCH_BOUND {
        return Err(OracleError::SearchSpaceTooLarge {
            supply: game.supply(),
            horizon,
            bound: bound.0,
        });
    }
    if horizon == 0 {
        return Ok(None);
    }
    let reference = simulate(game, baseline, horizon);
    for me in Participant::BOTH {
        let mut search = Search {
            game,
            opponent: baseline[me.other().index()],
            me,
            horizon,
            bound,
            baseline: reference.total(me),
            table: BTreeMap::new(),
        };
        if search.explore(game.initial, 1, HalfUnits::ZERO) {
            let table = MarkovTable {
                bids: search.table,
                fallback: Bid(0),
            };
            let mut players = baseline;
            players[me.index()] = &table;
            let trace = simulate(game, players, horizon);
            return Ok(Some(DeviationWitness {
                deviator: me,
                baseline_utility: reference.total(me),
                deviated_utility: trace.total(me),
                table,
                trace,
            }));
        }
    }
    Ok(None)
}
