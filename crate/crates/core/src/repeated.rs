//! Repeated two-player repurchase game.
//!
//! Each round the minority holder leads with a bid and the majority holder
//! answers. If the leader's bid does not exceed the answer, the majority
//! holder buys the minority block and the game ends. Otherwise the leader
//! buys an equal block from the majority holder, doubling its holding, and
//! play continues with roles possibly swapped. An odd supply rules out ties
//! in holdings.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mechanism::{pairwise_outcome, Bid, TradeDirection, Valuation};
use crate::money::HalfUnits;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Participant {
    N0,
    N1,
}

impl Participant {
    pub const BOTH: [Participant; 2] = [Participant::N0, Participant::N1];

    pub const fn index(self) -> usize {
        match self {
            Participant::N0 => 0,
            Participant::N1 => 1,
        }
    }

    pub const fn other(self) -> Participant {
        match self {
            Participant::N0 => Participant::N1,
            Participant::N1 => Participant::N0,
        }
    }
}

impl fmt::Display for Participant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Participant::N0 => "N0",
            Participant::N1 => "N1",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Leader,
    Follower,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RepeatedError {
    #[error("holdings are equal ({0} each); the supply must be odd")]
    EqualHoldings(u64),
    #[error("total supply {0} is even")]
    EvenSupply(u64),
    #[error("holdings must both be positive, got ({0}, {1})")]
    EmptyHolding(u64, u64),
    #[error("holdings ({m0}, {m1}) do not add up to the supply {supply}")]
    SupplyMismatch { m0: u64, m1: u64, supply: u64 },
    #[error("the equilibrium strategy needs distinct values, both are {0}")]
    EqualValues(Valuation),
}

/// Which participant leads given raw holdings: the minority holder.
pub fn leader_of(m0: u64, m1: u64) -> Result<Participant, RepeatedError> {
    match m0.cmp(&m1) {
        std::cmp::Ordering::Greater => Ok(Participant::N1),
        std::cmp::Ordering::Less => Ok(Participant::N0),
        std::cmp::Ordering::Equal => Err(RepeatedError::EqualHoldings(m0)),
    }
}

/// Non-terminal holdings; both positive with an odd total.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "[u64; 2]", into = "[u64; 2]")]
pub struct RepeatedState {
    m0: u64,
    m1: u64,
}

impl RepeatedState {
    pub fn new(m0: u64, m1: u64) -> Result<Self, RepeatedError> {
        if m0 == 0 || m1 == 0 {
            return Err(RepeatedError::EmptyHolding(m0, m1));
        }
        if (m0 + m1).is_multiple_of(2) {
            return Err(RepeatedError::EvenSupply(m0 + m1));
        }
        Ok(RepeatedState { m0, m1 })
    }

    pub const fn m0(self) -> u64 {
        self.m0
    }

    pub const fn m1(self) -> u64 {
        self.m1
    }

    pub const fn supply(self) -> u64 {
        self.m0 + self.m1
    }

    pub const fn holding(self, who: Participant) -> u64 {
        match who {
            Participant::N0 => self.m0,
            Participant::N1 => self.m1,
        }
    }

    pub fn leader(self) -> Participant {
        leader_of(self.m0, self.m1).expect("odd supply never ties")
    }

    pub fn follower(self) -> Participant {
        self.leader().other()
    }

    pub fn role_of(self, who: Participant) -> Role {
        if who == self.leader() {
            Role::Leader
        } else {
            Role::Follower
        }
    }
}

impl TryFrom<[u64; 2]> for RepeatedState {
    type Error = RepeatedError;
    fn try_from([m0, m1]: [u64; 2]) -> Result<Self, RepeatedError> {
        RepeatedState::new(m0, m1)
    }
}

impl From<RepeatedState> for [u64; 2] {
    fn from(s: RepeatedState) -> [u64; 2] {
        [s.m0, s.m1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Terminal {
    /// N0 holds everything.
    Z0,
    /// N1 holds everything.
    Z1,
    /// The round cap was hit before either holding reached zero.
    Truncated,
}

impl Terminal {
    pub fn winner(self) -> Option<Participant> {
        match self {
            Terminal::Z0 => Some(Participant::N0),
            Terminal::Z1 => Some(Participant::N1),
            Terminal::Truncated => None,
        }
    }

    fn won_by(who: Participant) -> Terminal {
        match who {
            Participant::N0 => Terminal::Z0,
            Participant::N1 => Terminal::Z1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: u32,
    pub before: [u64; 2],
    pub after: [u64; 2],
    pub leader: Participant,
    pub p0: Bid,
    pub p1: Bid,
    pub buyer: Participant,
    pub units_moved: u64,
    pub unit_price: HalfUnits,
    pub u0: HalfUnits,
    pub u1: HalfUnits,
}

impl RoundRecord {
    /// Whether the leader bought, i.e. the round did not end the game.
    pub fn leader_bought(&self) -> bool {
        self.buyer == self.leader
    }

    pub fn welfare(&self) -> HalfUnits {
        self.u0 + self.u1
    }

    pub fn utility(&self, who: Participant) -> HalfUnits {
        match who {
            Participant::N0 => self.u0,
            Participant::N1 => self.u1,
        }
    }
}

/// Where play stands after a round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Next {
    Continue(RepeatedState),
    Ended(Terminal),
}

/// Play one round from `state` with the given leader and follower bids.
pub fn play_round(
    state: RepeatedState,
    values: [Valuation; 2],
    p_leader: Bid,
    p_follower: Bid,
    round: u32,
) -> (Next, RoundRecord) {
    let leader = state.leader();
    let follower = leader.other();
    let block = state.holding(leader);
    let deal = pairwise_outcome(
        block,
        values[follower.index()],
        values[leader.index()],
        p_follower,
        p_leader,
    );
    let mut holdings = [state.m0, state.m1];
    let (buyer, next) = match deal.direction {
        TradeDirection::FollowerBuys => {
            holdings[follower.index()] = state.supply();
            holdings[leader.index()] = 0;
            (follower, Next::Ended(Terminal::won_by(follower)))
        }
        TradeDirection::LeaderBuys => {
            holdings[follower.index()] -= block;
            holdings[leader.index()] += block;
            let next = RepeatedState::new(holdings[0], holdings[1]).expect("doubling keeps both positive");
            (leader, Next::Continue(next))
        }
    };
    let mut utilities = [HalfUnits::ZERO; 2];
    utilities[follower.index()] = deal.u_follower;
    utilities[leader.index()] = deal.u_leader;
    let mut bids = [Bid(0); 2];
    bids[follower.index()] = p_follower;
    bids[leader.index()] = p_leader;
    let record = RoundRecord {
        round,
        before: [state.m0, state.m1],
        after: holdings,
        leader,
        p0: bids[0],
        p1: bids[1],
        buyer,
        units_moved: block,
        unit_price: deal.unit_price,
        u0: utilities[0],
        u1: utilities[1],
    };
    (next, record)
}

/// A pure bidding rule. Followers see the leader's bid.
pub trait Strategy: Send + Sync {
    fn bid(&self, role: Role, state: &RepeatedState, leader_bid: Option<Bid>) -> Bid;
}

impl<F> Strategy for F
where
    F: Fn(Role, &RepeatedState, Option<Bid>) -> Bid + Send + Sync,
{
    fn bid(&self, role: Role, state: &RepeatedState, leader_bid: Option<Bid>) -> Bid {
        self(role, state, leader_bid)
    }
}

/// Always bid the same amount.
#[derive(Debug, Clone, Copy)]
pub struct ConstantBid(pub Bid);

impl Strategy for ConstantBid {
    fn bid(&self, _: Role, _: &RepeatedState, _: Option<Bid>) -> Bid {
        self.0
    }
}

/// Always bid one's own value.
#[derive(Debug, Clone, Copy)]
pub struct Truthful(pub Valuation);

impl Strategy for Truthful {
    fn bid(&self, _: Role, _: &RepeatedState, _: Option<Bid>) -> Bid {
        self.0.as_bid()
    }
}

/// Bid from a table indexed by N0's holding; the role is implied by the state.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarkovTable {
    #[serde(deserialize_with = "holding_keys")]
    pub bids: BTreeMap<u64, Bid>,
    pub fallback: Bid,
}

/// JSON object keys are strings; accept them as well as integers.
fn holding_keys<'de, D: serde::Deserializer<'de>>(d: D) -> Result<BTreeMap<u64, Bid>, D::Error> {
    #[derive(Deserialize, PartialEq, Eq, PartialOrd, Ord)]
    #[serde(untagged)]
    enum Key {
        Int(u64),
        Text(String),
    }
    BTreeMap::<Key, Bid>::deserialize(d)?
        .into_iter()
        .map(|(k, b)| match k {
            Key::Int(n) => Ok((n, b)),
            Key::Text(s) => s
                .parse()
                .map(|n| (n, b))
                .map_err(|_| serde::de::Error::custom(format!("holding `{s}` is not an integer"))),
        })
        .collect()
}

impl Strategy for MarkovTable {
    fn bid(&self, _: Role, state: &RepeatedState, _: Option<Bid>) -> Bid {
        self.bids.get(&state.m0()).copied().unwrap_or(self.fallback)
    }
}

/// The equilibrium rule when values differ.
///
/// The lower-value player always bids its value. The higher-value player
/// outbids that by one when leading; when following it matches any leader
/// bid up to the lower value and undercuts higher bids by one.
pub fn equilibrium_bid(
    values: [Valuation; 2],
    me: Participant,
    state: &RepeatedState,
    leader_bid: Option<Bid>,
) -> Result<Bid, RepeatedError> {
    let strong = stronger(values)?;
    let weak_value = values[strong.other().index()];
    if me != strong {
        return Ok(weak_value.as_bid());
    }
    Ok(match (state.role_of(me), leader_bid) {
        (Role::Leader, _) | (Role::Follower, None) => weak_value.outbid(),
        (Role::Follower, Some(p)) if p <= weak_value.as_bid() => p,
        (Role::Follower, Some(p)) => Bid(p.get() - 1),
    })
}

fn stronger(values: [Valuation; 2]) -> Result<Participant, RepeatedError> {
    match values[0].cmp(&values[1]) {
        std::cmp::Ordering::Greater => Ok(Participant::N0),
        std::cmp::Ordering::Less => Ok(Participant::N1),
        std::cmp::Ordering::Equal => Err(RepeatedError::EqualValues(values[0])),
    }
}

/// [`equilibrium_bid`] packaged as a [`Strategy`] for one participant.
#[derive(Debug, Clone, Copy)]
pub struct EquilibriumStrategy {
    me: Participant,
    values: [Valuation; 2],
}

impl EquilibriumStrategy {
    pub fn new(me: Participant, values: [Valuation; 2]) -> Result<Self, RepeatedError> {
        stronger(values)?;
        Ok(EquilibriumStrategy { me, values })
    }

    /// Strategies for both players.
    pub fn pair(values: [Valuation; 2]) -> Result<[Self; 2], RepeatedError> {
        Ok([
            EquilibriumStrategy::new(Participant::N0, values)?,
            EquilibriumStrategy::new(Participant::N1, values)?,
        ])
    }
}

impl Strategy for EquilibriumStrategy {
    fn bid(&self, _: Role, state: &RepeatedState, leader_bid: Option<Bid>) -> Bid {
        equilibrium_bid(self.values, self.me, state, leader_bid).expect("values checked at construction")
    }
}

/// Game parameters: values, odd supply and opening holdings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepeatedGame {
    pub values: [Valuation; 2],
    pub initial: RepeatedState,
}

impl RepeatedGame {
    pub fn new(values: [Valuation; 2], supply: u64, initial: [u64; 2]) -> Result<Self, RepeatedError> {
        if supply.is_multiple_of(2) {
            return Err(RepeatedError::EvenSupply(supply));
        }
        if initial[0] + initial[1] != supply {
            return Err(RepeatedError::SupplyMismatch {
                m0: initial[0],
                m1: initial[1],
                supply,
            });
        }
        Ok(RepeatedGame {
            values,
            initial: RepeatedState::new(initial[0], initial[1])?,
        })
    }

    pub fn supply(&self) -> u64 {
        self.initial.supply()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameTrace {
    pub initial: [u64; 2],
    pub rounds: Vec<RoundRecord>,
    pub terminal: Terminal,
    pub final_holdings: [u64; 2],
    pub total_u0: HalfUnits,
    pub total_u1: HalfUnits,
}

impl GameTrace {
    pub fn total(&self, who: Participant) -> HalfUnits {
        match who {
            Participant::N0 => self.total_u0,
            Participant::N1 => self.total_u1,
        }
    }
}

/// Round cap used when none is given: `4 * ceil(log2 M) + 4`.
pub fn default_max_rounds(supply: u64) -> u32 {
    let log = if supply <= 1 {
        0
    } else {
        u64::BITS - (supply - 1).leading_zeros()
    };
    4 * log + 4
}

/// Run the game until a terminal state or `max_rounds` rounds.
pub fn simulate(game: &RepeatedGame, strategies: [&dyn Strategy; 2], max_rounds: u32) -> GameTrace {
    let mut state = game.initial;
    let mut rounds = Vec::new();
    let mut terminal = Terminal::Truncated;
    let mut holdings = [state.m0, state.m1];
    for round in 1..=max_rounds {
        let leader = state.leader();
        let p_leader = strategies[leader.index()].bid(Role::Leader, &state, None);
        let p_follower = strategies[leader.other().index()].bid(Role::Follower, &state, Some(p_leader));
        let (next, record) = play_round(state, game.values, p_leader, p_follower, round);
        holdings = record.after;
        rounds.push(record);
        match next {
            Next::Continue(s) => state = s,
            Next::Ended(t) => {
                terminal = t;
                break;
            }
        }
    }
    let total_u0 = rounds.iter().map(|r| r.u0).sum();
    let total_u1 = rounds.iter().map(|r| r.u1).sum();
    GameTrace {
        initial: [game.initial.m0, game.initial.m1],
        rounds,
        terminal,
        final_holdings: holdings,
        total_u0,
        total_u1,
    }
}

/// Upper bound on joint utility for a leader-buys round:
/// `(m0' - m0)(v0 - v1) - 1/2`.
pub fn round_welfare_bound(record: &RoundRecord, values: [Valuation; 2]) -> HalfUnits {
    let delta = record.after[0] as i64 - record.before[0] as i64;
    let gap = i64::from(values[0].get()) - i64::from(values[1].get());
    HalfUnits::from_units(delta * gap) - HalfUnits::HALF
}

/// Bound `M |v0 - v1| - T/2` on joint utility after `T` rounds that never end the game.
pub fn divergence_bound(supply: u64, values: [Valuation; 2], rounds: u32) -> HalfUnits {
    let gap = values[0].get().abs_diff(values[1].get());
    HalfUnits::from_units(supply as i64 * i64::from(gap)) - HalfUnits::HALF * i64::from(rounds)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: u32) -> Valuation {
        Valuation::new(x).unwrap()
    }

    fn st(m0: u64, m1: u64) -> RepeatedState {
        RepeatedState::new(m0, m1).unwrap()
    }

    #[test]
    fn minority_holder_leads() {
        assert_eq!(leader_of(2, 1), Ok(Participant::N1));
        assert_eq!(leader_of(1, 2), Ok(Participant::N0));
        assert_eq!(leader_of(3, 3), Err(RepeatedError::EqualHoldings(3)));
    }

    #[test]
    fn state_validation() {
        assert_eq!(RepeatedState::new(2, 2), Err(RepeatedError::EvenSupply(4)));
        assert_eq!(RepeatedState::new(0, 3), Err(RepeatedError::EmptyHolding(0, 3)));
        assert_eq!(
            RepeatedGame::new([v(1), v(2)], 5, [2, 1]),
            Err(RepeatedError::SupplyMismatch {
                m0: 2,
                m1: 1,
                supply: 5
            })
        );
        assert_eq!(
            RepeatedGame::new([v(1), v(2)], 4, [2, 2]),
            Err(RepeatedError::EvenSupply(4))
        );
    }

    #[test]
    fn leader_buys_round() {
        let (next, rec) = play_round(st(2, 1), [v(2), v(5)], Bid(3), Bid(2), 1);
        assert_eq!(next, Next::Continue(st(1, 2)));
        assert_eq!(rec.leader, Participant::N1);
        assert_eq!(rec.buyer, Participant::N1);
        assert_eq!((rec.p0, rec.p1), (Bid(2), Bid(3)));
        assert_eq!(rec.units_moved, 1);
        assert_eq!(rec.unit_price, HalfUnits::from_halves(5));
        assert_eq!((rec.u0, rec.u1), (HalfUnits::ZERO, HalfUnits::from_halves(5)));
    }

    #[test]
    fn follower_buys_round_ends_game() {
        let (next, rec) = play_round(st(1, 2), [v(2), v(5)], Bid(2), Bid(2), 2);
        assert_eq!(next, Next::Ended(Terminal::Z1));
        assert_eq!(rec.after, [0, 3]);
        assert_eq!((rec.u0, rec.u1), (HalfUnits::ZERO, HalfUnits::from_units(3)));
    }

    #[test]
    fn equilibrium_rule() {
        let vals = [v(2), v(5)];
        let s = st(2, 1);
        assert_eq!(equilibrium_bid(vals, Participant::N1, &s, None), Ok(Bid(3)));
        assert_eq!(equilibrium_bid(vals, Participant::N0, &s, Some(Bid(3))), Ok(Bid(2)));
        let s = st(1, 2);
        assert_eq!(equilibrium_bid(vals, Participant::N0, &s, None), Ok(Bid(2)));
        assert_eq!(equilibrium_bid(vals, Participant::N1, &s, Some(Bid(2))), Ok(Bid(2)));
        assert_eq!(equilibrium_bid(vals, Participant::N1, &s, Some(Bid(7))), Ok(Bid(6)));
        assert_eq!(
            equilibrium_bid([v(3), v(3)], Participant::N0, &s, None),
            Err(RepeatedError::EqualValues(v(3)))
        );
    }

    #[test]
    fn equilibrium_play_examples() {
        let game = RepeatedGame::new([v(2), v(5)], 3, [2, 1]).unwrap();
        let [a, b] = EquilibriumStrategy::pair(game.values).unwrap();
        let trace = simulate(&game, [&a, &b], default_max_rounds(3));
        assert_eq!(trace.rounds.len(), 2);
        assert_eq!(trace.terminal, Terminal::Z1);
        assert_eq!(trace.total_u0, HalfUnits::ZERO);
        assert_eq!(trace.total_u1, HalfUnits::from_halves(11));

        let game = RepeatedGame::new([v(5), v(2)], 3, [2, 1]).unwrap();
        let [a, b] = EquilibriumStrategy::pair(game.values).unwrap();
        let trace = simulate(&game, [&a, &b], default_max_rounds(3));
        assert_eq!(trace.terminal, Terminal::Z0);
        assert_eq!(trace.final_holdings, [3, 0]);
    }

    #[test]
    fn zero_bids_end_immediately() {
        let game = RepeatedGame::new([v(2), v(5)], 3, [2, 1]).unwrap();
        let zero = ConstantBid(Bid(0));
        let trace = simulate(&game, [&zero, &zero], 10);
        assert_eq!(trace.rounds.len(), 1);
        assert_eq!(trace.terminal, Terminal::Z0);
    }

    #[test]
    fn runaway_play_is_truncated() {
        let game = RepeatedGame::new([v(2), v(5)], 9, [5, 4]).unwrap();
        let high = ConstantBid(Bid(9));
        let low = |role: Role, _: &RepeatedState, _: Option<Bid>| match role {
            Role::Leader => Bid(9),
            Role::Follower => Bid(0),
        };
        let trace = simulate(&game, [&low, &low], 7);
        assert_eq!(trace.terminal, Terminal::Truncated);
        assert_eq!(trace.rounds.len(), 7);
        // equal constant bids: the follower buys at once
        let trace = simulate(&game, [&high, &high], 7);
        assert_eq!(trace.terminal, Terminal::Z0);
    }

    #[test]
    fn max_round_default() {
        assert_eq!(default_max_rounds(1), 4);
        assert_eq!(default_max_rounds(3), 12);
        assert_eq!(default_max_rounds(4), 12);
        assert_eq!(default_max_rounds(9), 20);
    }

    #[test]
    fn markov_table_lookup() {
        let table = MarkovTable {
            bids: BTreeMap::from([(2, Bid(4))]),
            fallback: Bid(1),
        };
        assert_eq!(table.bid(Role::Leader, &st(2, 1), None), Bid(4));
        assert_eq!(table.bid(Role::Leader, &st(1, 2), None), Bid(1));
    }

    #[test]
    fn markov_table_json() {
        #[derive(Debug, Deserialize)]
        #[serde(tag = "kind")]
        enum Wrapped {
            T { table: MarkovTable },
        }
        let table: MarkovTable = serde_json::from_str(r#"{"bids":{"2":4,"1":0},"fallback":1}"#).unwrap();
        assert_eq!(table.bids, BTreeMap::from([(1, Bid(0)), (2, Bid(4))]));
        let back: MarkovTable = serde_json::from_str(&serde_json::to_string(&table).unwrap()).unwrap();
        assert_eq!(back, table);
        let Wrapped::T { table: inner } =
            serde_json::from_str(r#"{"kind":"T","table":{"bids":{"2":4,"1":0},"fallback":1}}"#).unwrap();
        assert_eq!(inner, table);
        assert!(serde_json::from_str::<MarkovTable>(r#"{"bids":{"x":4},"fallback":1}"#).is_err());
    }
}
