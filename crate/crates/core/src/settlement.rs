//! Budget-constrained settlement of a multi-leader repurchase, with a market
//! for repurchase options and bid resolution for holders who never bid.
//!
//! Parties are labelled `N0` (the follower), `N<i>` (leaders) and free-form
//! names for third-party option buyers. Cash is tracked as signed deltas; the
//! half unit per share that a failed repurchase shaves off the follower's
//! revenue goes to an explicit discount sink.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mechanism::Bid;
use crate::money::HalfUnits;

pub const FOLLOWER: &str = "N0";

pub fn leader_label(index: usize) -> String {
    format!("N{index}")
}

fn is_participant_label(name: &str) -> bool {
    name.strip_prefix('N')
        .is_some_and(|rest| !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()))
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SettlementError {
    #[error("{party} needs {needed} but has budget {budget}")]
    BudgetExceeded {
        party: String,
        needed: HalfUnits,
        budget: HalfUnits,
    },
    #[error("option of N{0} is not open")]
    OptionNotOpen(usize),
    #[error("buyer {buyer} needs {needed} but has {available} left")]
    BuyerBudgetExceeded {
        buyer: String,
        needed: HalfUnits,
        available: HalfUnits,
    },
    #[error("N{index} bid {bid} does not beat the follower bid {p0}")]
    NotAWinner { index: usize, bid: Bid, p0: Bid },
    #[error("follower budget {budget} cannot cover {needed} for the remaining shares")]
    FollowerBudgetShort { needed: HalfUnits, budget: HalfUnits },
    #[error("{0} has a negative budget")]
    NegativeBudget(String),
    #[error("follower holds {m0} of {supply} units, not a strict majority")]
    NotMajority { m0: u64, supply: u64 },
    #[error("N{0} listed twice")]
    DuplicateLeader(usize),
    #[error("leader indices start at 1")]
    ZeroIndex,
    #[error("N{0} holds no units")]
    ZeroUnits(usize),
    #[error("buyer name {0:?} is empty, reserved or repeated")]
    BadBuyerName(String),
    #[error("unknown buyer {0:?}")]
    UnknownBuyer(String),
    #[error("N{0} is not a leader")]
    UnknownLeader(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Step {
    FollowerBuys,
    WinnerPays,
    OptionSold,
    DiscountBuyback,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnitMove {
    pub step: Step,
    pub from: String,
    pub to: String,
    pub units: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NegativePriceWarning {
    pub index: usize,
    /// Per-unit buyback price, negative.
    pub unit_price: i64,
}

/// Cash deltas, share movements and the discount sink.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SettlementLedger {
    pub cash: BTreeMap<String, HalfUnits>,
    pub moves: Vec<UnitMove>,
    pub discount_sink: HalfUnits,
    pub warnings: Vec<NegativePriceWarning>,
}

impl SettlementLedger {
    pub fn cash_of(&self, party: &str) -> HalfUnits {
        self.cash.get(party).copied().unwrap_or_default()
    }

    fn add_cash(&mut self, party: &str, amount: HalfUnits) {
        *self.cash.entry(party.to_owned()).or_default() += amount;
    }

    fn pay(&mut self, from: &str, to: &str, amount: HalfUnits) {
        self.add_cash(from, -amount);
        self.add_cash(to, amount);
    }

    fn move_units(&mut self, step: Step, from: &str, to: &str, units: u64) {
        self.moves.push(UnitMove {
            step,
            from: from.to_owned(),
            to: to.to_owned(),
            units,
        });
    }

    pub fn absorb(&mut self, other: &SettlementLedger) {
        for (party, &amount) in &other.cash {
            self.add_cash(party, amount);
        }
        self.moves.extend(other.moves.iter().cloned());
        self.discount_sink += other.discount_sink;
        self.warnings.extend(other.warnings.iter().copied());
    }

    /// Sum of all cash deltas plus the sink; zero for a closed system.
    pub fn residual(&self) -> HalfUnits {
        self.cash.values().copied().sum::<HalfUnits>() + self.discount_sink
    }

    /// Net units received by each party.
    pub fn unit_deltas(&self) -> BTreeMap<String, i64> {
        let mut out = BTreeMap::new();
        for m in &self.moves {
            *out.entry(m.from.clone()).or_insert(0) -= m.units as i64;
            *out.entry(m.to.clone()).or_insert(0) += m.units as i64;
        }
        out
    }
}

/// A minority holder taking part in settlement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BudgetedParticipant {
    pub index: usize,
    pub budget: HalfUnits,
    pub bid: Bid,
    pub units: u64,
}

impl BudgetedParticipant {
    pub fn label(&self) -> String {
        leader_label(self.index)
    }
}

fn midpoint(p0: Bid, pi: Bid) -> HalfUnits {
    HalfUnits::from_halves(i64::from(p0.get()) + i64::from(pi.get()))
}

/// The follower buys out every leader that did not outbid it.
pub fn settle_step1(p0: Bid, participants: &[BudgetedParticipant]) -> SettlementLedger {
    let mut ledger = SettlementLedger::default();
    for n in participants.iter().filter(|n| n.bid <= p0) {
        let label = n.label();
        ledger.pay(FOLLOWER, &label, midpoint(p0, n.bid) * n.units);
        ledger.move_units(Step::FollowerBuys, &label, FOLLOWER, n.units);
    }
    ledger
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Step2Choice {
    Pay,
    /// Offer the right to buy at this extra price in whole units.
    PostOption(i64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "state", content = "buyer")]
pub enum OptionStatus {
    Open,
    Sold(usize),
    Expired,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepurchaseOption {
    pub holder: usize,
    /// Whole currency units; may be negative.
    pub price: i64,
    pub status: OptionStatus,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Step2Outcome {
    Paid(SettlementLedger),
    Posted(RepurchaseOption),
}

/// Split the failed-repurchase price into follower revenue and sink.
fn winner_flows(ledger: &mut SettlementLedger, p0: Bid, n: &BudgetedParticipant, payer: &str) {
    let revenue = (midpoint(p0, n.bid) - HalfUnits::HALF) * n.units;
    ledger.pay(payer, FOLLOWER, revenue);
    let shave = HalfUnits::HALF * n.units;
    ledger.add_cash(payer, -shave);
    ledger.discount_sink += shave;
}

/// A winning leader either pays for the follower's matching block or posts
/// an option. Paying beyond its budget is refused.
pub fn settle_step2_pay_or_option(
    p0: Bid,
    participant: &BudgetedParticipant,
    choice: Step2Choice,
) -> Result<Step2Outcome, SettlementError> {
    let n = participant;
    if n.bid <= p0 {
        return Err(SettlementError::NotAWinner {
            index: n.index,
            bid: n.bid,
            p0,
        });
    }
    match choice {
        Step2Choice::PostOption(price) => Ok(Step2Outcome::Posted(RepurchaseOption {
            holder: n.index,
            price,
            status: OptionStatus::Open,
        })),
        Step2Choice::Pay => {
            let cost = midpoint(p0, n.bid) * n.units;
            if cost > n.budget {
                return Err(SettlementError::BudgetExceeded {
                    party: n.label(),
                    needed: cost,
                    budget: n.budget,
                });
            }
            let mut ledger = SettlementLedger::default();
            winner_flows(&mut ledger, p0, n, &n.label());
            ledger.move_units(Step::WinnerPays, FOLLOWER, &n.label(), n.units);
            Ok(Step2Outcome::Paid(ledger))
        }
    }
}

/// Total a buyer pays for an option: the option price plus the winner's cost.
pub fn option_cost(p0: Bid, participant: &BudgetedParticipant, price: i64) -> HalfUnits {
    HalfUnits::from_units(price) + midpoint(p0, participant.bid) * participant.units
}

/// A third party buys an open option. `buyer_index` is recorded on the option.
pub fn settle_step3_accept_option(
    option: &mut RepurchaseOption,
    p0: Bid,
    participant: &BudgetedParticipant,
    buyer: &str,
    buyer_index: usize,
    buyer_budget: HalfUnits,
) -> Result<SettlementLedger, SettlementError> {
    if option.status != OptionStatus::Open {
        return Err(SettlementError::OptionNotOpen(option.holder));
    }
    let cost = option_cost(p0, participant, option.price);
    if cost > buyer_budget {
        return Err(SettlementError::BuyerBudgetExceeded {
            buyer: buyer.to_owned(),
            needed: cost,
            available: buyer_budget,
        });
    }
    let mut ledger = SettlementLedger::default();
    ledger.pay(buyer, &participant.label(), HalfUnits::from_units(option.price));
    winner_flows(&mut ledger, p0, participant, buyer);
    ledger.move_units(Step::OptionSold, FOLLOWER, buyer, participant.units);
    option.status = OptionStatus::Sold(buyer_index);
    Ok(ledger)
}

/// The follower buys back the shares of every winner whose option went
/// unsold, at `2 p0 - pi` per unit. Negative prices are paid as computed.
pub fn settle_step4_discount_buyback(p0: Bid, remaining: &[BudgetedParticipant]) -> SettlementLedger {
    let mut ledger = SettlementLedger::default();
    for n in remaining {
        let unit_price = 2 * i64::from(p0.get()) - i64::from(n.bid.get());
        if unit_price < 0 {
            ledger.warnings.push(NegativePriceWarning {
                index: n.index,
                unit_price,
            });
        }
        let label = n.label();
        ledger.pay(FOLLOWER, &label, HalfUnits::from_units(unit_price) * n.units);
        ledger.move_units(Step::DiscountBuyback, &label, FOLLOWER, n.units);
    }
    ledger
}

/// A bid submitted at a given tick.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimedBid {
    pub bid: Bid,
    pub tick: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Custodian {
    pub delegate: String,
    pub bid: Bid,
}

/// What to report for a holder who may not bid in time.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BidPolicy {
    pub predetermined: Bid,
    #[serde(default)]
    pub custodian: Option<Custodian>,
    pub timeout_ticks: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BidSource {
    Active,
    Custodian,
    Predetermined,
}

/// The bid reported at `clock_ticks`: an active bid counts if it was
/// submitted before both the timeout and the clock.
pub fn resolve_bid(policy: &BidPolicy, active: Option<TimedBid>, clock_ticks: u64) -> (Bid, BidSource) {
    match (active, &policy.custodian) {
        (Some(a), _) if a.tick < policy.timeout_ticks && a.tick <= clock_ticks => (a.bid, BidSource::Active),
        (_, Some(c)) => (c.bid, BidSource::Custodian),
        _ => (policy.predetermined, BidSource::Predetermined),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SettlementLeader {
    #[serde(flatten)]
    pub participant: BudgetedParticipant,
    #[serde(default = "default_choice")]
    pub choice: Step2Choice,
}

fn default_choice() -> Step2Choice {
    Step2Choice::Pay
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OptionBuyer {
    pub name: String,
    pub budget: HalfUnits,
}

/// A buyer's attempt to take an option at a tick.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Acceptance {
    pub buyer: String,
    pub holder: usize,
    pub tick: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SettlementInstance {
    pub p0: Bid,
    pub m0: u64,
    pub follower_budget: HalfUnits,
    pub leaders: Vec<SettlementLeader>,
    #[serde(default)]
    pub buyers: Vec<OptionBuyer>,
    #[serde(default)]
    pub acceptances: Vec<Acceptance>,
    /// Acceptances at or after this tick are ignored.
    pub option_deadline: u64,
}

/// An acceptance that did not go through.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectedAcceptance {
    pub acceptance: Acceptance,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SettlementReport {
    pub step1: SettlementLedger,
    pub step2: SettlementLedger,
    pub step3: SettlementLedger,
    pub step4: SettlementLedger,
    pub total: SettlementLedger,
    pub options: Vec<RepurchaseOption>,
    pub rejected: Vec<RejectedAcceptance>,
    pub final_holdings: BTreeMap<String, u64>,
}

impl SettlementReport {
    pub fn is_conserved(&self) -> bool {
        self.total.residual() == HalfUnits::ZERO
    }

    pub fn supply(&self) -> u64 {
        self.final_holdings.values().sum()
    }
}

impl SettlementInstance {
    pub fn supply(&self) -> u64 {
        self.m0 + self.leaders.iter().map(|l| l.participant.units).sum::<u64>()
    }

    pub fn validate(&self) -> Result<(), SettlementError> {
        let mut seen = std::collections::BTreeSet::new();
        for l in &self.leaders {
            let n = &l.participant;
            if n.index == 0 {
                return Err(SettlementError::ZeroIndex);
            }
            if !seen.insert(n.index) {
                return Err(SettlementError::DuplicateLeader(n.index));
            }
            if n.units == 0 {
                return Err(SettlementError::ZeroUnits(n.index));
            }
            if n.budget.is_negative() {
                return Err(SettlementError::NegativeBudget(n.label()));
            }
        }
        let supply = self.supply();
        if 2 * self.m0 <= supply {
            return Err(SettlementError::NotMajority { m0: self.m0, supply });
        }
        if self.follower_budget.is_negative() {
            return Err(SettlementError::NegativeBudget(FOLLOWER.into()));
        }
        let needed = midpoint(self.p0, self.p0) * (supply - self.m0);
        if self.follower_budget < needed {
            return Err(SettlementError::FollowerBudgetShort {
                needed,
                budget: self.follower_budget,
            });
        }
        let mut names = std::collections::BTreeSet::new();
        for b in &self.buyers {
            if b.name.is_empty() || is_participant_label(&b.name) || !names.insert(b.name.as_str()) {
                return Err(SettlementError::BadBuyerName(b.name.clone()));
            }
            if b.budget.is_negative() {
                return Err(SettlementError::NegativeBudget(b.name.clone()));
            }
        }
        for a in &self.acceptances {
            if !names.contains(a.buyer.as_str()) {
                return Err(SettlementError::UnknownBuyer(a.buyer.clone()));
            }
            if !seen.contains(&a.holder) {
                return Err(SettlementError::UnknownLeader(a.holder));
            }
        }
        Ok(())
    }
}

/// Run all four steps.
///
/// A winner that cannot pay posts an option at price 0. Acceptances before
/// the deadline are processed in (tick, buyer position) order and the first
/// affordable one for each option wins.
pub fn settle(instance: &SettlementInstance) -> Result<SettlementReport, SettlementError> {
    instance.validate()?;
    let p0 = instance.p0;
    let participants: Vec<BudgetedParticipant> = instance.leaders.iter().map(|l| l.participant).collect();

    let step1 = settle_step1(p0, &participants);

    let mut step2 = SettlementLedger::default();
    let mut options = Vec::new();
    for l in instance.leaders.iter().filter(|l| l.participant.bid > p0) {
        let outcome = match settle_step2_pay_or_option(p0, &l.participant, l.choice) {
            Err(SettlementError::BudgetExceeded { .. }) => {
                settle_step2_pay_or_option(p0, &l.participant, Step2Choice::PostOption(0))?
            }
            other => other?,
        };
        match outcome {
            Step2Outcome::Paid(ledger) => step2.absorb(&ledger),
            Step2Outcome::Posted(option) => options.push(option),
        }
    }

    let buyer_pos: BTreeMap<&str, usize> = instance
        .buyers
        .iter()
        .enumerate()
        .map(|(k, b)| (b.name.as_str(), k))
        .collect();
    let mut remaining: Vec<HalfUnits> = instance.buyers.iter().map(|b| b.budget).collect();
    let mut queue: Vec<&Acceptance> = instance
        .acceptances
        .iter()
        .filter(|a| a.tick < instance.option_deadline)
        .collect();
    queue.sort_by_key(|a| (a.tick, buyer_pos[a.buyer.as_str()]));

    let mut step3 = SettlementLedger::default();
    let mut rejected = Vec::new();
    for a in queue {
        let k = buyer_pos[a.buyer.as_str()];
        let Some(option) = options.iter_mut().find(|o| o.holder == a.holder) else {
            rejected.push(RejectedAcceptance {
                acceptance: a.clone(),
                reason: "no option posted".into(),
            });
            continue;
        };
        let holder = participants
            .iter()
            .find(|n| n.index == a.holder)
            .expect("validated holder");
        match settle_step3_accept_option(option, p0, holder, &a.buyer, k, remaining[k]) {
            Ok(ledger) => {
                remaining[k] += ledger.cash_of(&a.buyer);
                step3.absorb(&ledger);
            }
            Err(e) => rejected.push(RejectedAcceptance {
                acceptance: a.clone(),
                reason: e.to_string(),
            }),
        }
    }

    let mut unsold = Vec::new();
    for option in &mut options {
        if option.status == OptionStatus::Open {
            option.status = OptionStatus::Expired;
            unsold.push(
                *participants
                    .iter()
                    .find(|n| n.index == option.holder)
                    .expect("posted by a leader"),
            );
        }
    }
    let step4 = settle_step4_discount_buyback(p0, &unsold);

    let mut total = SettlementLedger::default();
    for s in [&step1, &step2, &step3, &step4] {
        total.absorb(s);
    }
    let follower_paid = -(step1.cash_of(FOLLOWER) + step4.cash_of(FOLLOWER));
    if follower_paid > instance.follower_budget {
        return Err(SettlementError::BudgetExceeded {
            party: FOLLOWER.into(),
            needed: follower_paid,
            budget: instance.follower_budget,
        });
    }

    let mut holdings: BTreeMap<String, i64> = BTreeMap::new();
    holdings.insert(FOLLOWER.into(), instance.m0 as i64);
    for n in &participants {
        holdings.insert(n.label(), n.units as i64);
    }
    for (party, delta) in total.unit_deltas() {
        *holdings.entry(party).or_insert(0) += delta;
    }
    let final_holdings = holdings
        .into_iter()
        .filter(|&(_, u)| u != 0)
        .map(|(p, u)| (p, u64::try_from(u).expect("no party sells more than it holds")))
        .collect();

    Ok(SettlementReport {
        step1,
        step2,
        step3,
        step4,
        total,
        options,
        rejected,
        final_holdings,
    })
}
