//! One runner per scenario kind. Each returns a serializable result and
//! whether any checked property was falsified.

use std::collections::BTreeMap;

use absnft_core::bayes::{bayesian_se, candidate_bids, expected_leader_utility, optimal_bayesian_leader_bid};
use absnft_core::multiplayer::{CollusionWitness, MultiplayerGame, ProfileOutcome};
use absnft_core::oracle::{
    bounded_deviation_search, brute_best_response, multiplayer_payoffs, two_player_payoffs, verify_nash,
    verify_stackelberg, BidBound, DeviationWitness, NashWitness, StackelbergWitness, Verdict, MAX_SEARCH_BOUND,
};
use absnft_core::repeated::{
    default_max_rounds, round_welfare_bound, simulate, GameTrace, Participant, RepeatedGame, Strategy,
};
use absnft_core::settlement::{
    resolve_bid, settle, BidSource, SettlementInstance, SettlementLeader, SettlementReport, Step2Choice,
};
use absnft_core::two_player::{best_response_follower, optimal_leader_bid, solve_se};
use absnft_core::{Bid, EquilibriumProfile2P, HalfUnits, Valuation};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;

use crate::config::{
    validation, BayesConfig, MultiConfig, RepeatedConfig, SettleConfig, Solve2pConfig, StrategyConfig, VerifyConfig,
};
use crate::random;
use crate::report::Exact;
use crate::{CliError, Options};

/// A runner's result and whether it falsified anything.
pub struct Run {
    pub result: Value,
    pub falsified: bool,
}

fn to_value(x: impl Serialize) -> Value {
    serde_json::to_value(x).expect("report types serialize")
}

fn v(x: u32) -> Valuation {
    Valuation::new(x).expect("grid values start at 1")
}

fn check_units(m: u64) -> Result<(), CliError> {
    if m == 0 {
        Err(CliError::Validation("unit counts must be at least 1".into()))
    } else {
        Ok(())
    }
}

#[derive(Debug, Serialize)]
struct TwoPlayerCheck {
    profile: EquilibriumProfile2P,
    bound: BidBound,
    stackelberg: Verdict<StackelbergWitness>,
    nash: Verdict<NashWitness>,
}

impl TwoPlayerCheck {
    fn holds(&self) -> bool {
        self.stackelberg.holds() && self.nash.holds() && self.profile.u0 == HalfUnits::ZERO
    }
}

fn stackelberg_2p(v0: Valuation, v1: Valuation, m1: u64, p1: Bid, bound: BidBound) -> Verdict<StackelbergWitness> {
    let pay = two_player_payoffs(m1, v0, v1);
    verify_stackelberg(
        &[p1],
        |b| best_response_follower(b[0], v0),
        |k, p0, b| pay(k, &[p0, b[0]]),
        bound,
    )
}

fn check_two_player(v0: Valuation, v1: Valuation, m1: u64, bound: Option<u32>) -> TwoPlayerCheck {
    let profile = solve_se(v0, v1, m1);
    let bound = bound.map_or_else(|| BidBound::for_values([v0, v1]), BidBound);
    TwoPlayerCheck {
        profile,
        bound,
        stackelberg: stackelberg_2p(v0, v1, m1, profile.p1, bound),
        nash: verify_nash(&[profile.p0, profile.p1], two_player_payoffs(m1, v0, v1), bound),
    }
}

pub fn solve2p(c: &Solve2pConfig, opts: &Options) -> Result<Run, CliError> {
    check_units(c.m1)?;
    let check = check_two_player(c.v0, c.v1, c.m1, opts.bound);
    Ok(Run {
        falsified: !check.holds(),
        result: to_value(check),
    })
}

#[derive(Debug, Serialize)]
struct BayesResult {
    optimal_bid: Bid,
    expected_utility: Exact,
    candidates: Vec<Bid>,
    bound: BidBound,
    oracle_argmax: Vec<Bid>,
    oracle_max: Exact,
    agrees: bool,
    play: Option<EquilibriumProfile2P>,
}

pub fn bayes(c: &BayesConfig, opts: &Options) -> Result<Run, CliError> {
    check_units(c.m1)?;
    let dist = c.distribution()?;
    let bid = optimal_bayesian_leader_bid(c.v1, &dist, c.m1);
    let bound = opts.bound.map_or_else(
        || BidBound::for_values(dist.support().iter().copied().chain([c.v1])),
        BidBound,
    );
    let (argmax, max) = brute_best_response(|p| expected_leader_utility(p, c.v1, &dist, c.m1), bound);
    let candidates: Vec<Bid> = candidate_bids(&dist).into_iter().collect();
    let agrees = argmax.first() == Some(&bid) && candidates.contains(&bid);
    let result = BayesResult {
        optimal_bid: bid,
        expected_utility: Exact(expected_leader_utility(bid, c.v1, &dist, c.m1)),
        candidates,
        bound,
        oracle_argmax: argmax,
        oracle_max: Exact(max),
        agrees,
        play: c.actual_v0.map(|a| bayesian_se(a, c.v1, &dist, c.m1)),
    };
    Ok(Run {
        falsified: !agrees,
        result: to_value(result),
    })
}

#[derive(Debug, Serialize)]
struct EquilibriumChecks {
    expected_winner: Participant,
    winner_ok: bool,
    loser_utility_zero: bool,
    welfare_bound_ok: bool,
}

#[derive(Debug, Serialize)]
struct RepeatedResult {
    trace: GameTrace,
    checks: Option<EquilibriumChecks>,
}

fn equilibrium_checks(game: &RepeatedGame, trace: &GameTrace) -> EquilibriumChecks {
    let winner = if game.values[0] > game.values[1] {
        Participant::N0
    } else {
        Participant::N1
    };
    EquilibriumChecks {
        expected_winner: winner,
        winner_ok: trace.terminal.winner() == Some(winner),
        loser_utility_zero: trace.total(winner.other()) == HalfUnits::ZERO,
        welfare_bound_ok: trace
            .rounds
            .iter()
            .filter(|r| r.leader_bought())
            .all(|r| r.welfare() <= round_welfare_bound(r, game.values)),
    }
}

fn build_strategies(cfg: &[StrategyConfig; 2], values: [Valuation; 2]) -> Result<[Box<dyn Strategy>; 2], CliError> {
    Ok([
        cfg[0].build(Participant::N0, values)?,
        cfg[1].build(Participant::N1, values)?,
    ])
}

pub fn repeated(c: &RepeatedConfig, _: &Options) -> Result<Run, CliError> {
    let game = RepeatedGame::new([c.v0, c.v1], c.supply, c.split()).map_err(validation)?;
    let [s0, s1] = build_strategies(&c.strategies, game.values)?;
    let trace = simulate(
        &game,
        [&*s0, &*s1],
        c.max_rounds.unwrap_or_else(|| default_max_rounds(c.supply)),
    );
    let both_eq = c.strategies.iter().all(|s| *s == StrategyConfig::Equilibrium);
    let checks = both_eq.then(|| equilibrium_checks(&game, &trace));
    let falsified = checks
        .as_ref()
        .is_some_and(|k| !(k.winner_ok && k.loser_utility_zero && k.welfare_bound_ok));
    Ok(Run {
        falsified,
        result: to_value(RepeatedResult { trace, checks }),
    })
}

#[derive(Debug, Serialize)]
struct MultiResult {
    equilibrium: ProfileOutcome,
    follower_response_is_value: bool,
    bound: BidBound,
    stackelberg: Verdict<StackelbergWitness>,
    coalition_bound: HalfUnits,
    deviation: Option<CollusionWitness>,
}

fn multi_bound(game: &MultiplayerGame, bound: Option<u32>) -> BidBound {
    bound.map_or_else(
        || BidBound::for_values(game.leaders.iter().map(|h| h.value).chain([game.v0])),
        BidBound,
    )
}

fn multi_verdict(game: &MultiplayerGame, bids: &[Bid], bound: BidBound) -> Verdict<StackelbergWitness> {
    verify_stackelberg(
        bids,
        |b| game.follower_best_response(b),
        multiplayer_payoffs(game),
        bound,
    )
}

pub fn multi(c: &MultiConfig, opts: &Options) -> Result<Run, CliError> {
    let game = MultiplayerGame::new(c.v0, c.m0, c.leaders.clone()).map_err(validation)?;
    let equilibrium = game.solve();
    let star = game.equilibrium_bids();
    let bound = multi_bound(&game, opts.bound);
    let stackelberg = multi_verdict(&game, &star, bound);
    let everyone: Vec<usize> = (0..game.leaders.len()).collect();
    let deviation = c
        .deviation
        .as_ref()
        .map(|d| game.check_collusion_resistance(d))
        .transpose()
        .map_err(validation)?;
    let follower_response_is_value = game.follower_best_response(&star) == c.v0.as_bid();
    let falsified =
        !stackelberg.holds() || !follower_response_is_value || deviation.as_ref().is_some_and(|w| !w.resisted);
    Ok(Run {
        falsified,
        result: to_value(MultiResult {
            equilibrium,
            follower_response_is_value,
            bound,
            stackelberg,
            coalition_bound: game.coalition_bound(&everyone),
            deviation,
        }),
    })
}

#[derive(Debug, Serialize)]
struct ResolvedBid {
    bid: Bid,
    source: Option<BidSource>,
}

#[derive(Debug, Serialize)]
struct SettleResult {
    bids: BTreeMap<usize, ResolvedBid>,
    conserved: bool,
    holdings_complete: bool,
    settlement: SettlementReport,
}

/// Resolved bid per leader index, with the source when a policy decided it.
pub type ResolvedBids = BTreeMap<usize, (Bid, Option<BidSource>)>;

pub fn instance_from_config(c: &SettleConfig) -> Result<(SettlementInstance, ResolvedBids), CliError> {
    let mut bids = BTreeMap::new();
    let mut leaders = Vec::new();
    for l in &c.leaders {
        let (bid, source) = match (l.bid, &l.policy) {
            (Some(b), _) => (b, None),
            (None, Some(policy)) => {
                let (b, s) = resolve_bid(policy, l.active, c.clock);
                (b, Some(s))
            }
            (None, None) => {
                return Err(CliError::Validation(format!(
                    "N{} has neither a bid nor a bid policy",
                    l.index
                )));
            }
        };
        bids.insert(l.index, (bid, source));
        leaders.push(SettlementLeader {
            participant: absnft_core::settlement::BudgetedParticipant {
                index: l.index,
                budget: l.budget,
                bid,
                units: l.units,
            },
            choice: l.choice.unwrap_or(Step2Choice::Pay),
        });
    }
    let instance = SettlementInstance {
        p0: c.p0,
        m0: c.m0,
        follower_budget: c.follower_budget,
        leaders,
        buyers: c.buyers.clone(),
        acceptances: c.acceptances.clone(),
        option_deadline: c.option_deadline,
    };
    Ok((instance, bids))
}

pub fn settle_scenario(c: &SettleConfig, _: &Options) -> Result<Run, CliError> {
    let (instance, bids) = instance_from_config(c)?;
    let settlement = settle(&instance).map_err(validation)?;
    let conserved = settlement.is_conserved();
    let holdings_complete = settlement.supply() == instance.supply();
    Ok(Run {
        falsified: !(conserved && holdings_complete),
        result: to_value(SettleResult {
            bids: bids
                .into_iter()
                .map(|(i, (bid, source))| (i, ResolvedBid { bid, source }))
                .collect(),
            conserved,
            holdings_complete,
            settlement,
        }),
    })
}

#[derive(Debug, Serialize)]
struct VerifySummary {
    check: &'static str,
    checked: u64,
    falsified: u64,
    /// The first failing instance in enumeration order, with its witness.
    witness: Option<Value>,
}

fn summarize(check: &'static str, outcomes: Vec<Option<Value>>) -> Run {
    let checked = outcomes.len() as u64;
    let falsified = outcomes.iter().filter(|o| o.is_some()).count() as u64;
    let witness = outcomes.into_iter().flatten().next();
    Run {
        falsified: falsified > 0,
        result: to_value(VerifySummary {
            check,
            checked,
            falsified,
            witness,
        }),
    }
}

fn value_grid(n: u32) -> Vec<(u32, u32)> {
    (1..=n).flat_map(|a| (1..=n).map(move |b| (a, b))).collect()
}

fn deviation_bound(values: [Valuation; 2], bound: Option<u32>) -> Result<BidBound, CliError> {
    let b = bound.map_or_else(
        || BidBound::for_values(values).min(BidBound(MAX_SEARCH_BOUND)),
        BidBound,
    );
    Ok(b)
}

fn deviation_instance(
    values: [Valuation; 2],
    supply: u64,
    split: [u64; 2],
    horizon: u32,
    baseline: &[StrategyConfig; 2],
    bound: Option<u32>,
) -> Result<Option<DeviationWitness>, CliError> {
    let game = RepeatedGame::new(values, supply, split).map_err(validation)?;
    let [s0, s1] = build_strategies(baseline, values)?;
    bounded_deviation_search(&game, [&*s0, &*s1], horizon, deviation_bound(values, bound)?).map_err(validation)
}

pub fn verify(c: &VerifyConfig, opts: &Options) -> Result<Run, CliError> {
    let bound = opts.bound;
    match (c, opts.grid) {
        (VerifyConfig::Nash2p { v0, v1, m1, p0, p1 }, None) => {
            check_units(*m1)?;
            let b = bound.map_or_else(|| BidBound::for_values([*v0, *v1]), BidBound);
            let verdict = verify_nash(&[*p0, *p1], two_player_payoffs(*m1, *v0, *v1), b);
            Ok(summarize("nash2p", vec![verdict.witness().map(to_value)]))
        }
        (VerifyConfig::Stackelberg2p { v0, v1, m1, p1 }, None) => {
            check_units(*m1)?;
            let b = bound.map_or_else(|| BidBound::for_values([*v0, *v1]), BidBound);
            let p1 = p1.unwrap_or_else(|| optimal_leader_bid(*v0, *v1));
            let verdict = stackelberg_2p(*v0, *v1, *m1, p1, b);
            Ok(summarize("stackelberg2p", vec![verdict.witness().map(to_value)]))
        }
        (VerifyConfig::Nash2p { m1, .. } | VerifyConfig::Stackelberg2p { m1, .. }, Some(n)) => {
            check_units(*m1)?;
            let name = if matches!(c, VerifyConfig::Nash2p { .. }) {
                "nash2p"
            } else {
                "stackelberg2p"
            };
            let outcomes = value_grid(n)
                .into_par_iter()
                .map(|(a, b)| {
                    let check = check_two_player(v(a), v(b), *m1, bound);
                    (!check.holds()).then(|| to_value(&check))
                })
                .collect();
            Ok(summarize(name, outcomes))
        }
        (
            VerifyConfig::Multi {
                v0,
                m0,
                leaders,
                leader_bids,
            },
            None,
        ) => {
            let game = MultiplayerGame::new(*v0, *m0, leaders.clone()).map_err(validation)?;
            let bids = match leader_bids {
                Some(map) => game.bids_from_map(map).map_err(validation)?,
                None => game.equilibrium_bids(),
            };
            let verdict = multi_verdict(&game, &bids, multi_bound(&game, bound));
            Ok(summarize("multi", vec![verdict.witness().map(to_value)]))
        }
        (VerifyConfig::Multi { .. }, Some(n)) => {
            let mut rng = random::rng(opts.seed);
            let games: Vec<MultiplayerGame> = (0..n).map(|_| random::multiplayer_game(&mut rng, 3, 4, 6)).collect();
            let outcomes = games
                .par_iter()
                .map(|g| {
                    let star = g.equilibrium_bids();
                    let verdict = multi_verdict(g, &star, multi_bound(g, bound));
                    let br_ok = g.follower_best_response(&star) == g.v0.as_bid();
                    (!verdict.holds() || !br_ok).then(
                        || serde_json::json!({ "game": g, "follower_response_is_value": br_ok, "verdict": verdict }),
                    )
                })
                .collect();
            Ok(summarize("multi", outcomes))
        }
        (
            VerifyConfig::Deviation {
                v0,
                v1,
                supply,
                m0,
                horizon,
                baseline,
            },
            None,
        ) => {
            let split = RepeatedConfig {
                v0: *v0,
                v1: *v1,
                supply: *supply,
                m0: *m0,
                max_rounds: None,
                strategies: baseline.clone(),
            }
            .split();
            let found = deviation_instance([*v0, *v1], *supply, split, *horizon, baseline, bound)?;
            Ok(summarize("deviation", vec![found.map(to_value)]))
        }
        (
            VerifyConfig::Deviation {
                supply,
                horizon,
                baseline,
                ..
            },
            Some(n),
        ) => {
            let cases: Vec<(u32, u32, u64)> = value_grid(n)
                .into_iter()
                .filter(|(a, b)| a != b)
                .flat_map(|(a, b)| (1..*supply).map(move |m0| (a, b, m0)))
                .collect();
            let outcomes = cases
                .into_par_iter()
                .map(|(a, b, m0)| {
                    deviation_instance([v(a), v(b)], *supply, [m0, supply - m0], *horizon, baseline, bound)
                        .map(|found| found.map(to_value))
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok(summarize("deviation", outcomes))
        }
    }
}

pub fn check_two_player_row(v0: u32, v1: u32, m1: u64, bound: Option<u32>) -> crate::sweep::Solve2pRow {
    let check = check_two_player(v(v0), v(v1), m1, bound);
    crate::sweep::Solve2pRow {
        v0,
        v1,
        m1,
        p0: check.profile.p0.get(),
        p1: check.profile.p1.get(),
        u0: crate::report::money_text(check.profile.u0),
        u1: crate::report::money_text(check.profile.u1),
        stackelberg_verified: check.stackelberg.holds(),
        nash_verified: check.nash.holds(),
    }
}
