//! Grid and sampled sweeps, one row per instance.
//!
//! Columns per target:
//!
//! | target | columns |
//! |--------|---------|
//! | `solve2p` | `v0,v1,m1,p0,p1,u0,u1,stackelberg_verified,nash_verified` |
//! | `bayes` | `sample,support,probs,v1,closed_form_bid,oracle_bid,agrees,in_candidates,expected_utility` |
//! | `repeated` | `supply,m0,v0,v1,rounds,terminal,u0,u1,winner,winner_gain_identity` |
//! | `multi` | `sample,v0,m0,leaders,p0,leader_bids,u0,leader_utilities,follower_response_is_value,stackelberg_verified` |
//! | `settle` | `sample,p0,leaders,options_sold,options_expired,discount_sink,residual,conserved,holdings_complete,negative_price_warnings` |
//!
//! Money and probabilities are written as `n` or `n/d`.

use absnft_core::bayes::{candidate_bids, expected_leader_utility, optimal_bayesian_leader_bid};
use absnft_core::oracle::{brute_best_response, BidBound};
use absnft_core::repeated::{default_max_rounds, simulate, EquilibriumStrategy, Participant, RepeatedGame, Terminal};
use absnft_core::settlement::{settle, OptionStatus};
use absnft_core::HalfUnits;
use rayon::prelude::*;
use serde::Serialize;

use crate::commands::check_two_player_row;
use crate::config::{validation, SweepConfig, SweepTarget};
use crate::random;
use crate::report::{fraction_text, money_text};
use crate::{CliError, Options};

pub struct Table {
    pub header: &'static [&'static str],
    pub rows: Vec<serde_json::Value>,
    pub csv_rows: Vec<Vec<String>>,
    pub falsified: bool,
}

trait Row: Serialize {
    const HEADER: &'static [&'static str];
    fn fields(&self) -> Vec<String>;
    fn ok(&self) -> bool;
}

fn table<R: Row>(rows: Vec<R>) -> Table {
    Table {
        header: R::HEADER,
        falsified: rows.iter().any(|r| !r.ok()),
        csv_rows: rows.iter().map(Row::fields).collect(),
        rows: rows
            .iter()
            .map(|r| serde_json::to_value(r).expect("rows serialize"))
            .collect(),
    }
}

impl Table {
    pub fn to_csv(&self) -> Result<String, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| CliError::Validation(e.to_string());
        w.write_record(self.header).map_err(io)?;
        for r in &self.csv_rows {
            w.write_record(r).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Validation(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv of utf-8 fields"))
    }
}

#[derive(Debug, Serialize)]
pub struct Solve2pRow {
    pub v0: u32,
    pub v1: u32,
    pub m1: u64,
    pub p0: u32,
    pub p1: u32,
    pub u0: String,
    pub u1: String,
    pub stackelberg_verified: bool,
    pub nash_verified: bool,
}

impl Row for Solve2pRow {
    const HEADER: &'static [&'static str] = &[
        "v0",
        "v1",
        "m1",
        "p0",
        "p1",
        "u0",
        "u1",
        "stackelberg_verified",
        "nash_verified",
    ];
    fn fields(&self) -> Vec<String> {
        vec![
            self.v0.to_string(),
            self.v1.to_string(),
            self.m1.to_string(),
            self.p0.to_string(),
            self.p1.to_string(),
            self.u0.clone(),
            self.u1.clone(),
            self.stackelberg_verified.to_string(),
            self.nash_verified.to_string(),
        ]
    }
    fn ok(&self) -> bool {
        self.stackelberg_verified && self.nash_verified && self.u0 == "0"
    }
}

#[derive(Debug, Serialize)]
struct BayesRow {
    sample: u64,
    support: String,
    probs: String,
    v1: u32,
    closed_form_bid: u32,
    oracle_bid: u32,
    agrees: bool,
    in_candidates: bool,
    expected_utility: String,
}

impl Row for BayesRow {
    const HEADER: &'static [&'static str] = &[
        "sample",
        "support",
        "probs",
        "v1",
        "closed_form_bid",
        "oracle_bid",
        "agrees",
        "in_candidates",
        "expected_utility",
    ];
    fn fields(&self) -> Vec<String> {
        vec![
            self.sample.to_string(),
            self.support.clone(),
            self.probs.clone(),
            self.v1.to_string(),
            self.closed_form_bid.to_string(),
            self.oracle_bid.to_string(),
            self.agrees.to_string(),
            self.in_candidates.to_string(),
            self.expected_utility.clone(),
        ]
    }
    fn ok(&self) -> bool {
        self.agrees && self.in_candidates
    }
}

#[derive(Debug, Serialize)]
struct RepeatedRow {
    supply: u64,
    m0: u64,
    v0: u32,
    v1: u32,
    rounds: usize,
    terminal: String,
    u0: String,
    u1: String,
    winner: String,
    /// `(M - opening holding of the winner) * value gap`.
    winner_gain_identity: String,
}

impl Row for RepeatedRow {
    const HEADER: &'static [&'static str] = &[
        "supply",
        "m0",
        "v0",
        "v1",
        "rounds",
        "terminal",
        "u0",
        "u1",
        "winner",
        "winner_gain_identity",
    ];
    fn fields(&self) -> Vec<String> {
        vec![
            self.supply.to_string(),
            self.m0.to_string(),
            self.v0.to_string(),
            self.v1.to_string(),
            self.rounds.to_string(),
            self.terminal.clone(),
            self.u0.clone(),
            self.u1.clone(),
            self.winner.clone(),
            self.winner_gain_identity.clone(),
        ]
    }
    fn ok(&self) -> bool {
        let expected = if self.v0 > self.v1 { "N0" } else { "N1" };
        let loser_u = if expected == "N0" { &self.u1 } else { &self.u0 };
        self.winner == expected && loser_u == "0"
    }
}

#[derive(Debug, Serialize)]
struct MultiRow {
    sample: u64,
    v0: u32,
    m0: u64,
    leaders: String,
    p0: u32,
    leader_bids: String,
    u0: String,
    leader_utilities: String,
    follower_response_is_value: bool,
    stackelberg_verified: bool,
}

impl Row for MultiRow {
    const HEADER: &'static [&'static str] = &[
        "sample",
        "v0",
        "m0",
        "leaders",
        "p0",
        "leader_bids",
        "u0",
        "leader_utilities",
        "follower_response_is_value",
        "stackelberg_verified",
    ];
    fn fields(&self) -> Vec<String> {
        vec![
            self.sample.to_string(),
            self.v0.to_string(),
            self.m0.to_string(),
            self.leaders.clone(),
            self.p0.to_string(),
            self.leader_bids.clone(),
            self.u0.clone(),
            self.leader_utilities.clone(),
            self.follower_response_is_value.to_string(),
            self.stackelberg_verified.to_string(),
        ]
    }
    fn ok(&self) -> bool {
        self.follower_response_is_value && self.stackelberg_verified
    }
}

#[derive(Debug, Serialize)]
struct SettleRow {
    sample: u64,
    p0: u32,
    leaders: String,
    options_sold: usize,
    options_expired: usize,
    discount_sink: String,
    residual: String,
    conserved: bool,
    holdings_complete: bool,
    negative_price_warnings: usize,
}

impl Row for SettleRow {
    const HEADER: &'static [&'static str] = &[
        "sample",
        "p0",
        "leaders",
        "options_sold",
        "options_expired",
        "discount_sink",
        "residual",
        "conserved",
        "holdings_complete",
        "negative_price_warnings",
    ];
    fn fields(&self) -> Vec<String> {
        vec![
            self.sample.to_string(),
            self.p0.to_string(),
            self.leaders.clone(),
            self.options_sold.to_string(),
            self.options_expired.to_string(),
            self.discount_sink.clone(),
            self.residual.clone(),
            self.conserved.to_string(),
            self.holdings_complete.to_string(),
            self.negative_price_warnings.to_string(),
        ]
    }
    fn ok(&self) -> bool {
        self.conserved && self.holdings_complete
    }
}

fn joined<T>(items: impl IntoIterator<Item = T>, f: impl Fn(T) -> String) -> String {
    items.into_iter().map(f).collect::<Vec<_>>().join(";")
}

fn row_count(target: &SweepTarget) -> u64 {
    match target {
        SweepTarget::Solve2p { v0, v1, m1 } => v0.len() * v1.len() * m1.len(),
        SweepTarget::Bayes { samples, v1, .. } => samples * v1.len(),
        SweepTarget::Repeated { supply, v0, v1 } => {
            let pairs = v0.len() * v1.len();
            supply.iter().map(|m| m.saturating_sub(1) * pairs).sum()
        }
        SweepTarget::Multi { samples, .. } | SweepTarget::Settle { samples } => *samples,
    }
}

pub fn run(c: &SweepConfig, opts: &Options) -> Result<Table, CliError> {
    let rows = row_count(&c.target);
    if rows > c.max_rows {
        return Err(CliError::RangeTooLarge { rows, max: c.max_rows });
    }
    match &c.target {
        SweepTarget::Solve2p { v0, v1, m1 } => {
            if m1.0 == 0 && !m1.is_empty() {
                return Err(CliError::Validation("unit counts must be at least 1".into()));
            }
            if (v0.0 == 0 && !v0.is_empty()) || (v1.0 == 0 && !v1.is_empty()) {
                return Err(CliError::Validation("valuations must be at least 1".into()));
            }
            let grid: Vec<(u32, u32, u32)> = v0
                .iter()
                .flat_map(|a| v1.iter().flat_map(move |b| m1.iter().map(move |m| (a, b, m))))
                .collect();
            let rows: Vec<Solve2pRow> = grid
                .into_par_iter()
                .map(|(a, b, m)| check_two_player_row(a, b, u64::from(m), opts.bound))
                .collect();
            Ok(table(rows))
        }
        SweepTarget::Bayes {
            samples,
            max_support,
            max_value,
            v1,
            m1,
        } => {
            if *max_support == 0 || *max_value == 0 || *m1 == 0 || (v1.0 == 0 && !v1.is_empty()) {
                return Err(CliError::Validation(
                    "sizes, values and unit counts must be at least 1".into(),
                ));
            }
            let mut rng = random::rng(opts.seed);
            let dists: Vec<_> = (0..*samples)
                .map(|_| random::distribution(&mut rng, *max_support, *max_value))
                .collect();
            let cases: Vec<(u64, u32)> = (0..*samples).flat_map(|s| v1.iter().map(move |b| (s, b))).collect();
            let rows: Vec<BayesRow> = cases
                .into_par_iter()
                .map(|(s, b)| {
                    let d = &dists[s as usize];
                    let v1 = absnft_core::Valuation::new(b).expect("checked above");
                    let bid = optimal_bayesian_leader_bid(v1, d, *m1);
                    let bound = opts.bound.map_or_else(
                        || BidBound::for_values(d.support().iter().copied().chain([v1])),
                        BidBound,
                    );
                    let (argmax, _) = brute_best_response(|p| expected_leader_utility(p, v1, d, *m1), bound);
                    BayesRow {
                        sample: s,
                        support: joined(d.support(), |x| x.to_string()),
                        probs: joined(d.probs(), fraction_text),
                        v1: b,
                        closed_form_bid: bid.get(),
                        oracle_bid: argmax[0].get(),
                        agrees: argmax[0] == bid,
                        in_candidates: candidate_bids(d).contains(&bid),
                        expected_utility: fraction_text(&expected_leader_utility(bid, v1, d, *m1)),
                    }
                })
                .collect();
            Ok(table(rows))
        }
        SweepTarget::Repeated { supply, v0, v1 } => {
            if let Some(m) = supply.iter().find(|&&m| m < 3 || m % 2 == 0) {
                return Err(CliError::Validation(format!("supply {m} must be odd and at least 3")));
            }
            if (v0.0 == 0 && !v0.is_empty()) || (v1.0 == 0 && !v1.is_empty()) {
                return Err(CliError::Validation("valuations must be at least 1".into()));
            }
            let cases: Vec<(u64, u64, u32, u32)> = supply
                .iter()
                .flat_map(|&m| {
                    (1..m).flat_map(move |m0| {
                        v0.iter()
                            .flat_map(move |a| v1.iter().filter(move |&b| b != a).map(move |b| (m, m0, a, b)))
                    })
                })
                .collect();
            let rows = cases
                .into_par_iter()
                .map(|(m, m0, a, b)| {
                    let values = [
                        absnft_core::Valuation::new(a).expect("checked"),
                        absnft_core::Valuation::new(b).expect("checked"),
                    ];
                    let game = RepeatedGame::new(values, m, [m0, m - m0]).map_err(validation)?;
                    let [s0, s1] = EquilibriumStrategy::pair(values).map_err(validation)?;
                    let trace = simulate(&game, [&s0, &s1], default_max_rounds(m));
                    let w = if a > b { Participant::N0 } else { Participant::N1 };
                    let gap = i64::from(a.abs_diff(b));
                    let opening = game.initial.holding(w) as i64;
                    Ok(RepeatedRow {
                        supply: m,
                        m0,
                        v0: a,
                        v1: b,
                        rounds: trace.rounds.len(),
                        terminal: match trace.terminal {
                            Terminal::Z0 => "Z0".into(),
                            Terminal::Z1 => "Z1".into(),
                            Terminal::Truncated => "Truncated".into(),
                        },
                        u0: money_text(trace.total_u0),
                        u1: money_text(trace.total_u1),
                        winner: trace.terminal.winner().map_or_else(|| "none".into(), |p| p.to_string()),
                        winner_gain_identity: money_text(HalfUnits::from_units((m as i64 - opening) * gap)),
                    })
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            Ok(table(rows))
        }
        SweepTarget::Multi {
            samples,
            max_leaders,
            max_units,
            max_value,
        } => {
            if *max_leaders == 0 || *max_units == 0 || *max_value == 0 {
                return Err(CliError::Validation("limits must be at least 1".into()));
            }
            let mut rng = random::rng(opts.seed);
            let games: Vec<_> = (0..*samples)
                .map(|_| random::multiplayer_game(&mut rng, *max_leaders, *max_units, *max_value))
                .collect();
            let rows: Vec<MultiRow> = games
                .par_iter()
                .enumerate()
                .map(|(s, g)| {
                    let out = g.solve();
                    let star = g.equilibrium_bids();
                    let bound = opts.bound.map_or_else(
                        || BidBound::for_values(g.leaders.iter().map(|h| h.value).chain([g.v0])),
                        BidBound,
                    );
                    let verdict = absnft_core::oracle::verify_stackelberg(
                        &star,
                        |b| g.follower_best_response(b),
                        absnft_core::oracle::multiplayer_payoffs(g),
                        bound,
                    );
                    MultiRow {
                        sample: s as u64,
                        v0: g.v0.get(),
                        m0: g.m0,
                        leaders: joined(&g.leaders, |h| format!("{}:{}:{}", h.index, h.units, h.value)),
                        p0: out.profile.p0.get(),
                        leader_bids: joined(&out.profile.leader_bids, |(i, b)| format!("{i}:{b}")),
                        u0: money_text(out.u0),
                        leader_utilities: joined(&out.leader_utilities, |(i, u)| format!("{i}:{}", money_text(*u))),
                        follower_response_is_value: g.follower_best_response(&star) == g.v0.as_bid(),
                        stackelberg_verified: verdict.holds(),
                    }
                })
                .collect();
            Ok(table(rows))
        }
        SweepTarget::Settle { samples } => {
            let mut rng = random::rng(opts.seed);
            let instances: Vec<_> = (0..*samples).map(|_| random::settlement(&mut rng)).collect();
            let rows = instances
                .par_iter()
                .enumerate()
                .map(|(s, inst)| {
                    let r = settle(inst).map_err(validation)?;
                    let count = |st: fn(&OptionStatus) -> bool| r.options.iter().filter(|o| st(&o.status)).count();
                    Ok(SettleRow {
                        sample: s as u64,
                        p0: inst.p0.get(),
                        leaders: joined(&inst.leaders, |l| {
                            let n = &l.participant;
                            format!("{}:{}:{}:{}", n.index, n.units, n.bid, money_text(n.budget))
                        }),
                        options_sold: count(|s| matches!(s, OptionStatus::Sold(_))),
                        options_expired: count(|s| *s == OptionStatus::Expired),
                        discount_sink: money_text(r.total.discount_sink),
                        residual: money_text(r.total.residual()),
                        conserved: r.is_conserved(),
                        holdings_complete: r.supply() == inst.supply(),
                        negative_price_warnings: r.total.warnings.len(),
                    })
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            Ok(table(rows))
        }
    }
}
