//! Acceptance suite. Runs every criterion, prints one line each and exits
//! non-zero if any fails.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use absnft_cli::config::ScenarioConfig;
use absnft_cli::{random, run_scenario, Options};
use absnft_core::bayes::{
    bayesian_se, candidate_bids, expected_leader_utility, leader_bid_maximizers, optimal_bayesian_leader_bid,
    DiscreteValueDistribution,
};
use absnft_core::ledger::{Address, LedgerError, LedgerState, TokenId};
use absnft_core::multiplayer::{Holding, MultiplayerGame};
use absnft_core::oracle::{
    bounded_deviation_search, brute_best_response, multiplayer_payoffs, two_player_payoffs, verify_nash,
    verify_stackelberg, BidBound,
};
use absnft_core::repeated::{
    default_max_rounds, play_round, round_welfare_bound, simulate, EquilibriumStrategy, Participant, RepeatedGame,
    RepeatedState,
};
use absnft_core::settlement::settle;
use absnft_core::two_player::{best_response_follower, follower_utility, leader_utility, optimal_leader_bid, solve_se};
use absnft_core::{Bid, BigRational, HalfUnits, Valuation};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
use rand::Rng;
use rayon::prelude::*;

const SEED: u64 = 0x5eed;

fn v(x: u32) -> Valuation {
    Valuation::new(x).unwrap()
}

/// Failures collected by a criterion; only the first few are kept.
#[derive(Default)]
struct Failures {
    count: usize,
    first: Vec<String>,
}

impl Failures {
    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok {
            self.count += 1;
            if self.first.len() < 3 {
                self.first.push(what());
            }
        }
    }

    fn merge(mut self, other: Failures) -> Failures {
        self.count += other.count;
        for f in other.first {
            if self.first.len() < 3 {
                self.first.push(f);
            }
        }
        self
    }

    fn summary(&self, checked: usize) -> Result<String, String> {
        if self.count == 0 {
            Ok(format!("{checked} checks"))
        } else {
            Err(format!(
                "{} of {checked} checks failed; first: {}",
                self.count,
                self.first.join(" | ")
            ))
        }
    }
}

fn criterion1() -> Result<String, String> {
    let mut f = Failures::default();
    let mut n = 0;
    for v0 in 1..=20 {
        for p1 in 0..=25 {
            let (set, max) = brute_best_response(|p0| follower_utility(1, v(v0), p0, Bid(p1)), BidBound(27));
            let br = best_response_follower(Bid(p1), v(v0));
            n += 1;
            f.check(
                set.contains(&br) && follower_utility(1, v(v0), br, Bid(p1)) == max,
                || format!("v0={v0} p1={p1} br={br:?} argmax={set:?}"),
            );
        }
    }
    f.summary(n)
}

fn two_player_check(v0: u32, v1: u32, f: &mut Failures) {
    let se = solve_se(v(v0), v(v1), 1);
    let bound = BidBound::for_values([v(v0), v(v1)]);
    let pay = two_player_payoffs(1, v(v0), v(v1));
    let nash = verify_nash(&[se.p0, se.p1], &pay, bound);
    let stack = verify_stackelberg(
        &[se.p1],
        |b| best_response_follower(b[0], v(v0)),
        |k, p0, b| pay(k, &[p0, b[0]]),
        bound,
    );
    f.check(nash.holds(), || format!("nash v0={v0} v1={v1}: {nash:?}"));
    f.check(stack.holds(), || format!("stackelberg v0={v0} v1={v1}: {stack:?}"));
    f.check(se.u0 == HalfUnits::ZERO, || format!("u0={} at v0={v0} v1={v1}", se.u0));
}

fn criterion2() -> Result<String, String> {
    let mut f = Failures::default();
    for v0 in 1..=20 {
        for v1 in 1..=20 {
            two_player_check(v0, v1, &mut f);
        }
    }
    f.summary(400)
}

fn criterion3() -> Result<String, String> {
    let mut rng = random::rng(SEED);
    let mut f = Failures::default();
    let n = 10_000;
    for _ in 0..n {
        let m: u64 = rng.random_range(1..=20);
        let value = v(rng.random_range(1..=30));
        let other = Bid(rng.random_range(0..=40));
        let as_follower = follower_utility(m, value, value.as_bid(), other);
        let as_leader = leader_utility(m, value, other, value.as_bid());
        f.check(as_follower >= HalfUnits::ZERO && as_leader >= HalfUnits::ZERO, || {
            format!("single round m={m} v={value:?} other={other:?}")
        });

        let supply = 2 * rng.random_range(1..=10u64) + 1;
        let m0 = rng.random_range(1..supply);
        let state = RepeatedState::new(m0, supply - m0).unwrap();
        let opponent = v(rng.random_range(1..=30));
        let honest = if rng.random_bool(0.5) {
            Participant::N0
        } else {
            Participant::N1
        };
        let mut values = [opponent; 2];
        values[honest.index()] = value;
        let (p_leader, p_follower) = if state.leader() == honest {
            (value.as_bid(), other)
        } else {
            (other, value.as_bid())
        };
        let (_, record) = play_round(state, values, p_leader, p_follower, 1);
        f.check(record.utility(honest) >= HalfUnits::ZERO, || {
            format!("repeated round m0={m0} M={supply} v={value:?} other={other:?} honest={honest:?}")
        });
    }
    f.summary(2 * n)
}

fn criterion4() -> Result<String, String> {
    let mut rng = random::rng(SEED);
    let mut f = Failures::default();
    let mut n = 0;
    for _ in 0..200 {
        let d = random::distribution(&mut rng, 6, 12);
        for v1 in 1..=12 {
            for m in [1u64, 3] {
                let bid = optimal_bayesian_leader_bid(v(v1), &d, m);
                let (argmax, max) = leader_bid_maximizers(v(v1), &d, m);
                let bound = BidBound::for_values(d.support().iter().copied().chain([v(v1)]));
                let (brute, brute_max) = brute_best_response(|p| expected_leader_utility(p, v(v1), &d, m), bound);
                n += 1;
                f.check(bid == brute[0] && brute_max == max && argmax == brute, || {
                    format!("support={:?} v1={v1} m={m} bid={bid:?} oracle={brute:?}", d.support())
                });
                f.check(candidate_bids(&d).contains(&bid), || {
                    format!("bid {bid:?} outside candidates")
                });
            }
        }
    }
    for v0 in 1..=20 {
        for v1 in 1..=20 {
            let d = DiscreteValueDistribution::<BigRational>::degenerate(v(v0));
            let bayes = bayesian_se(v(v0), v(v1), &d, 1);
            n += 1;
            f.check(
                bayes == solve_se(v(v0), v(v1), 1) && bayes.p1 == optimal_leader_bid(v(v0), v(v1)),
                || format!("degenerate v0={v0} v1={v1}: {bayes:?}"),
            );
        }
    }
    f.summary(n)
}

fn repeated_grid() -> Vec<RepeatedGame> {
    let mut games = Vec::new();
    for m in [3u64, 5, 7, 9] {
        for a in 1..=6 {
            for b in (1..=6).filter(|&b| b != a) {
                for m0 in 1..m {
                    games.push(RepeatedGame::new([v(a), v(b)], m, [m0, m - m0]).unwrap());
                }
            }
        }
    }
    games
}

fn criterion5() -> Result<String, String> {
    let mut termination = Failures::default();
    let mut identity = Failures::default();
    let mut suffix = Failures::default();
    let games = repeated_grid();
    for game in &games {
        let [s0, s1] = EquilibriumStrategy::pair(game.values).unwrap();
        let trace = simulate(game, [&s0, &s1], default_max_rounds(game.supply()));
        let w = if game.values[0] > game.values[1] {
            Participant::N0
        } else {
            Participant::N1
        };
        termination.check(trace.terminal.winner() == Some(w), || {
            format!("{game:?} ended {:?}", trace.terminal)
        });
        termination.check(trace.total(w.other()) == HalfUnits::ZERO, || {
            format!("{game:?} loser total {}", trace.total(w.other()))
        });
        for r in trace.rounds.iter().filter(|r| r.leader_bought()) {
            termination.check(r.welfare() <= round_welfare_bound(r, game.values), || {
                format!("{game:?} round {} welfare {} above bound", r.round, r.welfare())
            });
        }
        let gap = i64::from(game.values[w.index()].get()) - i64::from(game.values[w.other().index()].get());
        let gained = trace.final_holdings[w.index()] as i64 - trace.initial[w.index()] as i64;
        let expected = HalfUnits::from_units(gained * gap);
        identity.check(trace.total(w) == expected, || {
            format!(
                "values={:?} M={} start={:?}: winner total {} vs {}",
                game.values.map(Valuation::get),
                game.supply(),
                trace.initial,
                trace.total(w),
                expected
            )
        });
        let start = trace
            .rounds
            .iter()
            .position(|r| r.leader != w)
            .unwrap_or(trace.rounds.len());
        let held = trace
            .rounds
            .get(start)
            .map_or(trace.final_holdings[w.index()], |r| r.before[w.index()]);
        let tail: HalfUnits = trace.rounds[start..].iter().map(|r| r.utility(w)).sum();
        suffix.check(
            tail == HalfUnits::from_units((game.supply() - held) as i64 * gap),
            || format!("{game:?} suffix gain {tail}"),
        );
    }
    let n = games.len();
    let note = match suffix.summary(n) {
        Ok(_) => "suffix form from first winner-majority round holds".to_string(),
        Err(e) => format!("suffix form also fails: {e}"),
    };
    match (termination.summary(n), identity.summary(n)) {
        (Ok(_), Ok(_)) => Ok(format!("{n} games; {note}")),
        (Err(e), _) => Err(format!("{e}; {note}")),
        (Ok(_), Err(e)) => Err(format!(
            "winner total identity: {e}; termination, loser and welfare checks hold; {note}"
        )),
    }
}

fn criterion6() -> Result<String, String> {
    let mut cases = Vec::new();
    for a in 1..=5 {
        for b in (1..=5).filter(|&b| b != a) {
            for m0 in 1..3 {
                cases.push((a, b, m0));
            }
        }
    }
    let results: Vec<Failures> = cases
        .par_iter()
        .map(|&(a, b, m0)| {
            let mut f = Failures::default();
            let game = RepeatedGame::new([v(a), v(b)], 3, [m0, 3 - m0]).unwrap();
            let [s0, s1] = EquilibriumStrategy::pair(game.values).unwrap();
            match bounded_deviation_search(&game, [&s0, &s1], 10, BidBound(7)) {
                Ok(None) => {}
                Ok(Some(w)) => f.check(false, || format!("v=({a},{b}) m0={m0}: {:?} gains", w.deviator)),
                Err(e) => f.check(false, || e.to_string()),
            }
            f
        })
        .collect();
    let n = results.len();
    results
        .into_iter()
        .fold(Failures::default(), Failures::merge)
        .summary(n)
}

fn multiplayer_grid() -> Vec<MultiplayerGame> {
    let pairs: Vec<(u64, u32)> = (1..=4).flat_map(|m| (1..=6).map(move |x| (m, x))).collect();
    let mut leader_sets: Vec<Vec<(u64, u32)>> = pairs.iter().map(|&p| vec![p]).collect();
    let mut frontier = leader_sets.clone();
    for _ in 1..3 {
        frontier = frontier
            .iter()
            .flat_map(|s| pairs.iter().map(move |&p| [s.clone(), vec![p]].concat()))
            .collect();
        leader_sets.extend(frontier.iter().cloned());
    }
    let mut games = Vec::new();
    for set in &leader_sets {
        let holdings: Vec<Holding> = set
            .iter()
            .enumerate()
            .map(|(k, &(units, value))| Holding {
                index: k + 1,
                units,
                value: v(value),
            })
            .collect();
        let others: u64 = set.iter().map(|&(m, _)| m).sum();
        for v0 in 1..=6 {
            games.push(MultiplayerGame::new(v(v0), others + 1, holdings.clone()).unwrap());
        }
    }
    games
}

fn multiplayer_checks(g: &MultiplayerGame, exhaustive_bound: Option<BidBound>) -> (usize, Failures) {
    let mut f = Failures::default();
    let mut n = 1;
    let star = g.equilibrium_bids();
    let br = g.follower_best_response(&star);
    f.check(br == g.v0.as_bid(), || format!("{g:?}: response {br:?}"));
    let bound = BidBound::for_values(g.leaders.iter().map(|h| h.value).chain([g.v0]));
    let verdict = verify_stackelberg(&star, |b| g.follower_best_response(b), multiplayer_payoffs(g), bound);
    f.check(verdict.holds(), || format!("{g:?}: {verdict:?}"));
    if let Some(b) = exhaustive_bound {
        let k = g.leaders.len();
        let mut bids = vec![0u32; k];
        loop {
            let deviation: BTreeMap<usize, Bid> =
                g.leaders.iter().zip(&bids).map(|(h, &x)| (h.index, Bid(x))).collect();
            if let Ok(w) = g.check_collusion_resistance(&deviation) {
                n += 1;
                f.check(w.resisted, || format!("{g:?}: {w:?}"));
            }
            let Some(pos) = bids.iter().position(|&x| x < b.0) else {
                break;
            };
            bids[..pos].iter_mut().for_each(|x| *x = 0);
            bids[pos] += 1;
        }
    }
    (n, f)
}

fn criterion7() -> Result<String, String> {
    let games = multiplayer_grid();
    let (n, f) = games
        .par_iter()
        .map(|g| {
            let bound = BidBound::for_values(g.leaders.iter().map(|h| h.value).chain([g.v0]));
            multiplayer_checks(g, Some(bound))
        })
        .reduce(|| (0, Failures::default()), |(a, fa), (b, fb)| (a + b, fa.merge(fb)));
    let mut rng = random::rng(SEED);
    let mut random_failures = Failures::default();
    let mut m = 0;
    while m < 1000 {
        let g = random::multiplayer_game(&mut rng, 3, 4, 6);
        let deviation: BTreeMap<usize, Bid> = g
            .leaders
            .iter()
            .map(|h| (h.index, Bid(rng.random_range(0..=12))))
            .collect();
        if let Ok(w) = g.check_collusion_resistance(&deviation) {
            m += 1;
            random_failures.check(w.resisted, || format!("{g:?}: {w:?}"));
        }
    }
    let merged = f.merge(random_failures);
    merged
        .summary(n + m)
        .map(|s| format!("{s} over {} exhaustive games and {m} random coalitions", games.len()))
}

const USERS: [&str; 4] = ["alice", "bob", "carol", "dave"];

#[derive(Debug, Clone)]
enum Op {
    Mint(u64, usize),
    Securitize(u64, usize, usize, u64),
    Transfer(u64, usize, usize, u64),
    CnftTransfer(u64, usize, usize),
    Restruct(u64, usize, usize),
}

fn addr(i: usize) -> Address {
    Address::new(USERS[i]).unwrap()
}

fn op() -> impl Strategy<Value = Op> {
    let user = 0..USERS.len();
    let token = 0u64..3;
    prop_oneof![
        (token.clone(), user.clone()).prop_map(|(t, u)| Op::Mint(t, u)),
        (token.clone(), user.clone(), user.clone(), 0u64..12).prop_map(|(t, a, b, n)| Op::Securitize(t, a, b, n)),
        (token.clone(), user.clone(), user.clone(), 0u64..8).prop_map(|(t, a, b, n)| Op::Transfer(t, a, b, n)),
        (token.clone(), user.clone(), user.clone()).prop_map(|(t, a, b)| Op::CnftTransfer(t, a, b)),
        (token, user.clone(), user).prop_map(|(t, a, b)| Op::Restruct(t, a, b)),
    ]
}

fn apply(state: &LedgerState, op: &Op) -> Result<LedgerState, LedgerError> {
    match *op {
        Op::Mint(t, u) => state.mint(TokenId(t), &addr(u)),
        Op::Securitize(t, a, b, n) => state.securitize(&addr(a), &addr(b), TokenId(t), n),
        Op::Transfer(t, a, b, n) => state.snft_transfer(&addr(a), &addr(b), TokenId(t), n),
        Op::CnftTransfer(t, a, b) => state.cnft_transfer(&addr(a), &addr(b), TokenId(t)),
        Op::Restruct(t, a, b) => state.restruct(&addr(a), &addr(b), TokenId(t)),
    }
}

fn runner(cases: u32) -> TestRunner {
    let mut seed = [0u8; 32];
    seed[..8].copy_from_slice(&SEED.to_le_bytes());
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new_with_rng(config, TestRng::from_seed(RngAlgorithm::ChaCha, &seed))
}

fn criterion8() -> Result<String, String> {
    let cases = 512;
    runner(cases)
        .run(&prop::collection::vec(op(), 1..60), |ops| {
            let mut state = LedgerState::new();
            for op in &ops {
                let before = state.clone();
                match apply(&state, op) {
                    Ok(next) => state = next,
                    Err(_) => prop_assert_eq!(&state, &before),
                }
                prop_assert_eq!(state.check_invariants(), Ok(()), "after {:?}", op);
            }
            Ok(())
        })
        .map_err(|e| format!("invariants: {e}"))?;
    runner(cases)
        .run(
            &(1u64..50, prop::collection::vec((1usize..4, 1u64..10), 0..8)),
            |(supply, cuts)| {
                let t = TokenId(7);
                let owner = addr(0);
                let mut state = LedgerState::new()
                    .mint(t, &owner)
                    .unwrap()
                    .securitize(&owner, &owner, t, supply)
                    .unwrap();
                prop_assert!(state.nfts[&t].frozen);
                for &(to, n) in &cuts {
                    if let Ok(next) = state.snft_transfer(&owner, &addr(to), t, n) {
                        state = next;
                    }
                }
                for to in 1..USERS.len() {
                    let held = state.balance_of(&addr(to), t);
                    if held > 0 {
                        state = state.snft_transfer(&addr(to), &owner, t, held).unwrap();
                    }
                }
                let done = state.restruct(&owner, &addr(3), t).unwrap();
                prop_assert_eq!(done.owner_of(t).unwrap(), &addr(3));
                prop_assert!(!done.nfts[&t].frozen);
                prop_assert_eq!(done.total_supply(t), 0);
                prop_assert_eq!(done.check_invariants(), Ok(()));
                Ok(())
            },
        )
        .map_err(|e| format!("round trip: {e}"))?;
    Ok(format!("{} random sequences", 2 * cases))
}

fn criterion9() -> Result<String, String> {
    let mut rng = random::rng(SEED);
    let mut f = Failures::default();
    let (mut options, mut negative, mut unsold) = (0, 0, 0);
    for i in 0..1000 {
        let instance = random::settlement(&mut rng);
        match settle(&instance) {
            Ok(report) => {
                f.check(report.is_conserved(), || format!("instance {i}: money not conserved"));
                f.check(report.supply() == instance.supply(), || {
                    format!(
                        "instance {i}: holdings {} vs supply {}",
                        report.supply(),
                        instance.supply()
                    )
                });
                options += report.options.len();
                negative += report.options.iter().filter(|o| o.price < 0).count();
                unsold += report
                    .options
                    .iter()
                    .filter(|o| !matches!(o.status, absnft_core::settlement::OptionStatus::Sold(_)))
                    .count();
            }
            Err(e) => f.check(false, || format!("instance {i}: {e}")),
        }
    }
    f.summary(2000)
        .map(|s| format!("{s}; {options} options, {negative} negative-priced, {unsold} unsold"))
}

fn scenario_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/scenarios")
}

fn criterion10() -> Result<String, String> {
    let mut f = Failures::default();
    let mut n = 0;
    let mut paths: Vec<PathBuf> = std::fs::read_dir(scenario_dir())
        .map_err(|e| e.to_string())?
        .map(|e| e.unwrap().path())
        .collect();
    paths.sort();
    for path in &paths {
        let text = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
        let config = ScenarioConfig::parse(&text).map_err(|e| e.to_string())?;
        for seed in [0, 7] {
            let opts = Options {
                seed,
                grid: Some(4),
                ..Options::default()
            };
            let a = run_scenario(config.kind(), &config, &opts).map_err(|e| e.to_string())?;
            let b = run_scenario(config.kind(), &config, &opts).map_err(|e| e.to_string())?;
            n += 1;
            f.check(a == b, || format!("{} seed {seed} differs in-process", path.display()));
        }
        let run = || {
            Command::new(env!("CARGO_BIN_EXE_absnft"))
                .args([config.kind(), "--config"])
                .arg(path)
                .args(["--seed", "11"])
                .output()
                .map(|o| o.stdout)
        };
        let (a, b) = (run().map_err(|e| e.to_string())?, run().map_err(|e| e.to_string())?);
        n += 1;
        f.check(a == b && !a.is_empty(), || {
            format!("{} differs across binary runs", path.display())
        });
    }
    f.summary(n)
}

type Criterion = (&'static str, Option<Duration>, fn() -> Result<String, String>);

fn main() {
    let criteria: [Criterion; 10] = [
        (
            "follower best response closed form",
            Some(Duration::from_secs(1)),
            criterion1,
        ),
        (
            "two-player equilibrium is Stackelberg and Nash",
            Some(Duration::from_secs(5)),
            criterion2,
        ),
        ("truthful bidding is safe", None, criterion3),
        ("Bayesian leader bid", Some(Duration::from_secs(10)), criterion4),
        (
            "repeated game equilibrium play",
            Some(Duration::from_secs(10)),
            criterion5,
        ),
        (
            "bounded deviation certificate",
            Some(Duration::from_secs(60)),
            criterion6,
        ),
        (
            "multi-leader equilibrium and coalitions",
            Some(Duration::from_secs(60)),
            criterion7,
        ),
        (
            "ledger invariants and round trip",
            Some(Duration::from_secs(5)),
            criterion8,
        ),
        ("settlement conservation", Some(Duration::from_secs(5)), criterion9),
        ("deterministic reports", None, criterion10),
    ];
    let mut failed = 0;
    for (i, (name, limit, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = run();
        let elapsed = start.elapsed();
        let result = match (result, limit) {
            (Ok(_), Some(l)) if elapsed > *l => Err(format!("took {elapsed:.2?}, limit {l:?}")),
            (r, _) => r,
        };
        let (tag, detail) = match &result {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} criterion {:>2} {name} [{elapsed:.2?}]: {detail}", i + 1);
    }
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
