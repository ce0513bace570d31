use absnft_core::repeated::{
    default_max_rounds, divergence_bound, play_round, round_welfare_bound, simulate, EquilibriumStrategy, Participant,
    RepeatedGame, RepeatedState, Role, Terminal,
};
use absnft_core::{Bid, HalfUnits, Valuation};
use proptest::prelude::*;

fn v(x: u32) -> Valuation {
    Valuation::new(x).unwrap()
}

fn grid() -> impl Iterator<Item = RepeatedGame> {
    [3u64, 5, 7, 9].into_iter().flat_map(|m| {
        (1..=6u32).flat_map(move |a| {
            (1..=6u32)
                .filter(move |&b| b != a)
                .flat_map(move |b| (1..m).map(move |m0| RepeatedGame::new([v(a), v(b)], m, [m0, m - m0]).unwrap()))
        })
    })
}

#[test]
fn equilibrium_play_ends_with_the_higher_value() {
    for game in grid() {
        let [s0, s1] = EquilibriumStrategy::pair(game.values).unwrap();
        let trace = simulate(&game, [&s0, &s1], default_max_rounds(game.supply()));
        let winner = if game.values[0] > game.values[1] {
            Participant::N0
        } else {
            Participant::N1
        };
        assert_eq!(trace.terminal.winner(), Some(winner), "{game:?}");
        assert_eq!(trace.total(winner.other()), HalfUnits::ZERO, "{game:?}");
        for r in trace.rounds.iter().filter(|r| r.leader_bought()) {
            assert!(r.welfare() <= round_welfare_bound(r, game.values), "{game:?} {r:?}");
        }
    }
}

#[test]
fn winner_gain_once_it_holds_the_majority() {
    for game in grid() {
        let [s0, s1] = EquilibriumStrategy::pair(game.values).unwrap();
        let trace = simulate(&game, [&s0, &s1], default_max_rounds(game.supply()));
        let w = trace.terminal.winner().unwrap();
        let gap = i64::from(game.values[w.index()].get()) - i64::from(game.values[w.other().index()].get());
        let start = trace.rounds.iter().position(|r| r.leader != w).unwrap();
        let before = trace.rounds[start].before[w.index()] as i64;
        let suffix: HalfUnits = trace.rounds[start..].iter().map(|r| r.utility(w)).sum();
        assert_eq!(
            suffix,
            HalfUnits::from_units((game.supply() as i64 - before) * gap),
            "{game:?}"
        );
    }
}

#[test]
fn non_terminal_play_stays_below_divergence_bound() {
    let game = RepeatedGame::new([v(3), v(4)], 9, [5, 4]).unwrap();
    let up = |role: Role, _: &RepeatedState, _: Option<Bid>| match role {
        Role::Leader => Bid(8),
        Role::Follower => Bid(0),
    };
    for t in 1..=12 {
        let trace = simulate(&game, [&up, &up], t);
        assert_eq!(trace.terminal, Terminal::Truncated);
        let welfare: HalfUnits = trace.rounds.iter().map(|r| r.welfare()).sum();
        assert!(welfare <= divergence_bound(9, game.values, t));
    }
}

proptest! {
    #[test]
    fn truthful_rounds_never_lose(
        supply in (1u64..10).prop_map(|k| 2 * k + 1),
        split in 1u64..20,
        a in 1u32..15,
        b in 1u32..15,
        other in 0u32..20,
        truthful_leads in any::<bool>(),
    ) {
        let m0 = 1 + split % (supply - 1);
        let state = RepeatedState::new(m0, supply - m0).unwrap();
        let values = [v(a), v(b)];
        let leader = state.leader();
        let (honest, p_leader, p_follower) = if truthful_leads {
            (leader, values[leader.index()].as_bid(), Bid(other))
        } else {
            (leader.other(), Bid(other), values[leader.other().index()].as_bid())
        };
        let (_, rec) = play_round(state, values, p_leader, p_follower, 1);
        prop_assert!(rec.utility(honest) >= HalfUnits::ZERO);
    }
}
