//! Seeded instance generators for sweeps and grid verification.

use absnft_core::bayes::DiscreteValueDistribution;
use absnft_core::multiplayer::{Holding, MultiplayerGame};
use absnft_core::settlement::{
    Acceptance, BudgetedParticipant, OptionBuyer, SettlementInstance, SettlementLeader, Step2Choice,
};
use absnft_core::{Bid, BigRational, HalfUnits, Valuation};
use num_bigint::BigInt;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn val(x: u32) -> Valuation {
    Valuation::new(x).expect("generators draw positive values")
}

/// A prior with 1 to `max_support` distinct values in `1..=max_value` and
/// random positive weights.
pub fn distribution<R: Rng>(rng: &mut R, max_support: usize, max_value: u32) -> DiscreteValueDistribution<BigRational> {
    let mut values: Vec<u32> = (1..=max_value).collect();
    values.shuffle(rng);
    let k = rng.random_range(1..=max_support.min(values.len()));
    let mut support: Vec<u32> = values[..k].to_vec();
    support.sort_unstable();
    let weights: Vec<i64> = (0..k).map(|_| rng.random_range(1..=20)).collect();
    let total: i64 = weights.iter().sum();
    let probs = weights
        .iter()
        .map(|&w| BigRational::new(BigInt::from(w), BigInt::from(total)))
        .collect();
    DiscreteValueDistribution::new(support.into_iter().map(val).collect(), probs).expect("weights normalize")
}

/// A multi-leader game; the follower's holding is the smallest majority
/// plus a random surplus.
pub fn multiplayer_game<R: Rng>(rng: &mut R, max_leaders: usize, max_units: u64, max_value: u32) -> MultiplayerGame {
    let k = rng.random_range(1..=max_leaders);
    let leaders: Vec<Holding> = (1..=k)
        .map(|index| Holding {
            index,
            units: rng.random_range(1..=max_units),
            value: val(rng.random_range(1..=max_value)),
        })
        .collect();
    let others: u64 = leaders.iter().map(|h| h.units).sum();
    let m0 = others + 1 + rng.random_range(0..=2);
    MultiplayerGame::new(val(rng.random_range(1..=max_value)), m0, leaders).expect("follower holds a majority")
}

/// A settlement with budget shortfalls, unsold options and negative option prices.
pub fn settlement<R: Rng>(rng: &mut R) -> SettlementInstance {
    let p0 = rng.random_range(1..=10u32);
    let k = rng.random_range(1..=4usize);
    let leaders: Vec<SettlementLeader> = (1..=k)
        .map(|index| SettlementLeader {
            participant: BudgetedParticipant {
                index,
                budget: HalfUnits::from_halves(rng.random_range(0..=120)),
                bid: Bid(rng.random_range(0..=2 * p0 + 3)),
                units: rng.random_range(1..=4),
            },
            choice: if rng.random_bool(0.3) {
                Step2Choice::PostOption(rng.random_range(-5..=5))
            } else {
                Step2Choice::Pay
            },
        })
        .collect();
    let others: u64 = leaders.iter().map(|l| l.participant.units).sum();
    let buyers: Vec<OptionBuyer> = (0..rng.random_range(0..=3))
        .map(|b| OptionBuyer {
            name: format!("buyer{b}"),
            budget: HalfUnits::from_units(rng.random_range(0..=80)),
        })
        .collect();
    let acceptances = if buyers.is_empty() {
        Vec::new()
    } else {
        (0..rng.random_range(0..=6))
            .map(|_| Acceptance {
                buyer: buyers[rng.random_range(0..buyers.len())].name.clone(),
                holder: rng.random_range(1..=k),
                tick: rng.random_range(0..10),
            })
            .collect()
    };
    SettlementInstance {
        p0: Bid(p0),
        m0: others + 1 + rng.random_range(0..=3),
        follower_budget: HalfUnits::from_units(i64::from(p0) * others as i64 + rng.random_range(0..=10)),
        leaders,
        buyers,
        acceptances,
        option_deadline: rng.random_range(0..10),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_instances() {
        let a: Vec<_> = (0..5)
            .map({
                let mut r = rng(9);
                move |_| settlement(&mut r)
            })
            .collect();
        let b: Vec<_> = (0..5)
            .map({
                let mut r = rng(9);
                move |_| settlement(&mut r)
            })
            .collect();
        assert_eq!(a, b);
    }

    #[test]
    fn distributions_respect_limits() {
        let mut r = rng(1);
        for _ in 0..100 {
            let d = distribution(&mut r, 6, 12);
            assert!(d.support().len() <= 6);
            assert!(d.max_value().get() <= 12);
        }
    }
}
