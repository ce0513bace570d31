//! Scenario files. Every config is a JSON object tagged by `kind`.

use std::collections::BTreeMap;

use absnft_core::bayes::DiscreteValueDistribution;
use absnft_core::multiplayer::Holding;
use absnft_core::repeated::{ConstantBid, EquilibriumStrategy, MarkovTable, Participant, Strategy, Truthful};
use absnft_core::settlement::{Acceptance, BidPolicy, OptionBuyer, Step2Choice, TimedBid};
use absnft_core::{Bid, BigRational, HalfUnits, Valuation};
use num_bigint::BigInt;
use serde::{Deserialize, Serialize};

use crate::CliError;

fn one() -> u64 {
    1
}

/// Leader-indexed bid maps. JSON object keys arrive as strings once a tagged
/// enum has buffered them, so parse them here.
fn index_map<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Option<BTreeMap<usize, Bid>>, D::Error> {
    let raw: Option<BTreeMap<String, Bid>> = Option::deserialize(d)?;
    raw.map(|m| {
        m.into_iter()
            .map(|(k, b)| {
                k.parse::<usize>()
                    .map(|i| (i, b))
                    .map_err(|_| serde::de::Error::custom(format!("leader index `{k}` is not an integer")))
            })
            .collect()
    })
    .transpose()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScenarioConfig {
    Solve2p(Solve2pConfig),
    Bayes(BayesConfig),
    Repeated(RepeatedConfig),
    Multi(MultiConfig),
    Settle(SettleConfig),
    Verify(VerifyConfig),
    Sweep(SweepConfig),
}

impl ScenarioConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            ScenarioConfig::Solve2p(_) => "solve2p",
            ScenarioConfig::Bayes(_) => "bayes",
            ScenarioConfig::Repeated(_) => "repeated",
            ScenarioConfig::Multi(_) => "multi",
            ScenarioConfig::Settle(_) => "settle",
            ScenarioConfig::Verify(_) => "verify",
            ScenarioConfig::Sweep(_) => "sweep",
        }
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::MalformedConfig(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Solve2pConfig {
    pub v0: Valuation,
    pub v1: Valuation,
    #[serde(default = "one")]
    pub m1: u64,
}

/// An integer or a string of digits, for numerators and denominators that
/// may not fit in a JSON number.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BigIntInput {
    Int(i64),
    Text(String),
}

impl BigIntInput {
    fn value(&self) -> Result<BigInt, CliError> {
        match self {
            BigIntInput::Int(n) => Ok(BigInt::from(*n)),
            BigIntInput::Text(s) => s
                .trim()
                .parse()
                .map_err(|_| CliError::Validation(format!("{s:?} is not an integer"))),
        }
    }
}

/// A rational given as `[num, den]` or as a bare integer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RationalInput {
    Pair(BigIntInput, BigIntInput),
    Int(i64),
}

impl RationalInput {
    pub fn value(&self) -> Result<BigRational, CliError> {
        match self {
            RationalInput::Int(n) => Ok(BigRational::from_integer(BigInt::from(*n))),
            RationalInput::Pair(n, d) => {
                let d = d.value()?;
                if d == BigInt::from(0) {
                    return Err(CliError::Validation("zero denominator".into()));
                }
                Ok(BigRational::new(n.value()?, d))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BayesConfig {
    pub v1: Valuation,
    #[serde(default = "one")]
    pub m1: u64,
    pub support: Vec<Valuation>,
    pub probs: Vec<RationalInput>,
    /// Realized follower value, to report the resulting play.
    #[serde(default)]
    pub actual_v0: Option<Valuation>,
}

impl BayesConfig {
    pub fn distribution(&self) -> Result<DiscreteValueDistribution<BigRational>, CliError> {
        let probs = self.probs.iter().map(RationalInput::value).collect::<Result<_, _>>()?;
        DiscreteValueDistribution::new(self.support.clone(), probs).map_err(|e| CliError::Validation(e.to_string()))
    }
}

/// A bidding rule for one repeated-game player.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyConfig {
    Equilibrium,
    Truthful,
    Constant(Bid),
    Table(MarkovTable),
}

impl StrategyConfig {
    pub fn build(&self, me: Participant, values: [Valuation; 2]) -> Result<Box<dyn Strategy>, CliError> {
        Ok(match self {
            StrategyConfig::Equilibrium => Box::new(EquilibriumStrategy::new(me, values).map_err(validation)?),
            StrategyConfig::Truthful => Box::new(Truthful(values[me.index()])),
            StrategyConfig::Constant(b) => Box::new(ConstantBid(*b)),
            StrategyConfig::Table(t) => Box::new(t.clone()),
        })
    }
}

fn default_strategies() -> [StrategyConfig; 2] {
    [StrategyConfig::Equilibrium, StrategyConfig::Equilibrium]
}

pub(crate) fn validation(e: impl std::fmt::Display) -> CliError {
    CliError::Validation(e.to_string())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RepeatedConfig {
    pub v0: Valuation,
    pub v1: Valuation,
    #[serde(alias = "M")]
    pub supply: u64,
    /// Opening holding of N0; defaults to the smallest majority.
    #[serde(default)]
    pub m0: Option<u64>,
    #[serde(default)]
    pub max_rounds: Option<u32>,
    #[serde(default = "default_strategies")]
    pub strategies: [StrategyConfig; 2],
}

impl RepeatedConfig {
    pub fn split(&self) -> [u64; 2] {
        let m0 = self.m0.unwrap_or(self.supply / 2 + 1);
        [m0, self.supply.saturating_sub(m0)]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultiConfig {
    pub v0: Valuation,
    pub m0: u64,
    pub leaders: Vec<Holding>,
    /// Leader bids to test as a coalition deviation, keyed by leader index.
    #[serde(default, deserialize_with = "index_map")]
    pub deviation: Option<BTreeMap<usize, Bid>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SettleLeaderConfig {
    pub index: usize,
    pub units: u64,
    pub budget: HalfUnits,
    /// Fixed bid. When absent the bid is resolved from `policy`.
    #[serde(default)]
    pub bid: Option<Bid>,
    #[serde(default)]
    pub policy: Option<BidPolicy>,
    #[serde(default)]
    pub active: Option<TimedBid>,
    #[serde(default)]
    pub choice: Option<Step2Choice>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SettleConfig {
    pub p0: Bid,
    pub m0: u64,
    pub follower_budget: HalfUnits,
    pub leaders: Vec<SettleLeaderConfig>,
    #[serde(default)]
    pub buyers: Vec<OptionBuyer>,
    #[serde(default)]
    pub acceptances: Vec<Acceptance>,
    pub option_deadline: u64,
    /// Tick at which lazy bids are resolved.
    #[serde(default)]
    pub clock: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "snake_case")]
pub enum VerifyConfig {
    /// Is `(p0, p1)` a Nash equilibrium of the one-shot game?
    Nash2p {
        v0: Valuation,
        v1: Valuation,
        #[serde(default = "one")]
        m1: u64,
        p0: Bid,
        p1: Bid,
    },
    /// Is `p1` (default: the closed form) a Stackelberg leader bid?
    Stackelberg2p {
        v0: Valuation,
        v1: Valuation,
        #[serde(default = "one")]
        m1: u64,
        #[serde(default)]
        p1: Option<Bid>,
    },
    /// Verify the multi-leader closed form, or given leader bids.
    Multi {
        v0: Valuation,
        m0: u64,
        leaders: Vec<Holding>,
        #[serde(default, deserialize_with = "index_map")]
        leader_bids: Option<BTreeMap<usize, Bid>>,
    },
    /// Exhaustive search for a profitable Markov deviation.
    Deviation {
        v0: Valuation,
        v1: Valuation,
        #[serde(alias = "M")]
        supply: u64,
        #[serde(default)]
        m0: Option<u64>,
        horizon: u32,
        #[serde(default = "default_strategies")]
        baseline: [StrategyConfig; 2],
    },
}

/// Inclusive integer range `[lo, hi]`; empty when `lo > hi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Range(pub u32, pub u32);

impl Range {
    pub fn iter(self) -> std::ops::RangeInclusive<u32> {
        self.0..=self.1
    }

    pub fn len(self) -> u64 {
        if self.0 > self.1 {
            0
        } else {
            u64::from(self.1 - self.0) + 1
        }
    }

    pub fn is_empty(self) -> bool {
        self.len() == 0
    }
}

fn unit_range() -> Range {
    Range(1, 1)
}

fn default_max_rows() -> u64 {
    100_000
}

fn six() -> usize {
    6
}

fn twelve() -> u32 {
    12
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepConfig {
    #[serde(default = "default_max_rows")]
    pub max_rows: u64,
    #[serde(flatten)]
    pub target: SweepTarget,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "target", rename_all = "snake_case")]
pub enum SweepTarget {
    Solve2p {
        v0: Range,
        v1: Range,
        #[serde(default = "unit_range")]
        m1: Range,
    },
    /// Seeded random priors.
    Bayes {
        samples: u64,
        #[serde(default = "six")]
        max_support: usize,
        #[serde(default = "twelve")]
        max_value: u32,
        v1: Range,
        #[serde(default = "one")]
        m1: u64,
    },
    /// Equilibrium play over every opening split of each supply.
    Repeated { supply: Vec<u64>, v0: Range, v1: Range },
    /// Seeded random multi-leader games.
    Multi {
        samples: u64,
        #[serde(default = "three")]
        max_leaders: usize,
        #[serde(default = "four")]
        max_units: u64,
        #[serde(default = "six_u32")]
        max_value: u32,
    },
    /// Seeded random settlements.
    Settle { samples: u64 },
}

fn three() -> usize {
    3
}

fn four() -> u64 {
    4
}

fn six_u32() -> u32 {
    6
}
