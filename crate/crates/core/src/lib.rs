//! Securitization and repurchase of non-fungible tokens.
//!
//! The crate models the full lifecycle of a fractionalized NFT:
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`ledger`] | complete/securitized NFT state machine |
//! | [`mechanism`] | the pairwise repurchase rule and its exact payoffs |
//! | [`two_player`] | single-round Stackelberg equilibrium |
//! | [`bayes`] | leader bidding against a discrete prior |
//! | [`repeated`] | repeated two-player repurchase game engine |
//! | [`multiplayer`] | many leaders, one follower, coalition analysis |
//! | [`settlement`] | budget-constrained payment procedure and lazy bidders |
//! | [`oracle`] | brute-force verification of every closed form |
//!
//! Money is exact throughout ([`HalfUnits`]); probabilities use any
//! [`ExactScalar`], with [`Rational`] as the default.

pub mod bayes;
pub mod ledger;
pub mod mechanism;
pub mod money;
pub mod multiplayer;
pub mod oracle;
pub mod repeated;
pub mod scalar;
pub mod settlement;
pub mod two_player;

pub use bayes::DiscreteValueDistribution;
pub use ledger::{Address, LedgerState, TokenId};
pub use mechanism::{Bid, Valuation};
pub use money::HalfUnits;
pub use multiplayer::{Holding, MultiplayerGame};
pub use repeated::{RepeatedGame, RepeatedState};
pub use scalar::ExactScalar;
pub use two_player::EquilibriumProfile2P;

/// Default probability scalar.
pub type Rational = num_rational::Ratio<i64>;
/// Arbitrary-precision probability scalar.
pub type BigRational = num_rational::BigRational;
/// Prior over follower values with [`Rational`] probabilities.
pub type Distribution = DiscreteValueDistribution<Rational>;
