//! Complete and securitized NFT bookkeeping.
//!
//! A [`LedgerState`] is an immutable value: every operation returns a new
//! state or an error, leaving the input untouched, so traces can be replayed
//! and states shared freely across threads.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Escrow identifier that holds every frozen complete NFT.
pub const FROZEN_ADDR: &str = "FROZEN";

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Address(String);

impl Address {
    /// A user address. Empty identifiers and the escrow identifier are rejected.
    pub fn new(id: impl Into<String>) -> Result<Self, LedgerError> {
        let id = id.into();
        if id.is_empty() {
            return Err(LedgerError::EmptyAddress);
        }
        if id == FROZEN_ADDR {
            return Err(LedgerError::ReservedAddress);
        }
        Ok(Address(id))
    }

    pub fn frozen() -> Self {
        Address(FROZEN_ADDR.to_owned())
    }

    pub fn is_frozen(&self) -> bool {
        self.0 == FROZEN_ADDR
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenId(pub u64);

impl fmt::Display for TokenId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompleteNftRecord {
    pub token: TokenId,
    pub owner: Address,
    pub frozen: bool,
}

/// Share balances of one securitized NFT. Zero balances are never stored.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BalanceBook {
    pub token: TokenId,
    pub total_supply: u64,
    pub balances: BTreeMap<Address, u64>,
}

impl BalanceBook {
    pub fn balance_of(&self, holder: &Address) -> u64 {
        self.balances.get(holder).copied().unwrap_or(0)
    }

    /// The strict-majority holder, if any.
    pub fn majority_holder(&self) -> Option<&Address> {
        self.balances
            .iter()
            .find(|(_, &b)| 2 * b > self.total_supply)
            .map(|(a, _)| a)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LedgerError {
    #[error("address identifier is empty")]
    EmptyAddress,
    #[error("the escrow address cannot take part in user operations")]
    ReservedAddress,
    #[error("token {0} does not exist")]
    UnknownToken(TokenId),
    #[error("token {0} already exists")]
    TokenExists(TokenId),
    #[error("{sender} does not own token {token}")]
    NotOwner { sender: Address, token: TokenId },
    #[error("token {0} is already securitized")]
    AlreadySecuritized(TokenId),
    #[error("token {0} is frozen")]
    Frozen(TokenId),
    #[error("amount must be positive")]
    ZeroAmount,
    #[error("{holder} holds {balance} shares of {token}, needs {needed}")]
    InsufficientBalance {
        holder: Address,
        token: TokenId,
        balance: u64,
        needed: u64,
    },
    #[error("{sender} does not hold the entire supply of {token}")]
    NotSoleHolder { sender: Address, token: TokenId },
}

/// A broken ledger invariant, reported by [`LedgerState::check_invariants`].
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InvariantViolation {
    #[error("balances of {0} do not sum to its total supply")]
    Conservation(TokenId),
    #[error("token {0}: supply, frozen flag and escrow ownership disagree")]
    FreezeCoupling(TokenId),
    #[error("token {0} stores a zero balance")]
    ZeroEntry(TokenId),
    #[error("balance book for {0} has no complete NFT record")]
    OrphanBook(TokenId),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerState {
    pub nfts: BTreeMap<TokenId, CompleteNftRecord>,
    pub books: BTreeMap<TokenId, BalanceBook>,
}

fn user(addr: &Address) -> Result<(), LedgerError> {
    if addr.is_frozen() {
        Err(LedgerError::ReservedAddress)
    } else {
        Ok(())
    }
}

impl LedgerState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Create a fresh, unfrozen complete NFT.
    pub fn mint(&self, token: TokenId, owner: &Address) -> Result<Self, LedgerError> {
        user(owner)?;
        if self.nfts.contains_key(&token) {
            return Err(LedgerError::TokenExists(token));
        }
        let mut next = self.clone();
        next.nfts.insert(
            token,
            CompleteNftRecord {
                token,
                owner: owner.clone(),
                frozen: false,
            },
        );
        Ok(next)
    }

    pub fn owner_of(&self, token: TokenId) -> Result<&Address, LedgerError> {
        self.record(token).map(|r| &r.owner)
    }

    pub fn total_supply(&self, token: TokenId) -> u64 {
        self.books.get(&token).map_or(0, |b| b.total_supply)
    }

    pub fn balance_of(&self, holder: &Address, token: TokenId) -> u64 {
        self.books.get(&token).map_or(0, |b| b.balance_of(holder))
    }

    pub fn book(&self, token: TokenId) -> Option<&BalanceBook> {
        self.books.get(&token)
    }

    fn record(&self, token: TokenId) -> Result<&CompleteNftRecord, LedgerError> {
        self.nfts.get(&token).ok_or(LedgerError::UnknownToken(token))
    }

    /// Freeze a complete NFT and mint `amount` shares to `recipient`.
    pub fn securitize(
        &self,
        sender: &Address,
        recipient: &Address,
        token: TokenId,
        amount: u64,
    ) -> Result<Self, LedgerError> {
        user(sender)?;
        user(recipient)?;
        let record = self.record(token)?;
        if record.frozen {
            return Err(LedgerError::AlreadySecuritized(token));
        }
        if &record.owner != sender {
            return Err(LedgerError::NotOwner {
                sender: sender.clone(),
                token,
            });
        }
        if amount == 0 {
            return Err(LedgerError::ZeroAmount);
        }
        let mut next = self.clone();
        next.books.insert(
            token,
            BalanceBook {
                token,
                total_supply: amount,
                balances: BTreeMap::from([(recipient.clone(), amount)]),
            },
        );
        next.nfts.insert(
            token,
            CompleteNftRecord {
                token,
                owner: Address::frozen(),
                frozen: true,
            },
        );
        Ok(next)
    }

    pub fn snft_transfer(
        &self,
        from: &Address,
        to: &Address,
        token: TokenId,
        amount: u64,
    ) -> Result<Self, LedgerError> {
        user(from)?;
        user(to)?;
        if amount == 0 {
            return Err(LedgerError::ZeroAmount);
        }
        let book = self.books.get(&token).ok_or(LedgerError::UnknownToken(token))?;
        let balance = book.balance_of(from);
        if balance < amount {
            return Err(LedgerError::InsufficientBalance {
                holder: from.clone(),
                token,
                balance,
                needed: amount,
            });
        }
        if from == to {
            return Ok(self.clone());
        }
        let mut next = self.clone();
        let balances = &mut next.books.get_mut(&token).expect("checked above").balances;
        if balance == amount {
            balances.remove(from);
        } else {
            balances.insert(from.clone(), balance - amount);
        }
        *balances.entry(to.clone()).or_insert(0) += amount;
        Ok(next)
    }

    pub fn cnft_transfer(&self, from: &Address, to: &Address, token: TokenId) -> Result<Self, LedgerError> {
        user(from)?;
        user(to)?;
        let record = self.record(token)?;
        if record.frozen {
            return Err(LedgerError::Frozen(token));
        }
        if &record.owner != from {
            return Err(LedgerError::NotOwner {
                sender: from.clone(),
                token,
            });
        }
        let mut next = self.clone();
        next.nfts.get_mut(&token).expect("checked above").owner = to.clone();
        Ok(next)
    }

    /// Burn every share and hand the unfrozen NFT to `recipient`.
    pub fn restruct(&self, sender: &Address, recipient: &Address, token: TokenId) -> Result<Self, LedgerError> {
        user(sender)?;
        user(recipient)?;
        self.record(token)?;
        let sole = self
            .books
            .get(&token)
            .is_some_and(|b| b.total_supply > 0 && b.balance_of(sender) == b.total_supply);
        if !sole {
            return Err(LedgerError::NotSoleHolder {
                sender: sender.clone(),
                token,
            });
        }
        let mut next = self.clone();
        let book = next.books.get_mut(&token).expect("checked above");
        book.total_supply = 0;
        book.balances.clear();
        next.nfts.insert(
            token,
            CompleteNftRecord {
                token,
                owner: recipient.clone(),
                frozen: false,
            },
        );
        Ok(next)
    }

    /// Whether `holder` owns a strict majority of the shares of `token`.
    pub fn can_trigger_repurchase(&self, holder: &Address, token: TokenId) -> Result<bool, LedgerError> {
        let book = self.books.get(&token).ok_or(LedgerError::UnknownToken(token))?;
        Ok(2 * book.balance_of(holder) > book.total_supply)
    }

    /// Apply a batch of share transfers in order, failing on the first error.
    pub fn apply_transfers<'a, I>(&self, token: TokenId, transfers: I) -> Result<Self, LedgerError>
    where
        I: IntoIterator<Item = (&'a Address, &'a Address, u64)>,
    {
        transfers
            .into_iter()
            .try_fold(self.clone(), |state, (from, to, amount)| {
                state.snft_transfer(from, to, token, amount)
            })
    }

    pub fn check_invariants(&self) -> Result<(), InvariantViolation> {
        for (&token, record) in &self.nfts {
            let supply = self.total_supply(token);
            let coupled = (supply > 0) == record.frozen && record.frozen == record.owner.is_frozen();
            if !coupled {
                return Err(InvariantViolation::FreezeCoupling(token));
            }
        }
        for (&token, book) in &self.books {
            if !self.nfts.contains_key(&token) {
                return Err(InvariantViolation::OrphanBook(token));
            }
            if book.balances.values().any(|&b| b == 0) {
                return Err(InvariantViolation::ZeroEntry(token));
            }
            if book.balances.values().sum::<u64>() != book.total_supply {
                return Err(InvariantViolation::Conservation(token));
            }
        }
        Ok(())
    }
}
