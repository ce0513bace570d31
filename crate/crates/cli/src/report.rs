//! Report envelope and exact number formatting.

use absnft_core::{BigRational, HalfUnits};
use num_traits::ToPrimitive;
use serde::{Serialize, Serializer};

use crate::config::ScenarioConfig;

pub const ARTIFACT: &str = "absnft";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Serialize)]
pub struct Report<'a, R: Serialize> {
    pub artifact: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub seed: u64,
    pub bound: Option<u32>,
    pub grid: Option<u32>,
    pub scenario: &'a ScenarioConfig,
    pub result: R,
}

/// A rational as `[num, den]`, with integers when they fit and decimal
/// strings otherwise.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Exact(pub BigRational);

impl Serialize for Exact {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match (self.0.numer().to_i64(), self.0.denom().to_i64()) {
            (Some(n), Some(d)) => (n, d).serialize(s),
            _ => (self.0.numer().to_string(), self.0.denom().to_string()).serialize(s),
        }
    }
}

/// `n/d`, or `n` for integers.
pub fn fraction_text(r: &BigRational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn money_text(h: HalfUnits) -> String {
    match h.whole_units() {
        Some(u) => u.to_string(),
        None => format!("{}/2", h.halves()),
    }
}
