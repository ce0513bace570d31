//! Exact money.
//!
//! Every price in the repurchase mechanism is either a bid midpoint
//! `(p0 + pi) / 2` or a midpoint shaved by half a unit, so all amounts are
//! representable as an integer count of half currency units.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

/// A signed amount of money, counted in half currency units.
///
/// Serializes as a reduced `[numerator, denominator]` pair of currency
/// units. Deserializes from such a pair or from a bare integer.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "MoneyRepr", into = "MoneyRepr")]
pub struct HalfUnits(i64);

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum MoneyRepr {
    Units(i64),
    Fraction(i64, i64),
}

impl From<HalfUnits> for MoneyRepr {
    fn from(h: HalfUnits) -> MoneyRepr {
        match h.whole_units() {
            Some(u) => MoneyRepr::Fraction(u, 1),
            None => MoneyRepr::Fraction(h.0, 2),
        }
    }
}

impl TryFrom<MoneyRepr> for HalfUnits {
    type Error = String;
    fn try_from(r: MoneyRepr) -> Result<HalfUnits, String> {
        match r {
            MoneyRepr::Units(u) => u
                .checked_mul(2)
                .map(HalfUnits)
                .ok_or_else(|| format!("{u} is out of range")),
            MoneyRepr::Fraction(_, 0) => Err("zero denominator".into()),
            MoneyRepr::Fraction(n, d) => match n.checked_mul(2) {
                Some(twice) if twice % d == 0 => Ok(HalfUnits(twice / d)),
                _ => Err(format!("{n}/{d} is not a whole number of half units")),
            },
        }
    }
}

impl HalfUnits {
    pub const ZERO: HalfUnits = HalfUnits(0);
    /// Half of one currency unit.
    pub const HALF: HalfUnits = HalfUnits(1);

    pub const fn from_halves(halves: i64) -> Self {
        HalfUnits(halves)
    }

    pub const fn from_units(units: i64) -> Self {
        HalfUnits(units * 2)
    }

    pub const fn halves(self) -> i64 {
        self.0
    }

    /// Whole currency units, if the amount has no half part.
    pub const fn whole_units(self) -> Option<i64> {
        if self.0 % 2 == 0 {
            Some(self.0 / 2)
        } else {
            None
        }
    }

    pub const fn is_negative(self) -> bool {
        self.0 < 0
    }

    pub fn abs(self) -> Self {
        HalfUnits(self.0.abs())
    }
}

impl fmt::Display for HalfUnits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let mag = self.0.unsigned_abs();
        if mag.is_multiple_of(2) {
            write!(f, "{sign}{}", mag / 2)
        } else {
            write!(f, "{sign}{}.5", mag / 2)
        }
    }
}

impl Add for HalfUnits {
    type Output = HalfUnits;
    fn add(self, rhs: HalfUnits) -> HalfUnits {
        HalfUnits(self.0 + rhs.0)
    }
}

impl AddAssign for HalfUnits {
    fn add_assign(&mut self, rhs: HalfUnits) {
        self.0 += rhs.0;
    }
}

impl Sub for HalfUnits {
    type Output = HalfUnits;
    fn sub(self, rhs: HalfUnits) -> HalfUnits {
        HalfUnits(self.0 - rhs.0)
    }
}

impl SubAssign for HalfUnits {
    fn sub_assign(&mut self, rhs: HalfUnits) {
        self.0 -= rhs.0;
    }
}

impl Neg for HalfUnits {
    type Output = HalfUnits;
    fn neg(self) -> HalfUnits {
        HalfUnits(-self.0)
    }
}

/// Scaling by a unit count.
impl Mul<i64> for HalfUnits {
    type Output = HalfUnits;
    fn mul(self, rhs: i64) -> HalfUnits {
        HalfUnits(self.0 * rhs)
    }
}

impl Mul<u64> for HalfUnits {
    type Output = HalfUnits;
    fn mul(self, rhs: u64) -> HalfUnits {
        HalfUnits(self.0 * rhs as i64)
    }
}

impl Sum for HalfUnits {
    fn sum<I: Iterator<Item = HalfUnits>>(iter: I) -> HalfUnits {
        iter.fold(HalfUnits::ZERO, Add::add)
    }
}

impl<'a> Sum<&'a HalfUnits> for HalfUnits {
    fn sum<I: Iterator<Item = &'a HalfUnits>>(iter: I) -> HalfUnits {
        iter.copied().sum()
    }
}
