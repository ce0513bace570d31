//! Exact scalar types for probabilities and expectations.
//!
//! Only exact types implement [`ExactScalar`]; equilibrium computations
//! compare expectations for equality, which floats cannot do reliably.

use std::fmt;

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::Signed;

use crate::money::HalfUnits;

pub trait ExactScalar: Clone + Ord + Signed + fmt::Debug + fmt::Display + Send + Sync + 'static {
    /// `num / den`, or `None` when `den == 0` or the value does not fit.
    fn from_fraction(num: i64, den: i64) -> Option<Self>;

    fn from_int(n: i64) -> Self {
        Self::from_fraction(n, 1).expect("integers are representable")
    }

    fn from_half_units(amount: HalfUnits) -> Self {
        Self::from_fraction(amount.halves(), 2).expect("halves are representable")
    }

    /// Reduced numerator and positive denominator, as decimal strings.
    fn to_fraction_strings(&self) -> (String, String);
}

macro_rules! impl_machine_ratio {
    ($int:ty) => {
        impl ExactScalar for Ratio<$int> {
            fn from_fraction(num: i64, den: i64) -> Option<Self> {
                if den == 0 {
                    return None;
                }
                let num = <$int>::try_from(num).ok()?;
                let den = <$int>::try_from(den).ok()?;
                Some(Ratio::new(num, den))
            }

            fn to_fraction_strings(&self) -> (String, String) {
                (self.numer().to_string(), self.denom().to_string())
            }
        }
    };
}

impl_machine_ratio!(i64);
impl_machine_ratio!(i128);

impl ExactScalar for BigRational {
    fn from_fraction(num: i64, den: i64) -> Option<Self> {
        if den == 0 {
            return None;
        }
        Some(Ratio::new(BigInt::from(num), BigInt::from(den)))
    }

    fn to_fraction_strings(&self) -> (String, String) {
        (self.numer().to_string(), self.denom().to_string())
    }
}

/// Parse a fraction given as decimal numerator/denominator strings.
pub fn parse_fraction<P: ExactScalar>(num: &str, den: &str) -> Option<P> {
    let num: i64 = num.trim().parse().ok()?;
    let den: i64 = den.trim().parse().ok()?;
    P::from_fraction(num, den)
}
