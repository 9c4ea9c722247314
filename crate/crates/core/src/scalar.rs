//! Exact scalar abstraction.
//!
//! Every quantity in the model (recovery rates, weights, assets) is carried by
//! a [`Scalar`]. The trait is implemented for every `num_rational::Ratio<I>`
//! over a signed integer type, so the same code runs on arbitrary precision
//! (`BigRational`) or on fixed-width rationals (`Ratio<i64>`) when the caller
//! knows the denominators stay small. Floating point types are deliberately not
//! scalars: cycle detection and equilibrium checks need exact equality.

use std::fmt::{Debug, Display};
use std::hash::Hash;
use std::str::FromStr;

use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{FromPrimitive, Num, Signed, ToPrimitive};

pub trait Scalar:
    Clone + Ord + Hash + Debug + Display + FromStr + Num + Signed + Send + Sync + 'static
{
    fn from_int(value: i64) -> Self;

    fn from_frac(numer: i64, denom: i64) -> Self {
        Self::from_int(numer) / Self::from_int(denom)
    }

    /// Non-authoritative decimal approximation, for display only.
    fn approx(&self) -> f64;

    /// Canonical textual form: `"p"` for integers, `"p/q"` otherwise.
    fn render(&self) -> String {
        self.to_string()
    }

    fn parse_exact(text: &str) -> Option<Self> {
        let text = text.trim();
        if text.is_empty() || text.contains(['.', 'e', 'E', ' ']) {
            return None;
        }
        if let Some((_, q)) = text.split_once('/') {
            if q.starts_with(['-', '+']) {
                return None;
            }
        }
        Self::from_str(text).ok()
    }

    fn is_unit_interval(&self) -> bool {
        !self.is_negative() && *self <= Self::one()
    }
}

impl<I> Scalar for Ratio<I>
where
    I: Integer
        + Signed
        + Clone
        + Hash
        + Debug
        + Display
        + FromStr
        + FromPrimitive
        + ToPrimitive
        + Send
        + Sync
        + 'static,
{
    fn from_int(value: i64) -> Self {
        Ratio::from_integer(I::from_i64(value).expect("integer fits scalar"))
    }

    fn approx(&self) -> f64 {
        let n = self.numer().to_f64().unwrap_or(f64::NAN);
        let d = self.denom().to_f64().unwrap_or(f64::NAN);
        n / d
    }
}

/// The clamp used by the recovery function and the clearing solver.
pub fn clamp_unit<S: Scalar>(value: S) -> S {
    if value.is_negative() {
        S::zero()
    } else if value > S::one() {
        S::one()
    } else {
        value
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;

    type Q = Ratio<BigInt>;

    #[test]
    fn renders_canonical_forms() {
        assert_eq!(Q::from_frac(2, 4).render(), "1/2");
        assert_eq!(Q::from_int(3).render(), "3");
        assert_eq!(Q::from_frac(-6, 4).render(), "-3/2");
    }

    #[test]
    fn parses_only_exact_text() {
        assert_eq!(Q::parse_exact("4/9"), Some(Q::from_frac(4, 9)));
        assert_eq!(Q::parse_exact("7"), Some(Q::from_int(7)));
        assert_eq!(Q::parse_exact("0.5"), None);
        assert_eq!(Q::parse_exact("1/0"), None);
        assert_eq!(Q::parse_exact(""), None);
        assert_eq!(Q::parse_exact("1e3"), None);
    }

    #[test]
    fn fixed_width_rationals_are_scalars() {
        let x = Ratio::<i64>::from_frac(3, 11);
        assert!((x.approx() - 3.0 / 11.0).abs() < 1e-12);
        assert!(x.is_unit_interval());
        assert_eq!(
            clamp_unit(Ratio::<i64>::from_int(2)),
            Ratio::<i64>::from_int(1)
        );
    }
}
