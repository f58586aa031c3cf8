//! Numeric abstraction shared by every algorithmic module.
//!
//! All certification work runs on exact rationals ([`crate::Rational`]);
//! `f64` and fixed-width ratios instantiate the same code for quick
//! approximate runs.

use std::fmt::{Debug, Display};

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{FromPrimitive, Num, NumAssign, Signed, ToPrimitive};

/// A totally-behaved ordered field element.
///
/// Equality is exact for the rational instantiations; for floating point
/// it is the caller's business.
pub trait Scalar:
    Clone + Debug + Display + PartialOrd + Num + NumAssign + Signed + FromPrimitive + ToPrimitive + Send + Sync + 'static
{
    /// `num / den` as a scalar.
    fn ratio(num: i64, den: i64) -> Self {
        Self::from_i64(num).expect("integer fits scalar") / Self::from_i64(den).expect("integer fits scalar")
    }

    fn from_int(v: i64) -> Self {
        Self::from_i64(v).expect("integer fits scalar")
    }

    fn from_count(v: u32) -> Self {
        Self::from_u32(v).expect("integer fits scalar")
    }

    fn approx(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Magnitude below which a value counts as zero. Zero for exact types.
    fn tolerance() -> Self {
        Self::zero()
    }

    fn near(&self, other: &Self) -> bool {
        (self.clone() - other.clone()).abs() <= Self::tolerance()
    }

    /// Strictly positive beyond [`Scalar::tolerance`].
    fn clearly_positive(&self) -> bool {
        *self > Self::tolerance()
    }
}

impl Scalar for f64 {
    fn tolerance() -> Self {
        1e-12
    }
}

impl Scalar for f32 {
    fn tolerance() -> Self {
        1e-5
    }
}

impl Scalar for BigRational {}
impl Scalar for Ratio<i64> {}
impl Scalar for Ratio<i128> {}

/// Smaller of two partially ordered values (left-biased on ties).
pub fn min_of<S: Scalar>(a: S, b: S) -> S {
    if b < a {
        b
    } else {
        a
    }
}

/// Exact `p/q` rendering used by every machine-readable report.
pub fn exact_string(r: &BigRational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Parses `p/q`, `p`, or a finite decimal such as `1.5`.
pub fn parse_rational(s: &str) -> Option<BigRational> {
    let s = s.trim();
    if let Some((p, q)) = s.split_once('/') {
        let p: BigInt = p.trim().parse().ok()?;
        let q: BigInt = q.trim().parse().ok()?;
        if q == BigInt::from(0) {
            return None;
        }
        return Some(BigRational::new(p, q));
    }
    if let Some((int, frac)) = s.split_once('.') {
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        let neg = int.starts_with('-');
        let int_digits = int.trim_start_matches(['-', '+']);
        let digits = format!("{}{}", if int_digits.is_empty() { "0" } else { int_digits }, frac);
        let mut num: BigInt = digits.parse().ok()?;
        if neg {
            num = -num;
        }
        let den = num_traits::pow(BigInt::from(10), frac.len());
        return Some(BigRational::new(num, den));
    }
    s.parse::<BigInt>().ok().map(BigRational::from_integer)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_is_exact_for_rationals() {
        let third = BigRational::ratio(1, 3);
        assert_eq!(third.clone() + third.clone() + third, BigRational::from_int(1));
    }

    #[test]
    fn parse_forms() {
        assert_eq!(parse_rational("11/6"), Some(BigRational::ratio(11, 6)));
        assert_eq!(parse_rational("1.5"), Some(BigRational::ratio(3, 2)));
        assert_eq!(parse_rational("-0.25"), Some(BigRational::ratio(-1, 4)));
        assert_eq!(parse_rational("2"), Some(BigRational::from_int(2)));
        assert_eq!(parse_rational("1/0"), None);
        assert_eq!(parse_rational("x"), None);
        assert_eq!(exact_string(&BigRational::from_int(0)), "0/1");
    }
}
