//! Exact arbitrary-precision rationals.
//!
//! Every interval endpoint, width, pivot and probability threshold in the
//! enumeration kernel is an [`ExactRational`]. Values are always kept in
//! lowest terms with a positive denominator.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};
use std::str::FromStr;

use num_bigint::{BigInt, BigUint, Sign};
use num_rational::BigRational;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;

#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct ExactRational(BigRational);

impl Ord for ExactRational {
    // cross-multiplication beats the continued-fraction comparison when one
    // side carries a long denominator
    fn cmp(&self, other: &Self) -> Ordering {
        if self.0.denom() == other.0.denom() {
            return self.0.numer().cmp(other.0.numer());
        }
        (self.0.numer() * other.0.denom()).cmp(&(other.0.numer() * self.0.denom()))
    }
}

impl PartialOrd for ExactRational {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl ExactRational {
    pub fn zero() -> Self {
        Self(BigRational::zero())
    }

    pub fn one() -> Self {
        Self(BigRational::one())
    }

    /// `numer / denom`, reduced. Fails on a zero denominator.
    pub fn new(numer: impl Into<BigInt>, denom: impl Into<BigInt>) -> Result<Self, Error> {
        let denom = denom.into();
        if denom.is_zero() {
            return Err(Error::Parse("zero denominator".into()));
        }
        let numer = numer.into();
        Ok(if denom.is_negative() {
            reduced(-numer, -denom)
        } else {
            reduced(numer, denom)
        })
    }

    /// Panicking constructor for literals in code and tests.
    pub fn ratio(numer: i64, denom: i64) -> Self {
        Self::new(numer, denom).expect("nonzero denominator")
    }

    pub fn from_integer(n: impl Into<BigInt>) -> Self {
        Self(BigRational::from_integer(n.into()))
    }

    /// `n / 2^bits` for a natural `n`.
    pub fn dyadic(n: BigUint, bits: u64) -> Self {
        let shift = n.trailing_zeros().map_or(bits, |z| z.min(bits));
        let numer = BigInt::from_biguint(Sign::Plus, n >> shift);
        let denom = BigInt::from_biguint(Sign::Plus, BigUint::one() << (bits - shift));
        Self(BigRational::new_raw(numer, denom))
    }

    pub fn numer(&self) -> &BigInt {
        self.0.numer()
    }

    pub fn denom(&self) -> &BigInt {
        self.0.denom()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_positive(&self) -> bool {
        self.0.is_positive()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn recip(&self) -> Self {
        Self(self.0.recip())
    }

    pub fn abs(&self) -> Self {
        Self(self.0.abs())
    }

    /// `2^-k`.
    pub fn pow2_neg(k: u64) -> Self {
        Self::dyadic(BigUint::one(), k)
    }

    pub fn floor_integer(&self) -> BigInt {
        self.0.floor().to_integer()
    }

    pub fn ceil_integer(&self) -> BigInt {
        self.0.ceil().to_integer()
    }

    /// Nearest integer, halves rounded away from zero.
    pub fn round_integer(&self) -> BigInt {
        self.0.round().to_integer()
    }

    /// Lossy conversion for reporting only.
    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    pub fn as_big_rational(&self) -> &BigRational {
        &self.0
    }

    /// Is `self` in the open interval `(lo, hi)`?
    pub fn in_open(&self, lo: &Self, hi: &Self) -> bool {
        self > lo && self < hi
    }
}

impl From<BigRational> for ExactRational {
    fn from(r: BigRational) -> Self {
        Self(r)
    }
}

impl From<u128> for ExactRational {
    fn from(n: u128) -> Self {
        Self::from_integer(n)
    }
}

impl From<u64> for ExactRational {
    fn from(n: u64) -> Self {
        Self::from_integer(n)
    }
}

impl From<i64> for ExactRational {
    fn from(n: i64) -> Self {
        Self::from_integer(n)
    }
}

impl fmt::Display for ExactRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.0.numer(), self.0.denom())
    }
}

impl fmt::Debug for ExactRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for ExactRational {
    type Err = Error;

    /// Accepts `"n"`, `"n/d"` and finite decimals such as `"0.05"`.
    fn from_str(s: &str) -> Result<Self, Error> {
        let s = s.trim();
        let bad = || Error::Parse(format!("not a rational: {s:?}"));
        if let Some((n, d)) = s.split_once('/') {
            let n: BigInt = n.trim().parse().map_err(|_| bad())?;
            let d: BigInt = d.trim().parse().map_err(|_| bad())?;
            return Self::new(n, d);
        }
        if let Some((int, frac)) = s.split_once('.') {
            if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
                return Err(bad());
            }
            let negative = int.starts_with('-');
            let int: BigInt = if int.is_empty() || int == "-" {
                BigInt::zero()
            } else {
                int.parse().map_err(|_| bad())?
            };
            let scale = BigInt::from(10u32).pow(frac.len() as u32);
            let frac: BigInt = frac.parse().map_err(|_| bad())?;
            let magnitude = int.abs() * &scale + frac;
            let numer = if negative { -magnitude } else { magnitude };
            return Self::new(numer, scale);
        }
        let n: BigInt = s.parse().map_err(|_| bad())?;
        Ok(Self::from_integer(n))
    }
}

impl Serialize for ExactRational {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ExactRational {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// `gcd(|a|, |b|)`, on native words when both fit.
fn gcd(a: &BigInt, b: &BigInt) -> BigInt {
    match (a.magnitude().to_u128(), b.magnitude().to_u128()) {
        (Some(x), Some(y)) => BigInt::from(gcd_u128(x, y)),
        _ => a.gcd(b),
    }
}

fn gcd_u128(mut a: u128, mut b: u128) -> u128 {
    if a == 0 || b == 0 {
        return a | b;
    }
    let shift = (a | b).trailing_zeros();
    a >>= a.trailing_zeros();
    loop {
        b >>= b.trailing_zeros();
        if a > b {
            std::mem::swap(&mut a, &mut b);
        }
        b -= a;
        if b == 0 {
            return a << shift;
        }
    }
}

/// Lowest terms of `n / d` for `d > 0`.
fn reduced(n: BigInt, d: BigInt) -> ExactRational {
    let g = gcd(&n, &d);
    if g.is_one() {
        ExactRational(BigRational::new_raw(n, d))
    } else {
        ExactRational(BigRational::new_raw(n / &g, d / g))
    }
}

fn add(a: &BigRational, b: &BigRational) -> ExactRational {
    if a.denom() == b.denom() {
        return reduced(a.numer() + b.numer(), a.denom().clone());
    }
    reduced(
        a.numer() * b.denom() + b.numer() * a.denom(),
        a.denom() * b.denom(),
    )
}

fn sub(a: &BigRational, b: &BigRational) -> ExactRational {
    if a.denom() == b.denom() {
        return reduced(a.numer() - b.numer(), a.denom().clone());
    }
    reduced(
        a.numer() * b.denom() - b.numer() * a.denom(),
        a.denom() * b.denom(),
    )
}

fn mul(a: &BigRational, b: &BigRational) -> ExactRational {
    reduced(a.numer() * b.numer(), a.denom() * b.denom())
}

fn div(a: &BigRational, b: &BigRational) -> ExactRational {
    assert!(!b.is_zero(), "division by zero");
    let (n, d) = (a.numer() * b.denom(), a.denom() * b.numer());
    if d.is_negative() {
        reduced(-n, -d)
    } else {
        reduced(n, d)
    }
}

macro_rules! forward_binop {
    ($trait:ident, $method:ident) => {
        impl<'a> $trait<&'a ExactRational> for &'a ExactRational {
            type Output = ExactRational;
            fn $method(self, rhs: &'a ExactRational) -> ExactRational {
                $method(&self.0, &rhs.0)
            }
        }
        impl $trait<ExactRational> for ExactRational {
            type Output = ExactRational;
            fn $method(self, rhs: ExactRational) -> ExactRational {
                $method(&self.0, &rhs.0)
            }
        }
        impl<'a> $trait<&'a ExactRational> for ExactRational {
            type Output = ExactRational;
            fn $method(self, rhs: &'a ExactRational) -> ExactRational {
                $method(&self.0, &rhs.0)
            }
        }
    };
}

forward_binop!(Add, add);
forward_binop!(Sub, sub);
forward_binop!(Mul, mul);
forward_binop!(Div, div);

impl AddAssign<&ExactRational> for ExactRational {
    fn add_assign(&mut self, rhs: &ExactRational) {
        *self = add(&self.0, &rhs.0);
    }
}

impl SubAssign<&ExactRational> for ExactRational {
    fn sub_assign(&mut self, rhs: &ExactRational) {
        *self = sub(&self.0, &rhs.0);
    }
}

impl Neg for ExactRational {
    type Output = ExactRational;
    fn neg(self) -> ExactRational {
        ExactRational(-self.0)
    }
}

impl PartialEq<i64> for ExactRational {
    fn eq(&self, other: &i64) -> bool {
        self.0.denom().is_one() && *self.0.numer() == BigInt::from(*other)
    }
}

impl PartialOrd<i64> for ExactRational {
    fn partial_cmp(&self, other: &i64) -> Option<Ordering> {
        Some(self.0.cmp(&BigRational::from_integer(BigInt::from(*other))))
    }
}

/// Half-open interval `[lo, hi)` with exact endpoints.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Interval {
    pub lo: ExactRational,
    pub hi: ExactRational,
}

impl Interval {
    pub fn new(lo: ExactRational, hi: ExactRational) -> Self {
        Self { lo, hi }
    }

    pub fn unit() -> Self {
        Self::new(ExactRational::zero(), ExactRational::one())
    }

    pub fn width(&self) -> ExactRational {
        &self.hi - &self.lo
    }

    pub fn is_empty(&self) -> bool {
        self.hi <= self.lo
    }

    pub fn contains(&self, r: &ExactRational) -> bool {
        &self.lo <= r && r < &self.hi
    }

    /// Whether the two half-open intervals share any point.
    pub fn intersects(&self, other: &Interval) -> bool {
        self.lo < other.hi && other.lo < self.hi
    }
}

impl fmt::Debug for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.lo, self.hi)
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q(n: i64, d: i64) -> ExactRational {
        ExactRational::ratio(n, d)
    }

    #[test]
    fn lowest_terms_and_sign() {
        let r = q(6, -8);
        assert_eq!(r.to_string(), "-3/4");
        assert_eq!(*r.denom(), BigInt::from(4));
    }

    #[test]
    fn parses_fraction_integer_and_decimal() {
        assert_eq!("3/12".parse::<ExactRational>().unwrap(), q(1, 4));
        assert_eq!("7".parse::<ExactRational>().unwrap(), q(7, 1));
        assert_eq!("0.05".parse::<ExactRational>().unwrap(), q(1, 20));
        assert_eq!("-1.5".parse::<ExactRational>().unwrap(), q(-3, 2));
        assert!("1/0".parse::<ExactRational>().is_err());
        assert!("abc".parse::<ExactRational>().is_err());
        assert!("1.".parse::<ExactRational>().is_err());
    }

    #[test]
    fn rounding() {
        assert_eq!(q(5, 2).round_integer(), BigInt::from(3));
        assert_eq!(q(7, 3).floor_integer(), BigInt::from(2));
        assert_eq!(q(7, 3).ceil_integer(), BigInt::from(3));
    }

    #[test]
    fn interval_half_open() {
        let iv = Interval::new(q(1, 4), q(1, 2));
        assert!(iv.contains(&q(1, 4)));
        assert!(!iv.contains(&q(1, 2)));
        assert!(!iv.intersects(&Interval::new(q(1, 2), q(3, 4))));
        assert!(iv.intersects(&Interval::new(q(1, 8), q(3, 8))));
    }

    #[test]
    fn serde_round_trip_as_string() {
        let r = q(-22, 7);
        let s = serde_json::to_string(&r).unwrap();
        assert_eq!(s, "\"-22/7\"");
        assert_eq!(serde_json::from_str::<ExactRational>(&s).unwrap(), r);
    }

    proptest! {
        #[test]
        fn add_then_subtract_is_identity(a in -10_000i64..10_000, b in 1i64..10_000,
                                         c in -10_000i64..10_000, d in 1i64..10_000) {
            let x = q(a, b);
            let y = q(c, d);
            prop_assert_eq!(&(&x + &y) - &y, x.clone());
            prop_assert_eq!(&(&x * &y) + &x, &x * &(&y + &ExactRational::one()));
        }

        #[test]
        fn arithmetic_matches_big_rational(a in any::<i128>(), b in 1i128..i128::MAX,
                                           c in any::<i64>(), d in 1u64..u64::MAX, e in 0u64..200) {
            let big = |n: i128, d: i128| BigRational::new(BigInt::from(n), BigInt::from(d));
            let x = ExactRational::new(a, b).unwrap();
            // push one operand past 128 bits to exercise the slow path
            let y = &ExactRational::new(c, d).unwrap() * &ExactRational::dyadic(BigUint::one(), e);
            let (bx, by) = (big(a, b), BigRational::new(BigInt::from(c), BigInt::from(d) << e));
            prop_assert_eq!(&(&x + &y).0, &(&bx + &by));
            prop_assert_eq!(&(&x - &y).0, &(&bx - &by));
            prop_assert_eq!(&(&x * &y).0, &(&bx * &by));
            if !y.is_zero() {
                prop_assert_eq!(&(&x / &y).0, &(&bx / &by));
            }
            prop_assert_eq!(x.cmp(&y), bx.cmp(&by));
        }
    }
}
