//! Exact utilities with an infinitesimal tie-breaker.
//!
//! A [`Value`] is `base + tag·ε` for an infinitesimal ε > 0. Bundle tags are
//! sums of `2^g` over the goods in the bundle, so two different bundles never
//! compare equal for the same valuation.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};

pub type Rational = BigRational;

/// Parses `"p/q"` or an integer. Decimal notation is rejected on purpose.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    if s.contains('.') || s.contains('e') || s.contains('E') {
        return Err(Error::input(format!(
            "decimal value {s:?} not accepted, write an exact fraction such as 2/3"
        )));
    }
    let r: Rational = s
        .parse()
        .map_err(|_| Error::input(format!("cannot parse {s:?} as a rational p/q")))?;
    Ok(r)
}

pub fn rational(p: i64, q: i64) -> Rational {
    Rational::new(BigInt::from(p), BigInt::from(q))
}

pub fn int(p: i64) -> Rational {
    Rational::from_integer(BigInt::from(p))
}

pub fn format_rational(r: &Rational) -> String {
    r.to_string()
}

pub fn pow2(g: usize) -> Rational {
    Rational::from_integer(BigInt::one() << g)
}

pub fn ceil(r: &Rational) -> BigInt {
    r.ceil().to_integer()
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Value {
    base: Rational,
    tag: Rational,
}

impl Value {
    pub fn new(base: Rational, tag: Rational) -> Self {
        Value { base, tag }
    }

    pub fn zero() -> Self {
        Value::default()
    }

    pub fn base(&self) -> &Rational {
        &self.base
    }

    pub fn tag(&self) -> &Rational {
        &self.tag
    }

    pub fn is_zero(&self) -> bool {
        self.base.is_zero() && self.tag.is_zero()
    }

    pub fn is_positive(&self) -> bool {
        self.base.is_positive() || (self.base.is_zero() && self.tag.is_positive())
    }

    pub fn scale(&self, alpha: &Rational) -> Value {
        Value {
            base: &self.base * alpha,
            tag: &self.tag * alpha,
        }
    }
}

impl Ord for Value {
    fn cmp(&self, other: &Self) -> Ordering {
        self.base
            .cmp(&other.base)
            .then_with(|| self.tag.cmp(&other.tag))
    }
}

impl PartialOrd for Value {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Add<&Value> for &Value {
    type Output = Value;
    fn add(self, rhs: &Value) -> Value {
        Value {
            base: &self.base + &rhs.base,
            tag: &self.tag + &rhs.tag,
        }
    }
}

impl Add for Value {
    type Output = Value;
    fn add(mut self, rhs: Value) -> Value {
        self += &rhs;
        self
    }
}

impl AddAssign<&Value> for Value {
    fn add_assign(&mut self, rhs: &Value) {
        self.base += &rhs.base;
        self.tag += &rhs.tag;
    }
}

impl Sub<&Value> for &Value {
    type Output = Value;
    fn sub(self, rhs: &Value) -> Value {
        Value {
            base: &self.base - &rhs.base,
            tag: &self.tag - &rhs.tag,
        }
    }
}

impl<'a> std::iter::Sum<&'a Value> for Value {
    fn sum<I: Iterator<Item = &'a Value>>(iter: I) -> Value {
        let mut acc = Value::zero();
        for v in iter {
            acc += v;
        }
        acc
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.tag.is_zero() {
            write!(f, "{}", self.base)
        } else {
            write!(f, "{}+{}e", self.base, self.tag)
        }
    }
}
