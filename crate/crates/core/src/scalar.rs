//! Probability scalars: exact rationals or double precision.
//!
//! Every law and series in the crate is generic over [`Scalar`]. The exact
//! instance is [`Rational`] (arbitrary precision), the float instance is
//! `f64`. Tolerances that differ between the two live here.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, One, Signed, ToPrimitive, Zero};
use thiserror::Error;

pub type Rational = BigRational;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScalarError {
    #[error("cannot parse probability {0:?}")]
    Parse(String),
    #[error("value {0} is not representable in this arithmetic")]
    NotRepresentable(String),
    #[error("fixed point ~{approx} is not a rational with a small denominator; use float arithmetic")]
    IrrationalFixedPoint { approx: f64 },
    #[error("fixed-point iteration did not converge")]
    NoConvergence,
}

/// Arithmetic mode requested by configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arith {
    Exact,
    Float,
}

pub trait Scalar:
    Num
    + Signed
    + Clone
    + PartialOrd
    + Debug
    + Display
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Send
    + Sync
    + 'static
{
    const EXACT: bool;

    fn from_ratio(num: i64, den: i64) -> Self;

    /// Accepts decimals (`0.25`) and fractions (`1/4`).
    fn parse(text: &str) -> Result<Self, ScalarError>;

    fn as_f64(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Support threshold: `> 0` exactly, `> 1e-14` in floating point.
    fn is_positive_mass(&self) -> bool;

    /// Normalization tolerance: zero for exact arithmetic.
    fn normalization_tolerance() -> f64;

    /// Tolerance for "mean equals one".
    fn criticality_tolerance() -> f64;

    fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        if Self::EXACT {
            self == other
        } else {
            (self.clone() - other.clone()).abs().as_f64() <= tol
        }
    }

    fn pow_u(&self, exp: u32) -> Self {
        let mut acc = Self::one();
        for _ in 0..exp {
            acc = acc * self.clone();
        }
        acc
    }

    fn binomial(n: u64, k: u64) -> Self {
        if k > n {
            return Self::zero();
        }
        let k = k.min(n - k);
        let mut acc = Self::one();
        for i in 0..k {
            acc = acc * Self::from_u64(n - i).unwrap() / Self::from_u64(i + 1).unwrap();
        }
        acc
    }

    /// Smallest root in `[0, 1]` of `s = poly(s)`, `poly` having non-negative
    /// coefficients (lowest degree first).
    fn smallest_fixed_point(poly: &[Self]) -> Result<Self, ScalarError>;

    /// `n/d` rendering for exact values.
    fn rational_string(&self) -> Option<String> {
        None
    }

    fn from_rational(r: &Rational) -> Result<Self, ScalarError>;
}

pub(crate) fn eval_poly<S: Clone + Num>(poly: &[S], s: &S) -> S {
    poly.iter()
        .rev()
        .fold(S::zero(), |acc, c| acc * s.clone() + c.clone())
}

fn eval_poly_derivative_f64(poly: &[f64], s: f64) -> f64 {
    poly.iter()
        .enumerate()
        .skip(1)
        .rev()
        .fold(0.0, |acc, (j, c)| acc * s + j as f64 * c)
}

// Newton from zero is monotone for the convex map s -> poly(s) - s.
fn newton_smallest_fixed_point(poly: &[f64]) -> Result<f64, ScalarError> {
    let mut s = 0.0f64;
    for _ in 0..10_000 {
        let g = eval_poly(poly, &s) - s;
        let dg = eval_poly_derivative_f64(poly, s) - 1.0;
        if g.abs() < 1e-17 || dg >= 0.0 {
            return Ok(s);
        }
        let next = s - g / dg;
        if !(next.is_finite()) {
            return Err(ScalarError::NoConvergence);
        }
        // iterates increase until rounding takes over
        if next <= s || next - s <= 4.0 * f64::EPSILON * next {
            return Ok(next.max(s));
        }
        s = next;
    }
    Err(ScalarError::NoConvergence)
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn from_ratio(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }

    fn parse(text: &str) -> Result<Self, ScalarError> {
        let text = text.trim();
        if let Some((n, d)) = text.split_once('/') {
            let n: f64 = n.trim().parse().map_err(|_| ScalarError::Parse(text.into()))?;
            let d: f64 = d.trim().parse().map_err(|_| ScalarError::Parse(text.into()))?;
            return Ok(n / d);
        }
        text.parse().map_err(|_| ScalarError::Parse(text.into()))
    }

    fn is_positive_mass(&self) -> bool {
        *self > 1e-14
    }

    fn normalization_tolerance() -> f64 {
        1e-12
    }

    fn criticality_tolerance() -> f64 {
        1e-8
    }

    fn smallest_fixed_point(poly: &[Self]) -> Result<Self, ScalarError> {
        if poly.first().is_none_or(|c| *c == 0.0) {
            return Ok(0.0);
        }
        newton_smallest_fixed_point(poly)
    }

    fn from_rational(r: &Rational) -> Result<Self, ScalarError> {
        r.to_f64()
            .ok_or_else(|| ScalarError::NotRepresentable(r.to_string()))
    }
}

/// Continued-fraction convergents of `x`, denominators up to `max_den`.
fn convergents(x: f64, max_den: i64) -> Vec<Rational> {
    let mut out = Vec::new();
    let (mut h0, mut h1) = (BigInt::zero(), BigInt::one());
    let (mut k0, mut k1) = (BigInt::one(), BigInt::zero());
    let mut rem = x;
    for _ in 0..64 {
        let a = rem.floor();
        let ai = BigInt::from_f64(a).unwrap_or_default();
        let h2 = &ai * &h1 + &h0;
        let k2 = &ai * &k1 + &k0;
        if k2 > BigInt::from(max_den) {
            break;
        }
        out.push(Rational::new(h2.clone(), k2.clone()));
        h0 = std::mem::replace(&mut h1, h2);
        k0 = std::mem::replace(&mut k1, k2);
        let frac = rem - a;
        if frac.abs() < 1e-15 {
            break;
        }
        rem = 1.0 / frac;
    }
    out
}

impl Scalar for Rational {
    const EXACT: bool = true;

    fn from_ratio(num: i64, den: i64) -> Self {
        Rational::new(BigInt::from(num), BigInt::from(den))
    }

    fn parse(text: &str) -> Result<Self, ScalarError> {
        let text = text.trim();
        let err = || ScalarError::Parse(text.to_string());
        if let Some((n, d)) = text.split_once('/') {
            let n: BigInt = n.trim().parse().map_err(|_| err())?;
            let d: BigInt = d.trim().parse().map_err(|_| err())?;
            if d.is_zero() {
                return Err(err());
            }
            return Ok(Rational::new(n, d));
        }
        // Decimal literal: read digits exactly rather than through f64.
        let (neg, body) = match text.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, text),
        };
        let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(err());
        }
        let digits = format!("{int_part}{frac_part}");
        if !digits.chars().all(|c| c.is_ascii_digit()) {
            return Err(err());
        }
        let num: BigInt = digits.parse().map_err(|_| err())?;
        let den = num_traits::pow(BigInt::from(10u32), frac_part.len());
        let value = Rational::new(num, den);
        Ok(if neg { -value } else { value })
    }

    fn is_positive_mass(&self) -> bool {
        self.is_positive()
    }

    fn normalization_tolerance() -> f64 {
        0.0
    }

    fn criticality_tolerance() -> f64 {
        0.0
    }

    fn smallest_fixed_point(poly: &[Self]) -> Result<Self, ScalarError> {
        if poly.first().is_none_or(|c| c.is_zero()) {
            return Ok(Rational::zero());
        }
        let floats: Vec<f64> = poly.iter().map(|c| c.as_f64()).collect();
        let approx = newton_smallest_fixed_point(&floats)?;
        for candidate in convergents(approx, 1_000_000_000_000) {
            if candidate.is_negative() {
                continue;
            }
            if eval_poly(poly, &candidate) == candidate {
                return Ok(candidate);
            }
        }
        Err(ScalarError::IrrationalFixedPoint { approx })
    }

    fn rational_string(&self) -> Option<String> {
        Some(self.to_string())
    }

    fn from_rational(r: &Rational) -> Result<Self, ScalarError> {
        Ok(r.clone())
    }
}

/// Exact conversion of a float into a rational (every finite f64 is dyadic).
pub fn rational_from_f64(x: f64) -> Result<Rational, ScalarError> {
    Rational::from_float(x).ok_or_else(|| ScalarError::NotRepresentable(x.to_string()))
}

pub fn to_rational<S: Scalar>(x: &S) -> Result<Rational, ScalarError> {
    if S::EXACT {
        // Rational::from_rational is the identity; go through the string form
        // to stay generic.
        Rational::parse(&x.to_string())
    } else {
        rational_from_f64(x.as_f64())
    }
}
