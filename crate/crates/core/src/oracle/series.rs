//! Power series solutions of `s(x) = a(s(x)) + x · b(s(x))`.
//!
//! Both the mark-count and the protected-count generating functions of a
//! Galton-Watson tree have this shape (branching property), with `a` and
//! `b` polynomials whose coefficients come from the offspring law. The
//! constant term is the smallest fixed point of `a`; every later
//! coefficient is linear in itself once lower ones are known, so the solve
//! is a single triangular pass in `O(K N²)`.

use std::ops::{Add, Mul, Sub};

use num_traits::{One, Zero};

use crate::laws::{MarkFunction, OffspringLaw};
use crate::scalar::{Rational, Scalar, ScalarError};

use super::OracleError;

pub trait SeriesCoeff:
    Clone + PartialEq + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self>
{
    fn c_zero() -> Self;
    fn c_one() -> Self;
    fn from_usize(n: usize) -> Self;
    /// Smallest solution of `s = poly(s)` in the coefficient ring.
    fn smallest_fixed_point(poly: &[Self]) -> Result<Self, OracleError>;
    fn recip(&self) -> Result<Self, OracleError>;
    /// Equality up to the arithmetic's rounding.
    fn close_to(&self, other: &Self) -> bool;
}

impl<S: Scalar> SeriesCoeff for S {
    fn c_zero() -> Self {
        <S as Zero>::zero()
    }

    fn c_one() -> Self {
        <S as One>::one()
    }

    fn from_usize(n: usize) -> Self {
        <S as num_traits::FromPrimitive>::from_usize(n).unwrap()
    }

    fn smallest_fixed_point(poly: &[Self]) -> Result<Self, OracleError> {
        Ok(<S as Scalar>::smallest_fixed_point(poly)?)
    }

    fn recip(&self) -> Result<Self, OracleError> {
        if self.is_zero() {
            return Err(OracleError::Singular);
        }
        Ok(<S as One>::one() / self.clone())
    }

    fn close_to(&self, other: &Self) -> bool {
        self.approx_eq(other, 1e-12 * (1.0 + other.as_f64().abs()))
    }
}

/// Exact rationals tagged by tree size: the coefficient of `y^n` carries
/// the mass of trees with `n` vertices, truncated above `N`.
#[derive(Clone, PartialEq, Debug)]
pub struct SizeGraded<const N: usize> {
    coeffs: Vec<Rational>,
}

impl<const N: usize> SizeGraded<N> {
    pub fn constant(r: Rational) -> Self {
        let mut coeffs = vec![<Rational as Zero>::zero(); N + 1];
        coeffs[0] = r;
        SizeGraded { coeffs }
    }

    /// The size variable `y`.
    pub fn size_var() -> Self {
        let mut coeffs = vec![<Rational as Zero>::zero(); N + 1];
        if N >= 1 {
            coeffs[1] = <Rational as One>::one();
        }
        SizeGraded { coeffs }
    }

    pub fn coeff(&self, n: usize) -> &Rational {
        &self.coeffs[n]
    }
}

impl<const N: usize> Add for SizeGraded<N> {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        for (a, b) in self.coeffs.iter_mut().zip(rhs.coeffs) {
            *a += b;
        }
        self
    }
}

impl<const N: usize> Sub for SizeGraded<N> {
    type Output = Self;
    fn sub(mut self, rhs: Self) -> Self {
        for (a, b) in self.coeffs.iter_mut().zip(rhs.coeffs) {
            *a -= b;
        }
        self
    }
}

impl<const N: usize> Mul for SizeGraded<N> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let mut coeffs = vec![<Rational as Zero>::zero(); N + 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in rhs.coeffs.iter().enumerate().take(N + 1 - i) {
                if !b.is_zero() {
                    coeffs[i + j] += a * b;
                }
            }
        }
        SizeGraded { coeffs }
    }
}

impl<const N: usize> SeriesCoeff for SizeGraded<N> {
    fn c_zero() -> Self {
        SizeGraded::constant(<Rational as Zero>::zero())
    }

    fn c_one() -> Self {
        SizeGraded::constant(<Rational as One>::one())
    }

    fn from_usize(n: usize) -> Self {
        SizeGraded::constant(Rational::from_ratio(n as i64, 1))
    }

    // Each application of `poly` fixes one more size degree when its
    // coefficients carry a factor `y`.
    fn smallest_fixed_point(poly: &[Self]) -> Result<Self, OracleError> {
        let mut s = Self::c_zero();
        for _ in 0..=N + 1 {
            let next = horner(poly, &s);
            if next == s {
                return Ok(s);
            }
            s = next;
        }
        Err(OracleError::Scalar(ScalarError::NoConvergence))
    }

    fn recip(&self) -> Result<Self, OracleError> {
        let c0 = &self.coeffs[0];
        if c0.is_zero() {
            return Err(OracleError::Singular);
        }
        let mut inv = vec![<Rational as Zero>::zero(); N + 1];
        inv[0] = <Rational as One>::one() / c0;
        for n in 1..=N {
            let acc: Rational = (1..=n).map(|i| &self.coeffs[i] * &inv[n - i]).sum();
            inv[n] = -acc / c0;
        }
        Ok(SizeGraded { coeffs: inv })
    }

    fn close_to(&self, other: &Self) -> bool {
        self == other
    }
}

fn horner<C: SeriesCoeff>(poly: &[C], s: &C) -> C {
    poly.iter()
        .rev()
        .fold(C::c_zero(), |acc, c| acc * s.clone() + c.clone())
}

/// `s = a(s) + x · b(s)`; polynomials lowest degree first.
#[derive(Clone, Debug)]
pub struct Kernel<C> {
    pub a: Vec<C>,
    pub b: Vec<C>,
}

impl<C: SeriesCoeff> Kernel<C> {
    /// Mark counts: a vertex of degree `k` has weight `w p(k)` and is marked
    /// with probability `q(k)`.
    pub fn marks(p: &[C], q: &[C], weight: &C) -> Self {
        let a = p
            .iter()
            .zip(q)
            .map(|(pk, qk)| weight.clone() * pk.clone() * (C::c_one() - qk.clone()))
            .collect();
        let b = p
            .iter()
            .zip(q)
            .map(|(pk, qk)| weight.clone() * pk.clone() * qk.clone())
            .collect();
        Kernel { a, b }
    }

    /// Protected counts. Returns the kernel for `H`, the generating function
    /// restricted to trees whose root is internal, and the leaf-tree term
    /// `L = w p(0)`:
    /// `H = w Σ_{k≥1} p(k) [x H^k + (L + H)^k − H^k]`.
    pub fn protected(p: &[C], weight: &C) -> (Self, C) {
        let leaf = weight.clone() * p[0].clone();
        let max_deg = p.len() - 1;
        // binomial expansion of (L + h)^k − h^k in powers of h
        let mut leaf_pow = vec![C::c_one()];
        for i in 1..=max_deg {
            let next = leaf_pow[i - 1].clone() * leaf.clone();
            leaf_pow.push(next);
        }
        let mut a = vec![C::c_zero(); max_deg.max(1)];
        for (k, pk) in p.iter().enumerate().skip(1) {
            let mut binom = 1u128;
            for (j, slot) in a.iter_mut().enumerate().take(k) {
                let term = C::from_usize(binom as usize) * leaf_pow[k - j].clone();
                *slot = slot.clone() + weight.clone() * pk.clone() * term;
                binom = binom * (k - j) as u128 / (j + 1) as u128;
            }
        }
        let mut b = vec![C::c_zero(); max_deg + 1];
        for (k, pk) in p.iter().enumerate().skip(1) {
            b[k] = weight.clone() * pk.clone();
        }
        (Kernel { a, b }, leaf)
    }

    fn degree(&self) -> usize {
        self.a.len().max(self.b.len()).saturating_sub(1)
    }

    fn a_coeff(&self, j: usize) -> C {
        self.a.get(j).cloned().unwrap_or_else(C::c_zero)
    }

    fn b_coeff(&self, j: usize) -> C {
        self.b.get(j).cloned().unwrap_or_else(C::c_zero)
    }

    /// Coefficients `s_0 .. s_{order−1}` of the solution.
    pub fn solve(&self, order: usize) -> Result<Vec<C>, OracleError> {
        if order == 0 {
            return Ok(Vec::new());
        }
        let degree = self.degree();
        let s0 = C::smallest_fixed_point(&self.a)?;
        let mut s0_pow = vec![C::c_one()];
        for j in 1..=degree {
            let next = s0_pow[j - 1].clone() * s0.clone();
            s0_pow.push(next);
        }
        // powers[j][m] = [x^m] s^j
        let mut powers: Vec<Vec<C>> = s0_pow.iter().map(|c| vec![c.clone()]).collect();
        let slope: C = (1..=degree).fold(C::c_zero(), |acc, j| {
            acc + C::from_usize(j) * self.a_coeff(j) * s0_pow[j - 1].clone()
        });
        let pivot = (C::c_one() - slope).recip()?;
        let mut s = vec![s0.clone()];
        for m in 1..order {
            // [x^m] s^j with the unknown s_m set to zero
            let mut partial = vec![C::c_zero(); degree + 1];
            for j in 2..=degree {
                let mut acc = partial[j - 1].clone() * s0.clone();
                for i in 1..m {
                    acc = acc + powers[j - 1][i].clone() * s[m - i].clone();
                }
                partial[j] = acc;
            }
            let mut rhs = C::c_zero();
            for (j, pj) in partial.iter().enumerate() {
                rhs = rhs + self.a_coeff(j) * pj.clone() + self.b_coeff(j) * powers[j][m - 1].clone();
            }
            let sm = rhs * pivot.clone();
            for j in 0..=degree {
                let linear = if j == 0 {
                    C::c_zero()
                } else {
                    C::from_usize(j) * s0_pow[j - 1].clone() * sm.clone()
                };
                powers[j].push(partial[j].clone() + linear);
            }
            s.push(sm);
        }
        self.verify_stationary(&s)?;
        Ok(s)
    }

    /// One more application of the map must reproduce the solution.
    fn verify_stationary(&self, s: &[C]) -> Result<(), OracleError> {
        let order = s.len();
        let mul = |u: &[C], v: &[C]| -> Vec<C> {
            let mut out = vec![C::c_zero(); order];
            for (i, ui) in u.iter().enumerate() {
                for (j, vj) in v.iter().enumerate().take(order - i) {
                    out[i + j] = out[i + j].clone() + ui.clone() * vj.clone();
                }
            }
            out
        };
        let eval = |poly: &[C]| -> Vec<C> {
            let mut acc = vec![C::c_zero(); order];
            for c in poly.iter().rev() {
                acc = mul(&acc, s);
                acc[0] = acc[0].clone() + c.clone();
            }
            acc
        };
        let a_val = eval(&self.a);
        let b_val = eval(&self.b);
        for m in 0..order {
            let mut image = a_val[m].clone();
            if m > 0 {
                image = image + b_val[m - 1].clone();
            }
            if !image.close_to(&s[m]) {
                return Err(OracleError::NotStationary { coefficient: m });
            }
        }
        Ok(())
    }
}

/// Embeds a law and a mark function as coefficient vectors of equal length.
pub(crate) fn law_and_marks<S: Scalar>(law: &OffspringLaw<S>, q: &MarkFunction<S>) -> (Vec<S>, Vec<S>) {
    let p = law.weights().to_vec();
    let marks = (0..p.len()).map(|k| q.q(k)).collect();
    (p, marks)
}
