//! Offspring laws, mark functions and the laws derived from them.
//!
//! Laws are generic over [`Scalar`] so every derived quantity can be
//! computed exactly when the inputs are rational.

use std::collections::BTreeMap;
use std::fmt;

use num_integer::Integer;
use serde::Serialize;
use thiserror::Error;

use crate::scalar::{Scalar, ScalarError};

/// Degree cap used when truncating infinite-support laws.
pub const DEFAULT_DEGREE_CAP: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum LawViolation {
    Empty,
    NegativeWeight { degree: usize },
    ZeroAtZero,
    NoBranching,
    NotNormalized { sum: String },
    InfiniteMean,
}

impl fmt::Display for LawViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LawViolation::Empty => write!(f, "empty law"),
            LawViolation::NegativeWeight { degree } => write!(f, "negative weight at degree {degree}"),
            LawViolation::ZeroAtZero => write!(f, "p(0) must be positive"),
            LawViolation::NoBranching => write!(f, "p(0) + p(1) must be below 1"),
            LawViolation::NotNormalized { sum } => write!(f, "weights sum to {sum}, not 1"),
            LawViolation::InfiniteMean => write!(f, "mean is not finite"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LawError {
    #[error("invalid offspring law: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<LawViolation>),
    #[error("offspring law is not critical (mean {mean})")]
    NotCritical { mean: String },
    #[error("mark probability at degree {degree} is outside [0, 1]")]
    MarkOutOfRange { degree: usize },
    #[error("no degree k has p(k) q(k) > 0; the tree has no marks almost surely")]
    NoMarks,
    #[error("degree {degree} is outside the reduced-law support")]
    OutsideReducedSupport { degree: usize },
    #[error("reduced law vanishes at degree {degree} where p is positive")]
    Inconsistent { degree: usize },
    #[error("no positive value in the support")]
    EmptySupport,
    #[error("derived {what} law is invalid: {source}")]
    Derived { what: &'static str, source: Box<LawError> },
    #[error("walk truncation left mass {tail} above the requested bound")]
    TailTooLarge { tail: f64 },
    #[error(transparent)]
    Scalar(#[from] ScalarError),
    #[error("law configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Criticality {
    Subcritical,
    Critical,
    Supercritical,
}

/// Offspring distribution `p` on the non-negative integers.
#[derive(Clone, PartialEq)]
pub struct OffspringLaw<S: Scalar> {
    weights: Vec<S>,
    discarded: S,
}

impl<S: Scalar> fmt::Debug for OffspringLaw<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .weights
            .iter()
            .enumerate()
            .filter(|(_, w)| !w.is_zero())
            .map(|(k, w)| format!("{k}: {w}"))
            .collect();
        write!(f, "OffspringLaw {{{}}}", parts.join(", "))
    }
}

fn trim_zeros<S: Scalar>(mut weights: Vec<S>) -> Vec<S> {
    while weights.len() > 1 && weights.last().is_some_and(|w| w.is_zero()) {
        weights.pop();
    }
    weights
}

pub fn mean_of<S: Scalar>(weights: &[S]) -> S {
    weights
        .iter()
        .enumerate()
        .map(|(k, w)| S::from_usize(k).unwrap() * w.clone())
        .sum()
}

/// Checks every clause of the standing assumption separately.
pub fn validate<S: Scalar>(weights: &[S]) -> Result<(), LawError> {
    let mut violations = Vec::new();
    if weights.is_empty() {
        return Err(LawError::Invalid(vec![LawViolation::Empty]));
    }
    for (k, w) in weights.iter().enumerate() {
        if w.is_negative() || w.as_f64().is_nan() {
            violations.push(LawViolation::NegativeWeight { degree: k });
        }
    }
    let sum: S = weights.iter().cloned().sum();
    if !sum.approx_eq(&S::one(), S::normalization_tolerance()) {
        violations.push(LawViolation::NotNormalized { sum: sum.to_string() });
    }
    if !weights[0].is_positive() {
        violations.push(LawViolation::ZeroAtZero);
    }
    let p01 = weights[0].clone() + weights.get(1).cloned().unwrap_or_else(S::zero);
    if p01 >= S::one() {
        violations.push(LawViolation::NoBranching);
    }
    if !mean_of(weights).as_f64().is_finite() {
        violations.push(LawViolation::InfiniteMean);
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(LawError::Invalid(violations))
    }
}

impl<S: Scalar> OffspringLaw<S> {
    /// Validated law from weights indexed by degree.
    pub fn new(weights: Vec<S>) -> Result<Self, LawError> {
        let weights = trim_zeros(weights);
        validate(&weights)?;
        Ok(OffspringLaw { weights, discarded: S::zero() })
    }

    pub fn from_map(map: &BTreeMap<usize, S>) -> Result<Self, LawError> {
        let len = map.keys().next_back().map_or(0, |k| k + 1);
        let mut weights = vec![S::zero(); len];
        for (k, w) in map {
            weights[*k] = w.clone();
        }
        Self::new(weights)
    }

    /// Truncates an infinite-support law at `cap` (inclusive) and
    /// renormalizes; the discarded mass is kept for reporting.
    pub fn truncated(weight: impl Fn(usize) -> S, cap: usize) -> Result<Self, LawError> {
        let raw: Vec<S> = (0..=cap).map(weight).collect();
        let kept: S = raw.iter().cloned().sum();
        let discarded = S::one() - kept.clone();
        let weights = raw.into_iter().map(|w| w / kept.clone()).collect();
        let mut law = Self::new(weights)?;
        law.discarded = discarded;
        Ok(law)
    }

    /// `p(k) = (1 − r) r^k`, truncated at `cap`.
    pub fn geometric(ratio: S, cap: usize) -> Result<Self, LawError> {
        let one_minus = S::one() - ratio.clone();
        Self::truncated(|k| one_minus.clone() * ratio.pow_u(k as u32), cap)
    }

    /// `p(0) = p(2) = 1/2`.
    pub fn binary_critical() -> Self {
        Self::new(vec![S::from_ratio(1, 2), S::zero(), S::from_ratio(1, 2)]).unwrap()
    }

    pub fn p(&self, k: usize) -> S {
        self.weights.get(k).cloned().unwrap_or_else(S::zero)
    }

    pub fn p0(&self) -> S {
        self.weights[0].clone()
    }

    pub fn weights(&self) -> &[S] {
        &self.weights
    }

    pub fn max_degree(&self) -> usize {
        self.weights.len() - 1
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.weights.len()).filter(|&k| self.weights[k].is_positive()).collect()
    }

    /// Mass removed by truncation, if the law came from one.
    pub fn discarded_mass(&self) -> &S {
        &self.discarded
    }

    pub fn mean(&self) -> S {
        mean_of(&self.weights)
    }

    pub fn criticality(&self) -> Criticality {
        let mean = self.mean();
        if mean.approx_eq(&S::one(), S::criticality_tolerance()) {
            Criticality::Critical
        } else if mean < S::one() {
            Criticality::Subcritical
        } else {
            Criticality::Supercritical
        }
    }

    pub fn require_critical(&self) -> Result<(), LawError> {
        match self.criticality() {
            Criticality::Critical => Ok(()),
            _ => Err(LawError::NotCritical { mean: self.mean().to_string() }),
        }
    }

    pub fn to_f64(&self) -> OffspringLaw<f64> {
        OffspringLaw {
            weights: self.weights.iter().map(|w| w.as_f64()).collect(),
            discarded: self.discarded.as_f64(),
        }
    }

    pub fn convert<T: Scalar>(&self) -> Result<OffspringLaw<T>, LawError> {
        Ok(OffspringLaw {
            weights: self
                .weights
                .iter()
                .map(|w| crate::scalar::to_rational(w).and_then(|r| T::from_rational(&r)))
                .collect::<Result<_, _>>()?,
            discarded: T::from_rational(&crate::scalar::to_rational(&self.discarded)?)?,
        })
    }

    /// `P(τ = t) = Π_u p(k_u(t))`.
    pub fn tree_probability(&self, tree: &crate::tree::Tree) -> S {
        tree.degrees()
            .iter()
            .fold(S::one(), |acc, &k| acc * self.p(k as usize))
    }
}

/// Per-degree marking probability `q`.
#[derive(Clone, PartialEq)]
pub struct MarkFunction<S: Scalar> {
    table: Vec<S>,
    default: S,
}

impl<S: Scalar> fmt::Debug for MarkFunction<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> =
            self.table.iter().enumerate().map(|(k, w)| format!("{k}: {w}")).collect();
        write!(f, "MarkFunction {{{}, default: {}}}", parts.join(", "), self.default)
    }
}

impl<S: Scalar> MarkFunction<S> {
    pub fn new(table: Vec<S>, default: S) -> Result<Self, LawError> {
        let in_range = |x: &S| !x.is_negative() && *x <= S::one();
        if let Some(degree) = table.iter().position(|x| !in_range(x)) {
            return Err(LawError::MarkOutOfRange { degree });
        }
        if !in_range(&default) {
            return Err(LawError::MarkOutOfRange { degree: table.len() });
        }
        Ok(MarkFunction { table, default })
    }

    pub fn constant(value: S) -> Result<Self, LawError> {
        Self::new(Vec::new(), value)
    }

    /// `q ≡ 1`: every vertex is marked.
    pub fn all() -> Self {
        MarkFunction { table: Vec::new(), default: S::one() }
    }

    /// `q(k) = 1_{k ≥ 1}`: internal vertices are marked.
    pub fn internal() -> Self {
        MarkFunction { table: vec![S::zero()], default: S::one() }
    }

    /// `q(k) = 1_{k = 0}`: leaves are marked.
    pub fn leaves() -> Self {
        MarkFunction { table: vec![S::one()], default: S::zero() }
    }

    pub fn q(&self, k: usize) -> S {
        self.table.get(k).cloned().unwrap_or_else(|| self.default.clone())
    }

    pub fn table(&self) -> &[S] {
        &self.table
    }

    pub fn default_value(&self) -> &S {
        &self.default
    }

    /// Marks are deterministic given the degree.
    pub fn is_deterministic(&self) -> bool {
        self.table.iter().chain(std::iter::once(&self.default)).all(|x| x.is_zero() || x.is_one())
    }

    pub fn to_f64(&self) -> MarkFunction<f64> {
        MarkFunction {
            table: self.table.iter().map(|w| w.as_f64()).collect(),
            default: self.default.as_f64(),
        }
    }

    pub fn convert<T: Scalar>(&self) -> Result<MarkFunction<T>, LawError> {
        let conv = |w: &S| crate::scalar::to_rational(w).and_then(|r| T::from_rational(&r));
        Ok(MarkFunction {
            table: self.table.iter().map(conv).collect::<Result<_, _>>()?,
            default: conv(&self.default)?,
        })
    }
}

/// Hypothesis of the marked-tree limit theorem: some `p(k) q(k) > 0`.
pub fn check_pair<S: Scalar>(law: &OffspringLaw<S>, q: &MarkFunction<S>) -> Result<(), LawError> {
    let any = (0..=law.max_degree()).any(|k| (law.p(k) * q.q(k)).is_positive());
    if any {
        Ok(())
    } else {
        Err(LawError::NoMarks)
    }
}

/// Truncated distribution `P(X = 0..N−1)` with a bound on `P(X ≥ N)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesDist<S: Scalar> {
    pub probs: Vec<S>,
    pub tail: S,
}

impl<S: Scalar> SeriesDist<S> {
    pub fn new(probs: Vec<S>, tail: S) -> Self {
        SeriesDist { probs, tail }
    }

    /// Tail set to the mass missing from `probs`.
    pub fn with_remaining_tail(probs: Vec<S>) -> Self {
        let total: S = probs.iter().cloned().sum();
        let mut tail = S::one() - total;
        if tail.is_negative() {
            tail = S::zero();
        }
        SeriesDist { probs, tail }
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn prob(&self, n: usize) -> S {
        self.probs.get(n).cloned().unwrap_or_else(S::zero)
    }

    pub fn total(&self) -> S {
        self.probs.iter().cloned().sum()
    }

    /// Mean of the truncated part.
    pub fn partial_mean(&self) -> S {
        mean_of(&self.probs)
    }

    /// `P(X ∈ [start, start + width))`, or `None` past the truncation.
    pub fn window(&self, start: usize, width: usize) -> Option<S> {
        if start + width > self.probs.len() {
            return None;
        }
        Some(self.probs[start..start + width].iter().cloned().sum())
    }

    pub fn positive_support(&self) -> Vec<usize> {
        (0..self.probs.len()).filter(|&n| self.probs[n].is_positive_mass()).collect()
    }

    /// Span of `X − shift`: gcd of `{n − shift > 0 : P(X = n) > 0}`.
    pub fn span_shifted(&self, shift: usize) -> Result<u64, LawError> {
        span(self.positive_support().into_iter().filter(|&n| n > shift).map(|n| (n - shift) as u64))
    }

    pub fn to_f64(&self) -> SeriesDist<f64> {
        SeriesDist {
            probs: self.probs.iter().map(|p| p.as_f64()).collect(),
            tail: self.tail.as_f64(),
        }
    }
}

/// gcd of the positive values; error when there are none.
pub fn span(support: impl IntoIterator<Item = u64>) -> Result<u64, LawError> {
    support
        .into_iter()
        .filter(|&n| n > 0)
        .reduce(|a, b| a.gcd(&b))
        .ok_or(LawError::EmptySupport)
}

/// `p*(n) = n p(n) / μ`.
pub fn size_biased<S: Scalar>(law: &OffspringLaw<S>) -> Vec<S> {
    let mean = law.mean();
    law.weights()
        .iter()
        .enumerate()
        .map(|(n, w)| S::from_usize(n).unwrap() * w.clone() / mean.clone())
        .collect()
}

/// Offspring law of the tree with its leaves removed:
/// `p_N*(k) = Σ_{n ≥ max(k,1)} p(n) C(n,k) p(0)^{n−k} (1 − p(0))^{k−1}`.
pub fn reduced_law<S: Scalar>(law: &OffspringLaw<S>) -> Result<OffspringLaw<S>, LawError> {
    law.require_critical()?;
    let weights = reduced_weights(law);
    let reduced = OffspringLaw::new(weights)
        .map_err(|e| LawError::Derived { what: "reduced", source: Box::new(e) })?;
    reduced
        .require_critical()
        .map_err(|e| LawError::Derived { what: "reduced", source: Box::new(e) })?;
    Ok(reduced)
}

fn reduced_weights<S: Scalar>(law: &OffspringLaw<S>) -> Vec<S> {
    let p0 = law.p0();
    let survive = S::one() - p0.clone();
    (0..=law.max_degree())
        .map(|k| {
            let scale = if k == 0 {
                S::one() / survive.clone()
            } else {
                survive.pow_u(k as u32 - 1)
            };
            (k.max(1)..=law.max_degree())
                .map(|n| {
                    law.p(n)
                        * S::binomial(n as u64, k as u64)
                        * p0.pow_u((n - k) as u32)
                        * scale.clone()
                })
                .sum()
        })
        .collect()
}

/// `q(k) = p(k) (1 − p(0))^{k−1} / p_N*(k) · 1_{k ≥ 1}`: marks the vertices
/// of the reduced tree that receive no extra leaves.
pub fn protected_mark_function<S: Scalar>(law: &OffspringLaw<S>) -> Result<MarkFunction<S>, LawError> {
    let reduced = reduced_law(law)?;
    let survive = S::one() - law.p0();
    let mut table = vec![S::zero()];
    for k in 1..=law.max_degree() {
        let pk = law.p(k);
        let rk = reduced.p(k);
        if rk.is_zero() {
            if pk.is_positive() {
                return Err(LawError::Inconsistent { degree: k });
            }
            table.push(S::zero());
            continue;
        }
        table.push(pk * survive.pow_u(k as u32 - 1) / rk);
    }
    let q = MarkFunction::new(table, S::zero())?;
    Ok(q)
}

/// Law of the number `W` of leaves grafted back on a reduced vertex of
/// degree `k`.
pub fn w_law<S: Scalar>(law: &OffspringLaw<S>, k: usize) -> Result<SeriesDist<S>, LawError> {
    let reduced = reduced_law(law)?;
    let rk = reduced.p(k);
    if !rk.is_positive() {
        return Err(LawError::OutsideReducedSupport { degree: k });
    }
    let p0 = law.p0();
    let survive = S::one() - p0.clone();
    let scale = if k == 0 { S::one() / survive } else { survive.pow_u(k as u32 - 1) };
    let probs: Vec<S> = (0..=law.max_degree().saturating_sub(k))
        .map(|n| {
            if k == 0 && n == 0 {
                return S::zero();
            }
            law.p(k + n) / rk.clone()
                * S::binomial((k + n) as u64, n as u64)
                * p0.pow_u(n as u32)
                * scale.clone()
        })
        .collect();
    Ok(SeriesDist::new(trim_zeros(probs), S::zero()))
}

/// Coefficients of `s ↦ Σ_k p(k) (1 − q(k)) s^k`, whose smallest fixed
/// point is `P(M(τ) = 0)`.
pub(crate) fn unmarked_extinction_poly<S: Scalar>(law: &OffspringLaw<S>, q: &MarkFunction<S>) -> Vec<S> {
    (0..=law.max_degree()).map(|k| law.p(k) * (S::one() - q.q(k))).collect()
}

/// `γ = P(M(τ) > 0)`.
pub fn gamma<S: Scalar>(law: &OffspringLaw<S>, q: &MarkFunction<S>) -> Result<S, LawError> {
    check_pair(law, q)?;
    let none = S::smallest_fixed_point(&unmarked_extinction_poly(law, q))?;
    Ok(S::one() - none)
}

/// Truncation of the walk dynamic program.
#[derive(Debug, Clone, Copy)]
pub struct WalkDpOptions {
    /// Maximum number of walk steps.
    pub horizon: usize,
    /// Largest walk height tracked; mass above it is counted as tail.
    pub max_height: usize,
    /// In float mode, stop once the live mass drops below this.
    pub negligible: f64,
}

impl Default for WalkDpOptions {
    fn default() -> Self {
        WalkDpOptions { horizon: 10_000, max_height: 4_096, negligible: 1e-18 }
    }
}

/// Output of [`y_law`].
#[derive(Debug, Clone)]
pub struct YLaw<S: Scalar> {
    /// Law of `Y`, the offspring law of the tree built on the marks.
    pub y: SeriesDist<S>,
    /// Law of `X̃` given `N ≤ G`.
    pub x_tilde: SeriesDist<S>,
    pub gamma: S,
    /// `P(N ≤ G)` accumulated by the dynamic program.
    pub accepted_mass: S,
    /// `P(N > G)` accumulated by the dynamic program.
    pub killed_mass: S,
    /// Mass still alive at the horizon or pushed above `max_height`.
    pub censored_mass: S,
    pub steps: usize,
}

impl<S: Scalar> YLaw<S> {
    pub fn mean(&self) -> S {
        self.y.partial_mean()
    }

    /// Bound on the mass of `Y` not represented, relative to acceptance.
    pub fn tail_bound(&self) -> f64 {
        self.censored_mass.as_f64() / self.accepted_mass.as_f64()
    }

    pub fn as_offspring_law(&self) -> Result<OffspringLaw<S>, LawError> {
        OffspringLaw::new(self.y.probs.clone())
            .map_err(|e| LawError::Derived { what: "Y", source: Box::new(e) })
    }
}

/// Law of `Y ~ Binomial(X̃, γ)` by dynamic programming over the
/// Łukasiewicz walk: the state is the partial sum `Σ_{i<k}(X_i − 1)`, the
/// walk is killed at −1 (before the first mark: `N > G`) and absorbed at
/// its first mark with `X̃ = 1 + Σ_{i≤N}(X_i − 1)`.
pub fn y_law<S: Scalar>(
    law: &OffspringLaw<S>,
    q: &MarkFunction<S>,
    options: WalkDpOptions,
) -> Result<YLaw<S>, LawError> {
    check_pair(law, q)?;
    let max_deg = law.max_degree();
    let steps_p: Vec<(usize, S, S)> = law
        .support()
        .into_iter()
        .map(|k| {
            let pk = law.p(k);
            let qk = q.q(k);
            (k, pk.clone() * qk.clone(), pk * (S::one() - qk))
        })
        .collect();
    let mut alive: Vec<S> = vec![S::one()];
    let mut accepted: Vec<S> = vec![S::zero(); max_deg + 1];
    let mut killed = S::zero();
    let mut censored = S::zero();
    let mut steps = 0;
    while steps < options.horizon {
        let live: S = alive.iter().cloned().sum();
        if live.is_zero() || (!S::EXACT && live.as_f64() < options.negligible) {
            break;
        }
        steps += 1;
        let mut next: Vec<S> = vec![S::zero(); (alive.len() + max_deg).min(options.max_height + 1)];
        for (height, mass) in alive.iter().enumerate() {
            if mass.is_zero() {
                continue;
            }
            for (k, marked, unmarked) in &steps_p {
                let x_tilde = height + k;
                if !marked.is_zero() {
                    if accepted.len() <= x_tilde {
                        accepted.resize(x_tilde + 1, S::zero());
                    }
                    accepted[x_tilde] = accepted[x_tilde].clone() + mass.clone() * marked.clone();
                }
                if unmarked.is_zero() {
                    continue;
                }
                let flow = mass.clone() * unmarked.clone();
                if height + k == 0 {
                    killed = killed + flow;
                } else if height + k - 1 > options.max_height {
                    censored = censored + flow;
                } else {
                    next[height + k - 1] = next[height + k - 1].clone() + flow;
                }
            }
        }
        alive = trim_zeros(next);
    }
    censored = censored + alive.iter().cloned().sum();
    let accepted = trim_zeros(accepted);
    let accepted_mass: S = accepted.iter().cloned().sum();
    let gamma = if censored.is_zero() {
        accepted_mass.clone()
    } else {
        gamma(law, q)?
    };
    let x_tilde: Vec<S> = accepted.iter().map(|m| m.clone() / accepted_mass.clone()).collect();
    let fail = S::one() - gamma.clone();
    let y: Vec<S> = (0..x_tilde.len())
        .map(|j| {
            (j..x_tilde.len())
                .map(|x| {
                    x_tilde[x].clone()
                        * S::binomial(x as u64, j as u64)
                        * gamma.pow_u(j as u32)
                        * fail.pow_u((x - j) as u32)
                })
                .sum()
        })
        .collect();
    let rel_tail = censored.clone() / accepted_mass.clone();
    Ok(YLaw {
        y: SeriesDist::new(trim_zeros(y), rel_tail.clone()),
        x_tilde: SeriesDist::new(x_tilde, rel_tail),
        gamma,
        accepted_mass,
        killed_mass: killed,
        censored_mass: censored,
        steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rational;

    fn r(n: i64, d: i64) -> Rational {
        Rational::from_ratio(n, d)
    }

    fn binary() -> OffspringLaw<Rational> {
        OffspringLaw::binary_critical()
    }

    #[test]
    fn validate_binary() {
        let law = binary();
        assert_eq!(law.mean(), r(1, 1));
        assert_eq!(law.criticality(), Criticality::Critical);
    }

    #[test]
    fn validate_names_each_violation() {
        let err = OffspringLaw::new(vec![0.3f64, 0.8]).unwrap_err();
        match err {
            LawError::Invalid(v) => {
                assert!(v.iter().any(|x| matches!(x, LawViolation::NotNormalized { .. })));
                assert!(v.contains(&LawViolation::NoBranching));
            }
            e => panic!("{e}"),
        }
        let err = OffspringLaw::new(vec![r(0, 1), r(0, 1), r(1, 1)]).unwrap_err();
        assert_eq!(err, LawError::Invalid(vec![LawViolation::ZeroAtZero]));
        let err = OffspringLaw::new(vec![r(1, 2), r(1, 2)]).unwrap_err();
        assert_eq!(err, LawError::Invalid(vec![LawViolation::NoBranching]));
        let err = OffspringLaw::new(vec![1.0, -0.5, 0.5]).unwrap_err();
        assert!(matches!(err, LawError::Invalid(v) if v.contains(&LawViolation::NegativeWeight { degree: 1 })));
    }

    #[test]
    fn geometric_truncation() {
        // p(k) = 2^{-(k+1)} has mean exactly 1 before truncation.
        let law = OffspringLaw::<Rational>::geometric(r(1, 2), 40).unwrap();
        assert_eq!(law.discarded_mass(), &r(1, 1 << 41));
        assert!((law.mean().as_f64() - 1.0).abs() < 1e-9);
        let float = OffspringLaw::<f64>::geometric(0.5, DEFAULT_DEGREE_CAP).unwrap();
        assert_eq!(float.criticality(), Criticality::Critical);
    }

    #[test]
    fn size_biased_examples() {
        assert_eq!(size_biased(&binary()), vec![r(0, 1), r(0, 1), r(1, 1)]);
        let geo = OffspringLaw::<f64>::geometric(0.5, 64).unwrap();
        let star = size_biased(&geo);
        for (n, w) in star.iter().enumerate().take(30) {
            let expected = n as f64 * 0.5f64.powi(n as i32 + 1);
            assert!((w - expected).abs() < 1e-15, "n={n}");
        }
    }

    #[test]
    fn span_examples() {
        assert_eq!(span([2, 4, 6]).unwrap(), 2);
        assert_eq!(span([0, 3]).unwrap(), 3);
        assert_eq!(span(std::iter::empty()), Err(LawError::EmptySupport));
        let card_like = SeriesDist::new(vec![r(0, 1), r(1, 2), r(0, 1), r(1, 8)], r(3, 8));
        assert_eq!(card_like.span_shifted(1).unwrap(), 2);
    }

    #[test]
    fn reduced_law_binary() {
        let reduced = reduced_law(&binary()).unwrap();
        assert_eq!(reduced.weights(), &[r(1, 4), r(1, 2), r(1, 4)]);
        assert_eq!(reduced.mean(), r(1, 1));
    }

    #[test]
    fn reduced_law_geometric_is_critical() {
        let geo = OffspringLaw::<f64>::geometric(0.5, 64).unwrap();
        let reduced = reduced_law(&geo).unwrap();
        assert!((reduced.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((reduced.mean() - 1.0).abs() < 1e-8);
        assert!(reduced.p0() > 0.0);
    }

    #[test]
    fn reduced_law_rejects_subcritical() {
        let sub = OffspringLaw::new(vec![r(1, 2), r(1, 4), r(1, 4)]).unwrap();
        assert!(matches!(reduced_law(&sub), Err(LawError::NotCritical { .. })));
    }

    #[test]
    fn protected_marks_binary() {
        let q = protected_mark_function(&binary()).unwrap();
        assert_eq!(q.q(0), r(0, 1));
        assert_eq!(q.q(1), r(0, 1));
        assert_eq!(q.q(2), r(1, 1));
        assert_eq!(q.q(7), r(0, 1));
    }

    #[test]
    fn protected_marks_geometric_in_range() {
        let geo = OffspringLaw::<f64>::geometric(0.5, 64).unwrap();
        let q = protected_mark_function(&geo).unwrap();
        assert_eq!(q.q(0), 0.0);
        for k in 1..=40 {
            let v = q.q(k);
            assert!((0.0..=1.0 + 1e-12).contains(&v), "q({k}) = {v}");
        }
    }

    #[test]
    fn w_law_binary() {
        let law = binary();
        assert_eq!(w_law(&law, 2).unwrap().probs, vec![r(1, 1)]);
        assert_eq!(w_law(&law, 1).unwrap().probs, vec![r(0, 1), r(1, 1)]);
        assert_eq!(w_law(&law, 0).unwrap().probs, vec![r(0, 1), r(0, 1), r(1, 1)]);
        assert!(matches!(w_law(&law, 3), Err(LawError::OutsideReducedSupport { degree: 3 })));
    }

    #[test]
    fn w_law_normalized_and_zero_formula() {
        let law = OffspringLaw::new(vec![r(1, 2), r(1, 6), r(1, 6), r(1, 6)]).unwrap();
        let reduced = reduced_law(&law).unwrap();
        for k in reduced.support() {
            let w = w_law(&law, k).unwrap();
            assert_eq!(w.total(), r(1, 1), "k={k}");
            if k > 0 {
                let expect = law.p(k) / reduced.p(k) * (r(1, 1) - law.p0()).pow_u(k as u32 - 1);
                assert_eq!(w.prob(0), expect);
            } else {
                assert_eq!(w.prob(0), r(0, 1));
            }
        }
    }

    #[test]
    fn gamma_examples() {
        let law = binary();
        assert_eq!(gamma(&law, &MarkFunction::all()).unwrap(), r(1, 1));
        assert_eq!(gamma(&law, &MarkFunction::internal()).unwrap(), r(1, 2));
        let none = MarkFunction::constant(r(0, 1)).unwrap();
        assert_eq!(gamma(&law, &none), Err(LawError::NoMarks));
        // q = 1/2: P(M=0) = 2 - sqrt(3)
        let half = MarkFunction::constant(0.5).unwrap();
        let g = gamma(&law.to_f64(), &half).unwrap();
        assert!((g - (3f64.sqrt() - 1.0)).abs() < 1e-14);
    }

    #[test]
    fn y_law_all_marked_is_offspring_law() {
        let law = binary();
        let y = y_law(&law, &MarkFunction::all(), WalkDpOptions::default()).unwrap();
        assert_eq!(y.y.probs, law.weights().to_vec());
        assert_eq!(y.gamma, r(1, 1));
        assert_eq!(y.censored_mass, r(0, 1));
    }

    #[test]
    fn y_law_internal_marks_is_critical() {
        let y = y_law(&binary(), &MarkFunction::internal(), WalkDpOptions::default()).unwrap();
        assert_eq!(y.y.probs, vec![r(1, 4), r(1, 2), r(1, 4)]);
        assert_eq!(y.mean(), r(1, 1));
        assert!(y.as_offspring_law().is_ok());
    }

    #[test]
    fn y_law_float_half_marks() {
        let law = OffspringLaw::<f64>::binary_critical();
        let q = MarkFunction::constant(0.5).unwrap();
        let y = y_law(&law, &q, WalkDpOptions::default()).unwrap();
        assert!(y.tail_bound() < 1e-12);
        assert!((y.mean() - 1.0).abs() < 1e-9, "E[Y] = {}", y.mean());
        let as_law = y.as_offspring_law().unwrap();
        assert_eq!(y.y.span_shifted(0).unwrap(), 1);
        assert!((y.gamma - gamma(&law, &q).unwrap()).abs() < 1e-12);
        assert_eq!(as_law.criticality(), Criticality::Critical);
    }
}
