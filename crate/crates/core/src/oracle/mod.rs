//! Exact and semi-exact ground truth.
//!
//! Series for `M(τ)`, `A(τ)` and `Card(τ)` come from the fixed-point
//! recursions in [`series`]; those recursions are derived here from the
//! branching property rather than taken from a reference, so
//! [`validate_series`] checks them against brute-force enumeration before
//! anything downstream relies on them.

pub mod enumerate;
pub mod series;

use num_traits::One;
use serde::Serialize;
use thiserror::Error;

use crate::laws::{check_pair, LawError, MarkFunction, OffspringLaw, SeriesDist};
use crate::scalar::{Rational, Scalar, ScalarError};
use crate::tree::BallEvent;

pub use enumerate::{count_trees, enumerate_trees, WeightedTreeTable};
pub use series::{Kernel, SeriesCoeff, SizeGraded};

/// Exact rational series are used up to this order by default.
pub const DEFAULT_EXACT_ORDER: usize = 512;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error(transparent)]
    Law(#[from] LawError),
    #[error(transparent)]
    Scalar(#[from] ScalarError),
    #[error("fixed-point map is singular at the constant term")]
    Singular,
    #[error("series coefficient {coefficient} is not stationary under the fixed-point map")]
    NotStationary { coefficient: usize },
    #[error("enumeration of {trees} trees exceeds the limit of {limit}")]
    Capacity { trees: u128, limit: u128 },
    #[error("window [{start}, {end}) exceeds the series truncation {len}")]
    OutsideTruncation { start: usize, end: usize, len: usize },
    #[error("window [{start}, {end}) has zero mass")]
    EmptyWindow { start: usize, end: usize },
    #[error("oracle validation gate failed: {0}")]
    Gate(String),
}

fn finish_series<S: Scalar>(probs: Vec<S>) -> SeriesDist<S> {
    SeriesDist::with_remaining_tail(probs)
}

/// Law of `M(τ)` up to order `order` (coefficients `0..order`).
pub fn m_series<S: Scalar>(
    law: &OffspringLaw<S>,
    q: &MarkFunction<S>,
    order: usize,
) -> Result<SeriesDist<S>, OracleError> {
    check_pair(law, q)?;
    let (p, marks) = series::law_and_marks(law, q);
    let probs = Kernel::marks(&p, &marks, &S::one()).solve(order)?;
    Ok(finish_series(probs))
}

/// Law of `Card(τ)`.
pub fn card_series<S: Scalar>(law: &OffspringLaw<S>, order: usize) -> Result<SeriesDist<S>, OracleError> {
    m_series(law, &MarkFunction::all(), order)
}

/// Law of `A(τ)`, the number of protected vertices.
pub fn a_series<S: Scalar>(law: &OffspringLaw<S>, order: usize) -> Result<SeriesDist<S>, OracleError> {
    let (kernel, leaf) = Kernel::protected(law.weights(), &S::one());
    let mut probs = kernel.solve(order)?;
    if let Some(first) = probs.first_mut() {
        *first = first.clone() + leaf;
    }
    Ok(finish_series(probs))
}

/// Joint law of `(Card, M)` over trees with at most `N` vertices,
/// `table[size][marks]`, from the same kernel and solver as [`m_series`].
pub fn marks_by_size<const N: usize>(
    law: &OffspringLaw<Rational>,
    q: &MarkFunction<Rational>,
) -> Result<Vec<Vec<Rational>>, OracleError> {
    let (p, marks) = series::law_and_marks(law, q);
    let embed = |v: Vec<Rational>| v.into_iter().map(SizeGraded::<N>::constant).collect::<Vec<_>>();
    let kernel = Kernel::marks(&embed(p), &embed(marks), &SizeGraded::size_var());
    let coeffs = kernel.solve(N + 1)?;
    Ok(transpose(&coeffs))
}

/// Joint law of `(Card, A)` over trees with at most `N` vertices.
pub fn protected_by_size<const N: usize>(law: &OffspringLaw<Rational>) -> Result<Vec<Vec<Rational>>, OracleError> {
    let p: Vec<_> = law.weights().iter().cloned().map(SizeGraded::<N>::constant).collect();
    let (kernel, leaf) = Kernel::protected(&p, &SizeGraded::size_var());
    let mut coeffs = kernel.solve(N + 1)?;
    coeffs[0] = coeffs[0].clone() + leaf;
    Ok(transpose(&coeffs))
}

fn transpose<const N: usize>(coeffs: &[SizeGraded<N>]) -> Vec<Vec<Rational>> {
    (0..=N)
        .map(|size| (0..=N).map(|m| coeffs[m].coeff(size).clone()).collect())
        .collect()
}

/// Outcome of the brute-force validation of the series recursions.
#[derive(Debug, Clone, Serialize)]
pub struct GateReport {
    pub max_size: usize,
    pub marks_joint_exact: bool,
    pub protected_joint_exact: bool,
    /// The full mark series dominates the size-truncated one, and the
    /// excess is at most the mass of larger trees.
    pub marks_bracket: bool,
    pub protected_bracket: bool,
    pub mismatches: Vec<String>,
}

impl GateReport {
    pub fn passed(&self) -> bool {
        self.marks_joint_exact && self.protected_joint_exact && self.marks_bracket && self.protected_bracket
    }
}

/// Size cutoff for [`validate_series`].
pub const GATE_MAX_SIZE: usize = 8;

/// Compares the series recursions with enumeration plus exhaustive mark
/// expansion on every tree with at most [`GATE_MAX_SIZE`] vertices, in exact
/// arithmetic, then brackets the univariate float series of order `order`.
pub fn validate_series<S: Scalar>(
    law: &OffspringLaw<S>,
    q: &MarkFunction<S>,
    order: usize,
) -> Result<GateReport, OracleError> {
    const N: usize = GATE_MAX_SIZE;
    let exact_law: OffspringLaw<Rational> = law.convert()?;
    let exact_q: MarkFunction<Rational> = q.convert()?;
    let table = enumerate_trees(&exact_law, N)?;
    let mut mismatches = Vec::new();

    let brute_m = table.marks_by_size(&exact_q);
    let series_m = marks_by_size::<N>(&exact_law, &exact_q)?;
    let marks_joint_exact = compare_joint("M", &brute_m, &series_m, &mut mismatches);

    let brute_a = table.protected_by_size();
    let series_a = protected_by_size::<N>(&exact_law)?;
    let protected_joint_exact = compare_joint("A", &brute_a, &series_a, &mut mismatches);

    let small_mass: Rational = (1..=N).map(|s| series_m[s].iter().sum::<Rational>()).sum();
    let large_mass = (<Rational as One>::one() - small_mass).as_f64();
    // float series: exact fixed points can be irrational even for rational laws
    let (law, q) = (law.to_f64(), q.to_f64());
    let marks_bracket = bracket("M", &m_series(&law, &q, order)?, &series_m, large_mass, &mut mismatches);
    let protected_bracket = bracket("A", &a_series(&law, order)?, &series_a, large_mass, &mut mismatches);

    Ok(GateReport {
        max_size: N,
        marks_joint_exact,
        protected_joint_exact,
        marks_bracket,
        protected_bracket,
        mismatches,
    })
}

fn compare_joint(name: &str, brute: &[Vec<Rational>], series: &[Vec<Rational>], out: &mut Vec<String>) -> bool {
    let mut ok = true;
    for (size, (row_b, row_s)) in brute.iter().zip(series).enumerate().skip(1) {
        for (m, (b, s)) in row_b.iter().zip(row_s).enumerate() {
            if b != s {
                ok = false;
                out.push(format!("{name}: P(Card={size}, {name}={m}) enumeration {b} vs series {s}"));
            }
        }
    }
    ok
}

fn bracket(
    name: &str,
    full: &SeriesDist<f64>,
    by_size: &[Vec<Rational>],
    large_mass: f64,
    out: &mut Vec<String>,
) -> bool {
    let tol = 1e-12;
    let mut excess = 0.0;
    let mut ok = true;
    for m in 0..full.len().min(by_size.len()) {
        let small: f64 = by_size.iter().map(|row| row[m].as_f64()).sum();
        let diff = full.prob(m).as_f64() - small;
        if diff < -tol - 1e-15 {
            ok = false;
            out.push(format!("{name}: series P({name}={m}) below the mass of small trees"));
        }
        excess += diff.max(0.0);
    }
    if excess > large_mass + 1e-12 {
        ok = false;
        out.push(format!("{name}: excess {excess} over small trees exceeds large-tree mass {large_mass}"));
    }
    ok
}

/// `P(τ* ∈ T(t, x)) = P(τ = t) / (μ^{|x|} p(0))`.
pub fn kesten_ball_prob<S: Scalar>(law: &OffspringLaw<S>, event: &BallEvent) -> S {
    let mu_pow = law.mean().pow_u(event.leaf().generation() as u32);
    law.tree_probability(event.base()) / (mu_pow * law.p0())
}

/// Joint and conditional ball probabilities under `M(τ) ∈ window`.
#[derive(Debug, Clone)]
pub struct ConditionedBall<S: Scalar> {
    /// `P(τ ∈ T(t,x), M(τ) ∈ window)`
    pub joint: S,
    /// `P(M(τ) ∈ window)`
    pub window_mass: S,
    /// `P(τ ∈ T(t,x) | M(τ) ∈ window)`
    pub conditional: S,
}

/// Law of `D(t, x)`: the marks carried by `t` off the grafting leaf.
pub fn graft_mark_law<S: Scalar>(q: &MarkFunction<S>, event: &BallEvent) -> Vec<S> {
    let base = event.base();
    let leaf = base.position(event.leaf()).expect("validated ball event");
    let mut pmf = vec![S::one()];
    for (i, &k) in base.degrees().iter().enumerate() {
        if i == leaf {
            continue;
        }
        let qk = q.q(k as usize);
        let mut next = vec![S::zero(); pmf.len() + 1];
        for (m, w) in pmf.iter().enumerate() {
            next[m] = next[m].clone() + w.clone() * (S::one() - qk.clone());
            next[m + 1] = next[m + 1].clone() + w.clone() * qk.clone();
        }
        pmf = next;
    }
    pmf
}

/// `P(τ ∈ T(t,x), M ∈ [n, n+width)) = P(τ* ∈ T(t,x)) · P(M̂ + D(t,x) ∈ [n, n+width))`
/// with `M̂` an independent copy of `M(τ)`.
pub fn conditioned_ball_prob<S: Scalar>(
    law: &OffspringLaw<S>,
    q: &MarkFunction<S>,
    series: &SeriesDist<S>,
    event: &BallEvent,
    start: usize,
    width: usize,
) -> Result<ConditionedBall<S>, OracleError> {
    let end = start + width;
    if end > series.len() {
        return Err(OracleError::OutsideTruncation { start, end, len: series.len() });
    }
    let window_mass = series.window(start, width).unwrap();
    if window_mass.is_zero() {
        return Err(OracleError::EmptyWindow { start, end });
    }
    let shifted: S = graft_mark_law(q, event)
        .iter()
        .enumerate()
        .map(|(d, w)| {
            let lo = start.saturating_sub(d);
            let hi = end.saturating_sub(d);
            if hi <= lo {
                S::zero()
            } else {
                w.clone() * series.window(lo, hi - lo).unwrap()
            }
        })
        .sum();
    let joint = kesten_ball_prob(law, event) * shifted;
    let conditional = joint.clone() / window_mass.clone();
    Ok(ConditionedBall { joint, window_mass, conditional })
}

#[derive(Debug, Clone)]
pub struct RatioEntry<S: Scalar> {
    pub n: usize,
    /// `None` when the denominator window has zero mass.
    pub ratio: Option<S>,
    pub error_bound: f64,
}

/// `r(n) = P(X ∈ [n+1, n+1+d)) / P(X ∈ [n, n+d))` for `n ≤ n_max`.
pub fn ratio_table<S: Scalar>(
    series: &SeriesDist<S>,
    span: usize,
    n_max: usize,
) -> Result<Vec<RatioEntry<S>>, OracleError> {
    if n_max + 1 + span > series.len() {
        return Err(OracleError::OutsideTruncation {
            start: n_max + 1,
            end: n_max + 1 + span,
            len: series.len(),
        });
    }
    Ok((0..=n_max)
        .map(|n| {
            let den = series.window(n, span).unwrap();
            let num = series.window(n + 1, span).unwrap();
            let ratio = (!den.is_zero()).then(|| num / den);
            // Coefficients inside the truncation are exact up to rounding.
            let error_bound = match (&ratio, S::EXACT) {
                (_, true) | (None, _) => 0.0,
                (Some(r), false) => 1e-10 * (1.0 + r.as_f64().abs()),
            };
            RatioEntry { n, ratio, error_bound }
        })
        .collect())
}

/// `P(A(τ) = n+1) / P(A(τ) = n)` together with the positivity check on
/// `P(A(τ) = n)`.
pub fn a_ratio_check<S: Scalar>(
    law: &OffspringLaw<S>,
    n_max: usize,
) -> Result<(Vec<RatioEntry<S>>, bool), OracleError> {
    law.require_critical()?;
    let series = a_series(law, n_max + 2)?;
    let all_positive = series.probs.iter().all(|p| p.is_positive_mass());
    Ok((ratio_table(&series, 1, n_max)?, all_positive))
}
