//! Random generators: GW trees, marks, Kesten's tree, conditioned trees,
//! the marking walk and the leaf-grafted tree built on a reduced tree.
//!
//! Every sampler is a pure function of its inputs and an [`RngHandle`].

use std::collections::BTreeSet;

use rand::distr::Distribution;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::Binomial;
use serde::Serialize;
use thiserror::Error;

use crate::laws::{self, LawError, MarkFunction, OffspringLaw};
use crate::oracle::{self, OracleError};
use crate::scalar::Scalar;
use crate::tree::{Address, ProtectedCounter, Restriction, Tree};

/// Default node budget per rejection attempt.
pub const DEFAULT_NODE_BUDGET: usize = 1_000_000;
/// Default number of rejection attempts.
pub const DEFAULT_ATTEMPT_BUDGET: u64 = 100_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SampleError {
    #[error(transparent)]
    Law(#[from] LawError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("rejection budget exhausted after {attempts} attempts")]
    BudgetExhausted { attempts: u64 },
    #[error("P({what} = {n}) is zero; admissible values are {admissible}")]
    OutsideSupport { what: &'static str, n: usize, admissible: String },
    #[error("tree exceeded the node budget after {nodes} nodes")]
    Overflow { nodes: usize },
}

/// Seeded random stream. Identical `(seed, stream)` give identical draws.
#[derive(Clone, Debug)]
pub struct RngHandle {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
}

impl RngHandle {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        RngHandle { seed, stream, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }
}

impl RngCore for RngHandle {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// Alias table over the support of a law, plus mark probabilities.
#[derive(Clone, Debug)]
pub struct DegreeSampler {
    degrees: Vec<u32>,
    alias: WeightedAliasIndex<f64>,
    marks: Vec<f64>,
}

impl DegreeSampler {
    pub fn new<S: Scalar>(law: &OffspringLaw<S>) -> Self {
        Self::with_weights(law.weights().iter().map(Scalar::as_f64).collect(), None)
    }

    pub fn with_marks<S: Scalar>(law: &OffspringLaw<S>, q: &MarkFunction<S>) -> Self {
        let marks = (0..=law.max_degree()).map(|k| q.q(k).as_f64()).collect();
        Self::with_weights(law.weights().iter().map(Scalar::as_f64).collect(), Some(marks))
    }

    fn with_weights(weights: Vec<f64>, marks: Option<Vec<f64>>) -> Self {
        let (degrees, support): (Vec<u32>, Vec<f64>) = weights
            .iter()
            .enumerate()
            .filter(|(_, &w)| w > 0.0)
            .map(|(k, &w)| (k as u32, w))
            .unzip();
        let alias = WeightedAliasIndex::new(support).expect("validated law has positive mass");
        let marks = marks.unwrap_or_else(|| vec![0.0; weights.len()]);
        DegreeSampler { degrees, alias, marks }
    }

    pub fn degree<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        self.degrees[self.alias.sample(rng)]
    }

    pub fn mark<R: Rng + ?Sized>(&self, k: u32, rng: &mut R) -> bool {
        let q = self.marks[k as usize];
        if q <= 0.0 {
            false
        } else if q >= 1.0 {
            true
        } else {
            rng.random::<f64>() < q
        }
    }
}

/// A tree with a marked vertex set, stored as preorder flags.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MarkedTree {
    pub tree: Tree,
    flags: Vec<bool>,
}

impl MarkedTree {
    pub fn new(tree: Tree, flags: Vec<bool>) -> Self {
        assert_eq!(tree.card(), flags.len());
        MarkedTree { tree, flags }
    }

    pub fn from_marks(tree: Tree, marks: &BTreeSet<Address>) -> Result<Self, crate::tree::TreeError> {
        let mut flags = vec![false; tree.card()];
        for u in marks {
            let i = tree.position(u).ok_or_else(|| crate::tree::TreeError::NotInTree(u.clone()))?;
            flags[i] = true;
        }
        Ok(MarkedTree { tree, flags })
    }

    pub fn flags(&self) -> &[bool] {
        &self.flags
    }

    pub fn mark_count(&self) -> usize {
        self.flags.iter().filter(|&&m| m).count()
    }

    pub fn marks(&self) -> BTreeSet<Address> {
        self.tree
            .addresses()
            .into_iter()
            .zip(&self.flags)
            .filter(|(_, &m)| m)
            .map(|(a, _)| a)
            .collect()
    }
}

/// Result of a budgeted tree draw.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GwDraw<T> {
    Tree(T),
    /// The node budget was hit; carries the number of nodes generated.
    Overflow { nodes: usize },
}

impl<T> GwDraw<T> {
    pub fn ok(self) -> Option<T> {
        match self {
            GwDraw::Tree(t) => Some(t),
            GwDraw::Overflow { .. } => None,
        }
    }
}

/// Depth-first GW generation: degrees are drawn in preorder until the
/// Łukasiewicz walk reaches −1.
pub fn sample_gw<R: Rng + ?Sized>(sampler: &DegreeSampler, cap: usize, rng: &mut R) -> GwDraw<Tree> {
    let mut degrees = Vec::new();
    let mut open: i64 = 1;
    while open > 0 {
        if degrees.len() >= cap {
            return GwDraw::Overflow { nodes: degrees.len() };
        }
        let k = sampler.degree(rng);
        degrees.push(k);
        open += k as i64 - 1;
    }
    GwDraw::Tree(Tree::from_degrees_unchecked(degrees))
}

pub fn sample_marks<S: Scalar, R: Rng + ?Sized>(tree: &Tree, q: &MarkFunction<S>, rng: &mut R) -> MarkedTree {
    let flags = tree
        .degrees()
        .iter()
        .map(|&k| {
            let qk = q.q(k as usize).as_f64();
            if qk <= 0.0 {
                false
            } else if qk >= 1.0 {
                true
            } else {
                rng.random::<f64>() < qk
            }
        })
        .collect();
    MarkedTree { tree: tree.clone(), flags }
}

/// GW tree and its marks drawn together; `None` as soon as more than
/// `max_marks` marks appear.
pub fn sample_marked_gw_bounded<R: Rng + ?Sized>(
    sampler: &DegreeSampler,
    cap: usize,
    max_marks: usize,
    rng: &mut R,
) -> Option<GwDraw<MarkedTree>> {
    let mut degrees = Vec::new();
    let mut flags = Vec::new();
    let mut marks = 0;
    let mut open: i64 = 1;
    while open > 0 {
        if degrees.len() >= cap {
            return Some(GwDraw::Overflow { nodes: degrees.len() });
        }
        let k = sampler.degree(rng);
        let m = sampler.mark(k, rng);
        marks += m as usize;
        if marks > max_marks {
            return None;
        }
        degrees.push(k);
        flags.push(m);
        open += k as i64 - 1;
    }
    Some(GwDraw::Tree(MarkedTree { tree: Tree::from_degrees_unchecked(degrees), flags }))
}

/// `(τ, ℳ(τ))` in one pass.
pub fn sample_marked_gw<R: Rng + ?Sized>(sampler: &DegreeSampler, cap: usize, rng: &mut R) -> GwDraw<MarkedTree> {
    sample_marked_gw_bounded(sampler, cap, usize::MAX, rng).expect("unbounded marks")
}

/// Kesten's tree restricted to height `h`, with its spine `v_1 … v_h`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KestenSlice {
    pub restriction: Restriction,
    pub spine: Vec<Address>,
}

/// Size-biased degree sampler for spine vertices.
#[derive(Clone, Debug)]
pub struct KestenSampler {
    ordinary: DegreeSampler,
    spine: DegreeSampler,
}

impl KestenSampler {
    pub fn new<S: Scalar>(law: &OffspringLaw<S>) -> Result<Self, LawError> {
        law.require_critical()?;
        let biased = laws::size_biased(law).iter().map(Scalar::as_f64).collect();
        Ok(KestenSampler {
            ordinary: DegreeSampler::new(law),
            spine: DegreeSampler::with_weights(biased, None),
        })
    }
}

/// Exact draw of `τ*` cut at height `h`: spine vertices reproduce per `p*`
/// and pick a uniform spine child, every other vertex per `p`; vertices at
/// height `h` are recorded but not expanded.
pub fn sample_kesten<R: Rng + ?Sized>(sampler: &KestenSampler, h: u32, rng: &mut R) -> KestenSlice {
    struct Frame {
        remaining: u32,
        next_rank: u32,
        spine_rank: u32,
        depth: u32,
    }
    let mut degrees = Vec::new();
    let mut spine_path = Vec::with_capacity(h as usize);
    let mut stack: Vec<Frame> = Vec::new();
    let mut visit = |depth: u32, on_spine: bool, stack: &mut Vec<Frame>, rng: &mut R| {
        if depth == h {
            degrees.push(0);
            return;
        }
        let k = if on_spine {
            sampler.spine.degree(rng)
        } else {
            sampler.ordinary.degree(rng)
        };
        degrees.push(k);
        let spine_rank = if on_spine {
            let j = rng.random_range(1..=k);
            spine_path.push(j);
            j
        } else {
            0
        };
        if k > 0 {
            stack.push(Frame { remaining: k, next_rank: 1, spine_rank, depth });
        }
    };
    visit(0, true, &mut stack, rng);
    while let Some(top) = stack.last_mut() {
        if top.remaining == 0 {
            stack.pop();
            continue;
        }
        let rank = top.next_rank;
        top.next_rank += 1;
        top.remaining -= 1;
        let on_spine = rank == top.spine_rank;
        let depth = top.depth + 1;
        visit(depth, on_spine, &mut stack, rng);
    }
    let spine = (1..=spine_path.len())
        .map(|n| Address::new(spine_path[..n].to_vec()).expect("ranks start at 1"))
        .collect();
    KestenSlice {
        restriction: Restriction::from_parts(h, Tree::from_degrees_unchecked(degrees)),
        spine,
    }
}

/// Rejection limits.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Budget {
    pub max_nodes: usize,
    pub max_attempts: u64,
}

impl Default for Budget {
    fn default() -> Self {
        Budget { max_nodes: DEFAULT_NODE_BUDGET, max_attempts: DEFAULT_ATTEMPT_BUDGET }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Conditioned {
    pub tree: Tree,
    /// Attempts used, including the accepted one.
    pub attempts: u64,
    /// Attempts that hit the node budget.
    pub overflows: u64,
}

fn admissible_description(probs: &[bool], what: &str) -> String {
    let support: Vec<u64> = probs
        .iter()
        .enumerate()
        .filter(|(_, &pos)| pos)
        .map(|(n, _)| n as u64)
        .collect();
    let Some(&first) = support.iter().find(|&&n| n > 0) else {
        return format!("{what} ∈ {{0}}");
    };
    let shifted = support.iter().filter(|&&n| n >= first).map(|&n| n - first);
    match laws::span(shifted) {
        Ok(d) if d > 1 => format!("{what} ≡ {} (mod {d}), {what} ≥ {first}", first % d),
        _ => format!("{what} ≥ {first}"),
    }
}

/// Rejection sampler for `τ` given `M(τ) = n`.
#[derive(Clone, Debug)]
pub struct MarkConditioner {
    sampler: DegreeSampler,
    n: usize,
    budget: Budget,
    /// `P(M(τ) = n)` from the series oracle.
    pub target_probability: f64,
}

impl MarkConditioner {
    pub fn new<S: Scalar>(
        law: &OffspringLaw<S>,
        q: &MarkFunction<S>,
        n: usize,
        budget: Budget,
    ) -> Result<Self, SampleError> {
        laws::check_pair(law, q)?;
        let series = oracle::m_series(&law.to_f64(), &q.to_f64(), n + 1)?;
        let target = series.prob(n);
        if !target.is_positive_mass() {
            let positive: Vec<bool> = series.probs.iter().map(|p| p.is_positive_mass()).collect();
            return Err(SampleError::OutsideSupport {
                what: "M",
                n,
                admissible: admissible_description(&positive, "n"),
            });
        }
        Ok(MarkConditioner {
            sampler: DegreeSampler::with_marks(law, q),
            n,
            budget,
            target_probability: target,
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Conditioned, SampleError> {
        self.sample_marked(rng).map(|(marked, attempts, overflows)| Conditioned {
            tree: marked.tree,
            attempts,
            overflows,
        })
    }

    /// The accepted tree together with its marks.
    pub fn sample_marked<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(MarkedTree, u64, u64), SampleError> {
        let mut overflows = 0;
        for attempt in 1..=self.budget.max_attempts {
            match sample_marked_gw_bounded(&self.sampler, self.budget.max_nodes, self.n, rng) {
                Some(GwDraw::Tree(mt)) if mt.mark_count() == self.n => return Ok((mt, attempt, overflows)),
                Some(GwDraw::Overflow { .. }) => overflows += 1,
                _ => {}
            }
        }
        Err(SampleError::BudgetExhausted { attempts: self.budget.max_attempts })
    }
}

pub fn sample_conditioned_m<S: Scalar, R: Rng + ?Sized>(
    law: &OffspringLaw<S>,
    q: &MarkFunction<S>,
    n: usize,
    budget: Budget,
    rng: &mut R,
) -> Result<Conditioned, SampleError> {
    MarkConditioner::new(law, q, n, budget)?.sample(rng)
}

/// Rejection sampler for `τ` given `A(τ) = n`.
#[derive(Clone, Debug)]
pub struct ProtectedConditioner {
    sampler: DegreeSampler,
    n: usize,
    budget: Budget,
    /// `P(A(τ) = n)` from the series oracle.
    pub target_probability: f64,
}

impl ProtectedConditioner {
    pub fn new<S: Scalar>(law: &OffspringLaw<S>, n: usize, budget: Budget) -> Result<Self, SampleError> {
        law.require_critical()?;
        let series = oracle::a_series(&law.to_f64(), n + 1)?;
        let target = series.prob(n);
        if !target.is_positive_mass() {
            let positive: Vec<bool> = series.probs.iter().map(|p| p.is_positive_mass()).collect();
            return Err(SampleError::OutsideSupport {
                what: "A",
                n,
                admissible: admissible_description(&positive, "n"),
            });
        }
        Ok(ProtectedConditioner {
            sampler: DegreeSampler::new(law),
            n,
            budget,
            target_probability: target,
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Conditioned, SampleError> {
        let mut overflows = 0;
        'attempt: for attempt in 1..=self.budget.max_attempts {
            let mut degrees = Vec::new();
            let mut counter = ProtectedCounter::new();
            let mut open: i64 = 1;
            while open > 0 {
                if degrees.len() >= self.budget.max_nodes {
                    overflows += 1;
                    continue 'attempt;
                }
                let k = self.sampler.degree(rng);
                degrees.push(k);
                counter.push(k);
                // closed vertices never change status
                if counter.count() > self.n {
                    continue 'attempt;
                }
                open += k as i64 - 1;
            }
            if counter.count() == self.n {
                return Ok(Conditioned {
                    tree: Tree::from_degrees_unchecked(degrees),
                    attempts: attempt,
                    overflows,
                });
            }
        }
        Err(SampleError::BudgetExhausted { attempts: self.budget.max_attempts })
    }
}

pub fn sample_conditioned_a<S: Scalar, R: Rng + ?Sized>(
    law: &OffspringLaw<S>,
    n: usize,
    budget: Budget,
    rng: &mut R,
) -> Result<Conditioned, SampleError> {
    ProtectedConditioner::new(law, n, budget)?.sample(rng)
}

/// One realization of the marking walk.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct WalkRecord {
    /// Hitting time of −1; `None` if the horizon came first.
    pub g: Option<u64>,
    /// First marked step; `None` if the walk died first or was censored.
    pub n: Option<u64>,
    /// `Some(N ≤ G)`, or `None` when the horizon was reached before either.
    pub accepted: Option<bool>,
    pub x_tilde: Option<u64>,
    pub y: Option<u64>,
}

impl WalkRecord {
    pub fn censored(&self) -> bool {
        self.accepted.is_none()
    }
}

#[derive(Clone, Debug)]
pub struct WalkSampler {
    sampler: DegreeSampler,
    gamma: f64,
    /// Steps after which the walk is abandoned.
    pub horizon: u64,
    /// Keep walking after `N` to resolve `G`.
    pub resolve_g: bool,
}

impl WalkSampler {
    pub fn new<S: Scalar>(law: &OffspringLaw<S>, q: &MarkFunction<S>, horizon: u64) -> Result<Self, LawError> {
        let gamma = laws::gamma(&law.to_f64(), &q.to_f64())?;
        Ok(WalkSampler {
            sampler: DegreeSampler::with_marks(law, q),
            gamma,
            horizon,
            resolve_g: true,
        })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }
}

pub fn sample_walk<R: Rng + ?Sized>(walk: &WalkSampler, rng: &mut R) -> WalkRecord {
    let mut record = WalkRecord { g: None, n: None, accepted: None, x_tilde: None, y: None };
    let mut s: i64 = 0;
    for step in 1..=walk.horizon {
        let k = walk.sampler.degree(rng);
        let marked = walk.sampler.mark(k, rng);
        s += k as i64 - 1;
        if marked && record.n.is_none() && record.g.is_none() {
            let x_tilde = (1 + s) as u64;
            record.n = Some(step);
            record.accepted = Some(true);
            record.x_tilde = Some(x_tilde);
            record.y = Some(Binomial::new(x_tilde, walk.gamma).expect("γ ∈ [0,1]").sample(rng));
            if !walk.resolve_g {
                return record;
            }
        }
        if s == -1 {
            record.g = Some(step);
            if record.accepted.is_none() {
                record.accepted = Some(false);
            }
            return record;
        }
    }
    record
}

/// `τ̂` built from a reduced tree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HatTau {
    pub reduced: Tree,
    pub grafted: Tree,
    /// Preorder positions in `grafted` of the vertices with `W = 0`.
    mark_positions: Vec<usize>,
}

impl HatTau {
    pub fn mark_positions(&self) -> &[usize] {
        &self.mark_positions
    }

    pub fn marks(&self) -> BTreeSet<Address> {
        let addresses = self.grafted.addresses();
        self.mark_positions.iter().map(|&i| addresses[i].clone()).collect()
    }

    /// The marks are exactly the protected vertices of `grafted`.
    pub fn identity_holds(&self) -> bool {
        let flags = self.grafted.protected_flags();
        let protected: Vec<usize> = (0..flags.len()).filter(|&i| flags[i]).collect();
        protected == self.mark_positions
    }
}

#[derive(Clone, Debug)]
pub struct HatTauSampler {
    reduced: DegreeSampler,
    /// `w[k]` samples `W` for a reduced vertex of degree `k`.
    w: Vec<Option<WeightedAliasIndex<f64>>>,
    pub cap: usize,
}

impl HatTauSampler {
    pub fn new<S: Scalar>(law: &OffspringLaw<S>, cap: usize) -> Result<Self, LawError> {
        let reduced = laws::reduced_law(law)?;
        let w = (0..=reduced.max_degree())
            .map(|k| {
                if reduced.p(k).is_zero() {
                    return Ok(None);
                }
                let probs: Vec<f64> = laws::w_law(law, k)?.probs.iter().map(Scalar::as_f64).collect();
                Ok(Some(WeightedAliasIndex::new(probs).expect("w law has positive mass")))
            })
            .collect::<Result<_, LawError>>()?;
        Ok(HatTauSampler { reduced: DegreeSampler::new(&reduced), w, cap })
    }
}

/// Draws the reduced tree from the reduced law, then grafts `W(u)` leaves
/// on every vertex, the old children taking a uniform `k`-subset of the
/// `k + W(u)` slots.
pub fn sample_hat_tau<R: Rng + ?Sized>(sampler: &HatTauSampler, rng: &mut R) -> GwDraw<HatTau> {
    let reduced = match sample_gw(&sampler.reduced, sampler.cap, rng) {
        GwDraw::Tree(t) => t,
        GwDraw::Overflow { nodes } => return GwDraw::Overflow { nodes },
    };
    let rdeg = reduced.degrees();
    let mut next_reduced = 0;
    let mut degrees = Vec::new();
    let mut marks = Vec::new();
    // (slots left, old children among them); each slot takes an old child
    // with probability old/slots, giving a uniform k-subset
    let mut stack: Vec<(u32, u32)> = Vec::new();
    let mut emit_reduced = |degrees: &mut Vec<u32>, stack: &mut Vec<(u32, u32)>, rng: &mut R| {
        let k = rdeg[next_reduced] as usize;
        next_reduced += 1;
        let alias = sampler.w[k].as_ref().expect("degree in reduced support");
        let w = alias.sample(rng);
        if w == 0 {
            marks.push(degrees.len());
        }
        degrees.push((k + w) as u32);
        stack.push(((k + w) as u32, k as u32));
    };
    emit_reduced(&mut degrees, &mut stack, rng);
    while let Some(top) = stack.last_mut() {
        if degrees.len() > sampler.cap {
            return GwDraw::Overflow { nodes: degrees.len() };
        }
        let (slots, old) = *top;
        if slots == 0 {
            stack.pop();
            continue;
        }
        let take_old = old == slots || (old > 0 && rng.random_range(0..slots) < old);
        *top = (slots - 1, old - take_old as u32);
        if take_old {
            emit_reduced(&mut degrees, &mut stack, rng);
        } else {
            degrees.push(0);
        }
    }
    GwDraw::Tree(HatTau {
        reduced,
        grafted: Tree::from_degrees_unchecked(degrees),
        mark_positions: marks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rational;
    use crate::tree::BallEvent;

    fn binary() -> OffspringLaw<Rational> {
        OffspringLaw::binary_critical()
    }

    fn t(s: &str) -> Tree {
        s.parse().unwrap()
    }

    #[test]
    fn reproducible_streams() {
        let sampler = DegreeSampler::new(&binary());
        let draw = |seed, stream| {
            let mut rng = RngHandle::new(seed, stream);
            (0..50).map(|_| sample_gw(&sampler, 1000, &mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(draw(7, 0), draw(7, 0));
        assert_ne!(draw(7, 0), draw(7, 1));
        assert_ne!(draw(7, 0), draw(8, 0));
    }

    #[test]
    fn gw_small_sizes() {
        let sampler = DegreeSampler::new(&binary());
        let mut rng = RngHandle::new(1, 0);
        let n = 200_000;
        let (mut one, mut three) = (0, 0);
        for _ in 0..n {
            if let GwDraw::Tree(tree) = sample_gw(&sampler, 10_000, &mut rng) {
                assert_eq!(tree.lukasiewicz_sum(), -1);
                match tree.card() {
                    1 => one += 1,
                    3 => three += 1,
                    _ => {}
                }
            }
        }
        let check = |count: usize, p: f64| {
            let sd = (p * (1.0 - p) / n as f64).sqrt();
            assert!((count as f64 / n as f64 - p).abs() < 3.0 * sd, "{count} vs {p}");
        };
        check(one, 0.5);
        check(three, 0.125);
    }

    #[test]
    fn overflow_is_reported() {
        let sampler = DegreeSampler::new(&OffspringLaw::new(vec![0.1, 0.0, 0.9]).unwrap());
        let mut rng = RngHandle::new(3, 0);
        let overflows = (0..100)
            .filter(|_| matches!(sample_gw(&sampler, 50, &mut rng), GwDraw::Overflow { nodes: 50 }))
            .count();
        assert!(overflows > 50);
    }

    #[test]
    fn deterministic_marks() {
        let tree = t("2 2 0 0 3 0 0 0");
        let mut rng = RngHandle::new(0, 0);
        assert_eq!(sample_marks(&tree, &MarkFunction::<f64>::all(), &mut rng).mark_count(), 8);
        let none = MarkFunction::constant(0.0).unwrap();
        assert_eq!(sample_marks(&tree, &none, &mut rng).mark_count(), 0);
        let leaves = sample_marks(&tree, &MarkFunction::<f64>::leaves(), &mut rng);
        assert_eq!(leaves.marks(), tree.leaves().into_iter().collect());
    }

    #[test]
    fn kesten_slice_structure() {
        let sampler = KestenSampler::new(&binary()).unwrap();
        let mut rng = RngHandle::new(5, 0);
        for _ in 0..200 {
            let slice = sample_kesten(&sampler, 4, &mut rng);
            let tree = slice.restriction.truncated();
            assert_eq!(tree.root_degree(), 2);
            assert_eq!(slice.spine.len(), 4);
            for v in &slice.spine {
                assert!(tree.contains(v));
                let parent = v.parent().unwrap();
                assert!(*v.path().last().unwrap() <= tree.degree(&parent).unwrap());
                if (v.generation() as u32) < 4 {
                    assert_eq!(tree.degree(v), Some(2));
                }
            }
            assert!(tree.height() <= 4);
        }
        let slice = sample_kesten(&sampler, 0, &mut rng);
        assert_eq!(slice.restriction.truncated(), &Tree::leaf());
        assert!(slice.spine.is_empty());
    }

    #[test]
    fn kesten_cherry_frequency() {
        let sampler = KestenSampler::new(&binary()).unwrap();
        let mut rng = RngHandle::new(9, 0);
        let event = BallEvent::new(t("2 0 0"), "1".parse().unwrap()).unwrap();
        let n = 100_000;
        let hits = (0..n)
            .filter(|_| sample_kesten(&sampler, 3, &mut rng).restriction.ball_member(&event).unwrap())
            .count();
        let sd = (0.25 * 0.75 / n as f64).sqrt();
        assert!((hits as f64 / n as f64 - 0.25).abs() < 3.0 * sd);
    }

    #[test]
    fn conditioned_support_errors() {
        let err = MarkConditioner::new(&binary(), &MarkFunction::all(), 4, Budget::default()).unwrap_err();
        match err {
            SampleError::OutsideSupport { admissible, .. } => assert_eq!(admissible, "n ≡ 1 (mod 2), n ≥ 1"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn conditioned_small_cases() {
        let mut rng = RngHandle::new(11, 0);
        let law = binary();
        let c = sample_conditioned_m(&law, &MarkFunction::all(), 3, Budget::default(), &mut rng).unwrap();
        assert_eq!(c.tree, t("2 0 0"));
        let a0 = sample_conditioned_a(&law, 0, Budget::default(), &mut rng).unwrap();
        assert_eq!(a0.tree.protected_count(), 0);
        for _ in 0..50 {
            let a1 = sample_conditioned_a(&law, 1, Budget::default(), &mut rng).unwrap();
            assert_eq!(a1.tree.protected_count(), 1);
            assert!(a1.tree.card() >= 7);
        }
    }

    #[test]
    fn budget_exhaustion() {
        let mut rng = RngHandle::new(2, 0);
        let budget = Budget { max_nodes: 100, max_attempts: 3 };
        let err = sample_conditioned_m(&binary(), &MarkFunction::all(), 99, budget, &mut rng).unwrap_err();
        assert_eq!(err, SampleError::BudgetExhausted { attempts: 3 });
    }

    #[test]
    fn walk_all_marked() {
        let walk = WalkSampler::new(&binary(), &MarkFunction::all(), 1000).unwrap();
        let mut rng = RngHandle::new(4, 0);
        for _ in 0..100 {
            let rec = sample_walk(&walk, &mut rng);
            assert_eq!(rec.n, Some(1));
            assert!(rec.x_tilde == Some(0) || rec.x_tilde == Some(2));
            assert_eq!(rec.y, rec.x_tilde);
        }
    }

    #[test]
    fn walk_acceptance_matches_gamma() {
        let q = MarkFunction::constant(0.5).unwrap();
        let mut walk = WalkSampler::new(&binary().to_f64(), &q, 10_000).unwrap();
        walk.resolve_g = false;
        let mut rng = RngHandle::new(6, 0);
        let n = 50_000;
        let records: Vec<_> = (0..n).map(|_| sample_walk(&walk, &mut rng)).collect();
        let censored = records.iter().filter(|r| r.censored()).count();
        let accepted = records.iter().filter(|r| r.accepted == Some(true)).count();
        let gamma = walk.gamma();
        let sd = (gamma * (1.0 - gamma) / n as f64).sqrt();
        assert!(censored < 50);
        assert!((accepted as f64 / n as f64 - gamma).abs() < 4.0 * sd + censored as f64 / n as f64);
    }

    #[test]
    fn hat_tau_binary_is_full() {
        let sampler = HatTauSampler::new(&binary(), 100_000).unwrap();
        let mut rng = RngHandle::new(8, 0);
        for _ in 0..2000 {
            let Some(hat) = sample_hat_tau(&sampler, &mut rng).ok() else {
                continue;
            };
            assert!(hat.grafted.degrees().iter().all(|&k| k == 0 || k == 2));
            assert!(hat.identity_holds());
            assert_eq!(hat.grafted.protected_count(), hat.mark_positions().len());
            assert_eq!(hat.grafted.internal_count(), hat.reduced.card());
        }
    }

    #[test]
    fn hat_tau_identity_geometric() {
        let law = OffspringLaw::geometric(0.5, 40).unwrap();
        let sampler = HatTauSampler::new(&law, 100_000).unwrap();
        let mut rng = RngHandle::new(10, 0);
        for _ in 0..2000 {
            if let Some(hat) = sample_hat_tau(&sampler, &mut rng).ok() {
                assert!(hat.identity_holds());
                assert_eq!(crate::transforms::leaf_removal(&hat.grafted).unwrap(), hat.reduced);
            }
        }
    }
}
