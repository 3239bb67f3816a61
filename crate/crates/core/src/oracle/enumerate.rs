//! Exhaustive enumeration of small trees with their GW probabilities.

use crate::laws::{MarkFunction, OffspringLaw};
use crate::scalar::Scalar;
use crate::tree::Tree;

use super::OracleError;

/// Refuse enumerations larger than this many trees.
pub const MAX_ENUMERATED_TREES: u128 = 20_000_000;

/// Every tree with degrees in the support of `law` and at most `n_max`
/// vertices, with `P(τ = t)`.
#[derive(Debug, Clone)]
pub struct WeightedTreeTable<S: Scalar> {
    pub entries: Vec<(Tree, S)>,
    pub n_max: usize,
}

impl<S: Scalar> WeightedTreeTable<S> {
    pub fn total_mass(&self) -> S {
        self.entries.iter().map(|(_, p)| p.clone()).sum()
    }

    pub fn of_size(&self, n: usize) -> impl Iterator<Item = &(Tree, S)> {
        self.entries.iter().filter(move |(t, _)| t.card() == n)
    }

    /// Joint law of `(Card, M)` on the enumerated trees, every marking
    /// expanded explicitly: `table[size][marks]`.
    pub fn marks_by_size(&self, q: &MarkFunction<S>) -> Vec<Vec<S>> {
        let mut table = vec![vec![S::zero(); self.n_max + 1]; self.n_max + 1];
        for (tree, prob) in &self.entries {
            let n = tree.card();
            assert!(n <= 24, "mark expansion is exponential in the tree size");
            let qs: Vec<S> = tree.degrees().iter().map(|&k| q.q(k as usize)).collect();
            for subset in 0u32..(1 << n) {
                let mut weight = prob.clone();
                for (i, qi) in qs.iter().enumerate() {
                    weight = if subset >> i & 1 == 1 {
                        weight * qi.clone()
                    } else {
                        weight * (S::one() - qi.clone())
                    };
                    if weight.is_zero() {
                        break;
                    }
                }
                if !weight.is_zero() {
                    let m = subset.count_ones() as usize;
                    table[n][m] = table[n][m].clone() + weight;
                }
            }
        }
        table
    }

    /// Joint law of `(Card, A)` on the enumerated trees.
    pub fn protected_by_size(&self) -> Vec<Vec<S>> {
        let mut table = vec![vec![S::zero(); self.n_max + 1]; self.n_max + 1];
        for (tree, prob) in &self.entries {
            let a = tree.protected_count();
            table[tree.card()][a] = table[tree.card()][a].clone() + prob.clone();
        }
        table
    }
}

/// Number of trees of each size `0..=n_max` with degrees in `support`.
pub fn count_trees(support: &[usize], n_max: usize) -> Vec<u128> {
    // ways[len][open]: preorder prefixes of length len with `open` pending slots
    let mut counts = vec![0u128; n_max + 1];
    let mut ways = vec![0u128; n_max + 2];
    ways[1] = 1;
    for len in 1..=n_max {
        let mut next = vec![0u128; n_max + 2];
        for open in 1..ways.len() {
            let w = ways[open];
            if w == 0 {
                continue;
            }
            for &k in support {
                let after = open + k - 1;
                if after == 0 {
                    counts[len] = counts[len].saturating_add(w);
                } else if len + after <= n_max {
                    next[after] = next[after].saturating_add(w);
                }
            }
        }
        ways = next;
    }
    counts
}

pub fn enumerate_trees<S: Scalar>(
    law: &OffspringLaw<S>,
    n_max: usize,
) -> Result<WeightedTreeTable<S>, OracleError> {
    let support = law.support();
    let total: u128 = count_trees(&support, n_max).iter().sum();
    if total > MAX_ENUMERATED_TREES {
        return Err(OracleError::Capacity { trees: total, limit: MAX_ENUMERATED_TREES });
    }
    let mut entries = Vec::with_capacity(total as usize);
    let mut prefix = Vec::with_capacity(n_max);
    extend(law, &support, n_max, &mut prefix, 1, S::one(), &mut entries);
    entries.sort_by(|(a, _), (b, _)| a.card().cmp(&b.card()).then_with(|| a.cmp(b)));
    Ok(WeightedTreeTable { entries, n_max })
}

fn extend<S: Scalar>(
    law: &OffspringLaw<S>,
    support: &[usize],
    n_max: usize,
    prefix: &mut Vec<u32>,
    open: usize,
    prob: S,
    out: &mut Vec<(Tree, S)>,
) {
    for &k in support {
        let after = open + k - 1;
        if prefix.len() + 1 + after > n_max {
            continue;
        }
        prefix.push(k as u32);
        let p = prob.clone() * law.p(k);
        if after == 0 {
            out.push((Tree::from_degrees_unchecked(prefix.clone()), p));
        } else {
            extend(law, support, n_max, prefix, after, p, out);
        }
        prefix.pop();
    }
}
