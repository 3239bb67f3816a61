//! Deterministic tree maps: Rizzolo's `φ(t, A)`, the sets `R_u(t)` and
//! leaf removal.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::samplers::MarkedTree;
use crate::tree::{Address, Tree, TreeError, TreeIndex};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TransformError {
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error("the selected vertex set is empty")]
    EmptySelection,
    #[error("leaf removal needs a root with at least one child")]
    NoInternalVertices,
}

/// A tree with a nonempty vertex subset.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubsetSelection {
    tree: Tree,
    flags: Vec<bool>,
}

impl SubsetSelection {
    pub fn new(tree: Tree, subset: &BTreeSet<Address>) -> Result<Self, TransformError> {
        let mut flags = vec![false; tree.card()];
        for u in subset {
            let i = tree.position(u).ok_or_else(|| TreeError::NotInTree(u.clone()))?;
            flags[i] = true;
        }
        Self::from_flags(tree, flags)
    }

    /// Subset given by preorder flags.
    pub fn from_flags(tree: Tree, flags: Vec<bool>) -> Result<Self, TransformError> {
        assert_eq!(tree.card(), flags.len());
        if !flags.contains(&true) {
            return Err(TransformError::EmptySelection);
        }
        Ok(SubsetSelection { tree, flags })
    }

    pub fn tree(&self) -> &Tree {
        &self.tree
    }

    pub fn flags(&self) -> &[bool] {
        &self.flags
    }

    pub fn subset(&self) -> BTreeSet<Address> {
        self.tree
            .addresses()
            .into_iter()
            .zip(&self.flags)
            .filter(|(_, &f)| f)
            .map(|(a, _)| a)
            .collect()
    }

    pub fn len(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// `R_u(t)`: children of `u` or of an ancestor of `u` that come after `u`
/// in lexicographic order.
pub fn r_set(tree: &Tree, u: &Address) -> Result<BTreeSet<Address>, TransformError> {
    let j = tree.position(u).ok_or_else(|| TreeError::NotInTree(u.clone()))?;
    let index = tree.index();
    let addresses = tree.addresses();
    Ok(r_positions(tree, &index, 0, j)
        .into_iter()
        .map(|i| addresses[i].clone())
        .collect())
}

/// Preorder positions of `R_j` inside the fringe subtree rooted at `root`,
/// in increasing order.
fn r_positions(tree: &Tree, index: &TreeIndex, root: usize, j: usize) -> Vec<usize> {
    let mut out = Vec::new();
    // children of j itself
    out.extend(index.children(tree, j));
    // later siblings along the path from j up to root
    let mut v = j;
    while v != root {
        let parent = index.parent[v].expect("v is below root");
        let later = tree.degrees()[parent] - index.rank[v];
        let mut c = index.end[v];
        for _ in 0..later {
            out.push(c);
            c = index.end[c];
        }
        v = parent;
    }
    out.sort_unstable();
    out
}

/// Rizzolo's map: a tree on `Card(A)` vertices built from the fringe
/// subtrees of `t` that carry elements of `A`.
pub fn rizzolo_phi(sel: &SubsetSelection) -> Tree {
    phi_flags(&sel.tree, &sel.flags)
}

fn phi_flags(tree: &Tree, flags: &[bool]) -> Tree {
    let n = tree.card();
    let index = tree.index();
    // next_mark[i]: smallest marked position ≥ i
    let mut next_mark = vec![n; n + 1];
    for i in (0..n).rev() {
        next_mark[i] = if flags[i] { i } else { next_mark[i + 1] };
    }
    let has_mark = |i: usize| next_mark[i] < index.end[i];
    let mut degrees = Vec::with_capacity(flags.len());
    // pending fringe roots, next one on top
    let mut work = vec![0usize];
    while let Some(root) = work.pop() {
        let u0 = next_mark[root];
        debug_assert!(u0 < index.end[root]);
        let children: Vec<usize> = r_positions(tree, &index, root, u0)
            .into_iter()
            .filter(|&c| has_mark(c))
            .collect();
        degrees.push(children.len() as u32);
        work.extend(children.into_iter().rev());
    }
    Tree::from_degrees_unchecked(degrees)
}

/// `φ(t, ℳ(t))`.
pub fn marked_phi(mt: &MarkedTree) -> Result<Tree, TransformError> {
    if !mt.flags().contains(&true) {
        return Err(TransformError::EmptySelection);
    }
    Ok(phi_flags(&mt.tree, mt.flags()))
}

/// `t_ℕ* = φ(t, t ∖ ℒ₀(t))`, the tree of internal vertices.
pub fn leaf_removal(tree: &Tree) -> Result<Tree, TransformError> {
    if tree.root_degree() == 0 {
        return Err(TransformError::NoInternalVertices);
    }
    let flags: Vec<bool> = tree.degrees().iter().map(|&k| k > 0).collect();
    Ok(phi_flags(tree, &flags))
}
