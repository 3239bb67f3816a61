//! Finite ordered rooted trees in Neveu addressing.
//!
//! A [`Tree`] is stored as its preorder (depth-first, lexicographic)
//! sequence of out-degrees. Preorder position and lexicographic order on
//! addresses coincide, so most operations are slices of that sequence.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Node budget used by samplers unless configured otherwise.
pub const DEFAULT_MAX_NODES: usize = 10_000_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TreeError {
    #[error("parse error at position {position}: {reason}")]
    Parse { position: usize, reason: String },
    #[error("address {0} is not a vertex of the tree")]
    NotInTree(Address),
    #[error("address {0} is not a leaf of the tree")]
    NotALeaf(Address),
    #[error("invalid address {0:?}")]
    BadAddress(String),
}

/// A vertex `u = u_1 u_2 ... u_n` of the Ulam-Harris tree; empty is the root.
///
/// The derived `Ord` on the index vector is the lexicographic order on
/// addresses: a strict ancestor precedes its descendants and siblings
/// compare by index.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Address(Vec<u32>);

impl Address {
    pub fn root() -> Self {
        Address(Vec::new())
    }

    pub fn new(path: Vec<u32>) -> Result<Self, TreeError> {
        if path.contains(&0) {
            return Err(TreeError::BadAddress(format!("{path:?}")));
        }
        Ok(Address(path))
    }

    pub fn path(&self) -> &[u32] {
        &self.0
    }

    pub fn generation(&self) -> usize {
        self.0.len()
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    pub fn child(&self, i: u32) -> Self {
        assert!(i >= 1, "child indices start at 1");
        let mut path = self.0.clone();
        path.push(i);
        Address(path)
    }

    pub fn parent(&self) -> Option<Self> {
        if self.is_root() {
            None
        } else {
            Some(Address(self.0[..self.0.len() - 1].to_vec()))
        }
    }

    pub fn concat(&self, other: &Address) -> Self {
        let mut path = self.0.clone();
        path.extend_from_slice(&other.0);
        Address(path)
    }

    /// `An(u)`: every prefix of `u`, including the root and `u` itself,
    /// root first.
    pub fn ancestors(&self) -> Vec<Address> {
        (0..=self.0.len()).map(|n| Address(self.0[..n].to_vec())).collect()
    }

    pub fn is_ancestor_of(&self, other: &Address) -> bool {
        other.0.starts_with(&self.0)
    }

    /// `v` with `self = prefix v`, if `prefix` is an ancestor.
    pub fn strip_prefix(&self, prefix: &Address) -> Option<Address> {
        self.0.strip_prefix(prefix.0.as_slice()).map(|p| Address(p.to_vec()))
    }
}

/// Strict lexicographic order `u < v`.
pub fn lex_less(u: &Address, v: &Address) -> bool {
    u < v
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("∅");
        }
        let parts: Vec<String> = self.0.iter().map(u32::to_string).collect();
        f.write_str(&parts.join("."))
    }
}

impl fmt::Debug for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Address({self})")
    }
}

impl FromStr for Address {
    type Err = TreeError;

    /// `∅`, `root` or the empty string for the root; otherwise dot-separated
    /// positive indices such as `1.2`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() || s == "∅" || s.eq_ignore_ascii_case("root") {
            return Ok(Address::root());
        }
        let path = s
            .split('.')
            .map(|part| part.parse::<u32>().map_err(|_| TreeError::BadAddress(s.into())))
            .collect::<Result<Vec<_>, _>>()?;
        Address::new(path).map_err(|_| TreeError::BadAddress(s.into()))
    }
}

/// Streaming protected-node counter over a preorder degree sequence.
///
/// A vertex is closed once its last child's subtree is complete; it is
/// protected iff it has children and none of them is a leaf.
#[derive(Debug, Default, Clone)]
pub struct ProtectedCounter {
    // (children still to be generated, saw a leaf child)
    open: Vec<(u32, bool)>,
    count: usize,
}

impl ProtectedCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, degree: u32) {
        if let Some(top) = self.open.last_mut() {
            top.0 -= 1;
            if degree == 0 {
                top.1 = true;
            }
        }
        if degree > 0 {
            self.open.push((degree, false));
            return;
        }
        while let Some(&(remaining, saw_leaf)) = self.open.last() {
            if remaining > 0 {
                break;
            }
            self.open.pop();
            if !saw_leaf {
                self.count += 1;
            }
        }
    }

    pub fn count(&self) -> usize {
        self.count
    }
}

/// Finite ordered rooted tree, canonically its preorder out-degree sequence.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Tree {
    degrees: Vec<u32>,
}

/// Per-vertex structural arrays, indexed by preorder position.
#[derive(Debug, Clone)]
pub struct TreeIndex {
    pub parent: Vec<Option<usize>>,
    pub depth: Vec<u32>,
    /// Exclusive end of the subtree rooted at each vertex.
    pub end: Vec<usize>,
    /// Child rank (1-based) of each vertex within its parent; 0 for the root.
    pub rank: Vec<u32>,
}

impl TreeIndex {
    pub fn children<'a>(&'a self, tree: &'a Tree, i: usize) -> impl Iterator<Item = usize> + 'a {
        let mut next = i + 1;
        (0..tree.degrees[i]).map(move |_| {
            let c = next;
            next = self.end[c];
            c
        })
    }
}

impl Tree {
    /// The single-vertex tree `{∅}`.
    pub fn leaf() -> Self {
        Tree { degrees: vec![0] }
    }

    pub fn from_degrees(degrees: Vec<u32>) -> Result<Self, TreeError> {
        let mut open: i64 = 1;
        for (i, &k) in degrees.iter().enumerate() {
            if open == 0 {
                return Err(TreeError::Parse {
                    position: i,
                    reason: "sequence continues after the tree is complete".into(),
                });
            }
            open += k as i64 - 1;
        }
        if open != 0 {
            return Err(TreeError::Parse {
                position: degrees.len(),
                reason: format!("sequence ends with {open} open child slot(s)"),
            });
        }
        Ok(Tree { degrees })
    }

    /// Caller guarantees a valid preorder sequence.
    pub(crate) fn from_degrees_unchecked(degrees: Vec<u32>) -> Self {
        debug_assert!(Tree::from_degrees(degrees.clone()).is_ok());
        Tree { degrees }
    }

    pub fn degrees(&self) -> &[u32] {
        &self.degrees
    }

    pub fn card(&self) -> usize {
        self.degrees.len()
    }

    pub fn root_degree(&self) -> u32 {
        self.degrees[0]
    }

    /// `Σ_u (k_u − 1)`; equals −1 for every finite tree.
    pub fn lukasiewicz_sum(&self) -> i64 {
        self.degrees.iter().map(|&k| k as i64 - 1).sum()
    }

    pub fn index(&self) -> TreeIndex {
        let n = self.degrees.len();
        let mut parent = vec![None; n];
        let mut depth = vec![0u32; n];
        let mut rank = vec![0u32; n];
        let mut stack: Vec<(usize, u32)> = Vec::new(); // (vertex, children seen)
        for i in 0..n {
            if let Some(top) = stack.last_mut() {
                top.1 += 1;
                parent[i] = Some(top.0);
                depth[i] = depth[top.0] + 1;
                rank[i] = top.1;
                if top.1 == self.degrees[top.0] {
                    stack.pop();
                }
            }
            if self.degrees[i] > 0 {
                stack.push((i, 0));
            }
        }
        let mut end = vec![0usize; n];
        for i in (0..n).rev() {
            let mut next = i + 1;
            for _ in 0..self.degrees[i] {
                next = end[next];
            }
            end[i] = next;
        }
        TreeIndex { parent, depth, end, rank }
    }

    /// Exclusive end of the subtree starting at preorder position `i`.
    pub fn subtree_end(&self, i: usize) -> usize {
        let mut open: i64 = 1;
        let mut j = i;
        while open > 0 {
            open += self.degrees[j] as i64 - 1;
            j += 1;
        }
        j
    }

    /// All vertices in preorder (= lexicographic order).
    pub fn addresses(&self) -> Vec<Address> {
        let mut out = Vec::with_capacity(self.degrees.len());
        let mut stack: Vec<(Vec<u32>, u32, u32)> = Vec::new(); // (path, degree, next child)
        for &k in &self.degrees {
            let path = match stack.last_mut() {
                None => Vec::new(),
                Some((p, deg, next)) => {
                    *next += 1;
                    let mut child = p.clone();
                    child.push(*next);
                    if *next == *deg {
                        stack.pop();
                    }
                    child
                }
            };
            if k > 0 {
                stack.push((path.clone(), k, 0));
            }
            out.push(Address(path));
        }
        out
    }

    pub fn address_of(&self, i: usize) -> Address {
        let index = self.index();
        let mut path = Vec::new();
        let mut v = i;
        while let Some(p) = index.parent[v] {
            path.push(index.rank[v]);
            v = p;
        }
        path.reverse();
        Address(path)
    }

    /// Preorder position of `u`, if `u ∈ t`.
    pub fn position(&self, u: &Address) -> Option<usize> {
        let mut i = 0usize;
        for &step in u.path() {
            if step > self.degrees[i] {
                return None;
            }
            let mut c = i + 1;
            for _ in 1..step {
                c = self.subtree_end(c);
            }
            i = c;
        }
        Some(i)
    }

    pub fn contains(&self, u: &Address) -> bool {
        self.position(u).is_some()
    }

    /// `k_u(t)`, or `None` when `u ∉ t`.
    pub fn degree(&self, u: &Address) -> Option<u32> {
        self.position(u).map(|i| self.degrees[i])
    }

    fn leaf_position(&self, x: &Address) -> Result<usize, TreeError> {
        let i = self.position(x).ok_or_else(|| TreeError::NotInTree(x.clone()))?;
        if self.degrees[i] != 0 {
            return Err(TreeError::NotALeaf(x.clone()));
        }
        Ok(i)
    }

    /// `S_u(t)`, the fringe subtree above `u` re-rooted at `∅`.
    pub fn fringe(&self, u: &Address) -> Result<Tree, TreeError> {
        let i = self.position(u).ok_or_else(|| TreeError::NotInTree(u.clone()))?;
        Ok(self.fringe_at(i))
    }

    pub fn fringe_at(&self, i: usize) -> Tree {
        Tree { degrees: self.degrees[i..self.subtree_end(i)].to_vec() }
    }

    /// `L_0(t)` in lexicographic order.
    pub fn leaves(&self) -> Vec<Address> {
        self.addresses()
            .into_iter()
            .zip(&self.degrees)
            .filter(|(_, &k)| k == 0)
            .map(|(a, _)| a)
            .collect()
    }

    pub fn leaf_count(&self) -> usize {
        self.degrees.iter().filter(|&&k| k == 0).count()
    }

    pub fn internal_count(&self) -> usize {
        self.card() - self.leaf_count()
    }

    /// `A(t)`: vertices with at least one child and no leaf child.
    pub fn protected_count(&self) -> usize {
        let mut counter = ProtectedCounter::new();
        for &k in &self.degrees {
            counter.push(k);
        }
        counter.count()
    }

    /// Preorder flags of protected vertices.
    pub fn protected_flags(&self) -> Vec<bool> {
        let mut flags: Vec<bool> = self.degrees.iter().map(|&k| k > 0).collect();
        // (position, children still to be seen)
        let mut open: Vec<(usize, u32)> = Vec::new();
        for (i, &k) in self.degrees.iter().enumerate() {
            if let Some(top) = open.last_mut() {
                top.1 -= 1;
                if k == 0 {
                    flags[top.0] = false;
                }
            }
            if k > 0 {
                open.push((i, k));
            }
            while open.last().is_some_and(|top| top.1 == 0) {
                open.pop();
            }
        }
        flags
    }

    /// `t ⊛_x t2`.
    pub fn graft(&self, x: &Address, other: &Tree) -> Result<Tree, TreeError> {
        let i = self.leaf_position(x)?;
        let mut degrees = Vec::with_capacity(self.card() + other.card() - 1);
        degrees.extend_from_slice(&self.degrees[..i]);
        degrees.extend_from_slice(&other.degrees);
        degrees.extend_from_slice(&self.degrees[i + 1..]);
        Ok(Tree { degrees })
    }

    /// `s ∈ T(t, x)`: `s` is `t` with some finite tree grafted on leaf `x`.
    pub fn ball_member(&self, event: &BallEvent) -> bool {
        let base = &event.base;
        let ix = event.position;
        if self.card() < base.card() || self.degrees[..ix] != base.degrees[..ix] {
            return false;
        }
        let end = self.subtree_end(ix);
        self.degrees[end..] == base.degrees[ix + 1..]
    }

    /// Degrees strictly below height `h` plus the vertices at height `h`.
    pub fn restrict(&self, h: u32) -> Restriction {
        let index = self.index();
        let mut degrees = Vec::new();
        let mut i = 0;
        while i < self.card() {
            if index.depth[i] == h {
                degrees.push(0);
                i = index.end[i];
            } else {
                degrees.push(self.degrees[i]);
                i += 1;
            }
        }
        Restriction { height: h, tree: Tree { degrees } }
    }

    /// `D(t, x)`: 1 when `x` is the only leaf among its parent's children.
    pub fn protected_graft_increment(&self, x: &Address) -> Result<u32, TreeError> {
        let i = self.leaf_position(x)?;
        let index = self.index();
        let Some(parent) = index.parent[i] else {
            return Ok(0);
        };
        let leaf_children = index
            .children(self, parent)
            .filter(|&c| self.degrees[c] == 0)
            .count();
        Ok(u32::from(leaf_children == 1))
    }

    pub fn height(&self) -> u32 {
        self.index().depth.into_iter().max().unwrap_or(0)
    }
}

impl fmt::Display for Tree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for k in &self.degrees {
            if !first {
                f.write_str(" ")?;
            }
            write!(f, "{k}")?;
            first = false;
        }
        Ok(())
    }
}

impl fmt::Debug for Tree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tree(\"{self}\")")
    }
}

impl FromStr for Tree {
    type Err = TreeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let degrees = s
            .split_whitespace()
            .enumerate()
            .map(|(i, tok)| {
                tok.parse::<u32>().map_err(|_| TreeError::Parse {
                    position: i,
                    reason: format!("{tok:?} is not a non-negative integer"),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        if degrees.is_empty() {
            return Err(TreeError::Parse { position: 0, reason: "empty input".into() });
        }
        Tree::from_degrees(degrees)
    }
}

pub fn parse_tree(text: &str) -> Result<Tree, TreeError> {
    text.parse()
}

pub fn serialize_tree(tree: &Tree) -> String {
    tree.to_string()
}

/// `T(t, x)`: every tree obtained by grafting on the leaf `x` of `t`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BallEvent {
    base: Tree,
    leaf: Address,
    position: usize,
}

impl BallEvent {
    pub fn new(base: Tree, leaf: Address) -> Result<Self, TreeError> {
        let position = base.leaf_position(&leaf)?;
        Ok(BallEvent { base, leaf, position })
    }

    pub fn base(&self) -> &Tree {
        &self.base
    }

    pub fn leaf(&self) -> &Address {
        &self.leaf
    }

    /// Largest generation of a base vertex other than the grafting leaf.
    pub fn fixed_depth(&self) -> u32 {
        let index = self.base.index();
        (0..self.base.card())
            .filter(|&i| i != self.position)
            .map(|i| index.depth[i])
            .max()
            .unwrap_or(0)
    }
}

impl fmt::Display for BallEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "T({}, {})", self.base, self.leaf)
    }
}

impl fmt::Debug for BallEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BallEvent({self})")
    }
}

/// Truncation of a tree at height `h`.
///
/// Stored as a tree whose vertices at generation `h` are placeholder
/// leaves, so two restrictions compare equal iff they record the same
/// degrees below `h` and the same vertices at `h`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct Restriction {
    height: u32,
    tree: Tree,
}

impl Restriction {
    pub(crate) fn from_parts(height: u32, tree: Tree) -> Self {
        Restriction { height, tree }
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    /// The truncated tree (vertices at the cut appear as leaves).
    pub fn truncated(&self) -> &Tree {
        &self.tree
    }

    pub fn degree_map(&self) -> BTreeMap<Address, u32> {
        let index = self.tree.index();
        self.tree
            .addresses()
            .into_iter()
            .enumerate()
            .filter(|(i, _)| index.depth[*i] < self.height)
            .map(|(i, a)| (a, self.tree.degrees[i]))
            .collect()
    }

    pub fn frontier(&self) -> BTreeSet<Address> {
        let index = self.tree.index();
        self.tree
            .addresses()
            .into_iter()
            .enumerate()
            .filter(|(i, _)| index.depth[*i] == self.height)
            .map(|(_, a)| a)
            .collect()
    }

    /// Ball membership decided from the truncated data; `None` when the
    /// event pins degrees at or beyond the cut.
    pub fn ball_member(&self, event: &BallEvent) -> Option<bool> {
        if event.fixed_depth() >= self.height && event.base.card() > 1 {
            return None;
        }
        if event.leaf.generation() as u32 > self.height {
            return None;
        }
        Some(self.tree.ball_member(event))
    }
}

impl fmt::Display for Restriction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "h={} | {}", self.height, self.tree)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(s: &str) -> Tree {
        s.parse().unwrap()
    }

    fn a(s: &str) -> Address {
        s.parse().unwrap()
    }

    #[test]
    fn parse_examples() {
        assert_eq!(t("0").card(), 1);
        assert_eq!(t("2 0 0").addresses(), vec![a("∅"), a("1"), a("2")]);
        assert_eq!(
            t("2 2 0 0 0").addresses(),
            vec![a("∅"), a("1"), a("1.1"), a("1.2"), a("2")]
        );
    }

    #[test]
    fn parse_errors_name_positions() {
        assert_eq!(
            "2 0 0 0".parse::<Tree>().unwrap_err(),
            TreeError::Parse {
                position: 3,
                reason: "sequence continues after the tree is complete".into()
            }
        );
        match "2 0".parse::<Tree>().unwrap_err() {
            TreeError::Parse { position, .. } => assert_eq!(position, 2),
            e => panic!("{e}"),
        }
        match "1 x".parse::<Tree>().unwrap_err() {
            TreeError::Parse { position, .. } => assert_eq!(position, 1),
            e => panic!("{e}"),
        }
        assert!("".parse::<Tree>().is_err());
    }

    #[test]
    fn lexicographic_order() {
        assert!(lex_less(&a("∅"), &a("1")));
        assert!(lex_less(&a("1.2"), &a("2")));
        assert!(!lex_less(&a("1.1"), &a("1.1")));
        assert!(lex_less(&a("1"), &a("1.1")));
        assert!(!lex_less(&a("2"), &a("1.5")));
    }

    #[test]
    fn ancestors_are_prefixes() {
        assert_eq!(a("∅").ancestors(), vec![a("∅")]);
        assert_eq!(a("2.1").ancestors(), vec![a("∅"), a("2"), a("2.1")]);
        assert_eq!(a("1.1.1").ancestors().len(), 4);
        assert!(Address::new(vec![1, 0]).is_err());
    }

    #[test]
    fn fringe_examples() {
        let tree = t("2 2 0 0 0");
        assert_eq!(tree.fringe(&Address::root()).unwrap(), tree);
        assert_eq!(tree.fringe(&a("1")).unwrap(), t("2 0 0"));
        assert_eq!(tree.fringe(&a("2")).unwrap(), t("0"));
        assert_eq!(tree.fringe(&a("3")), Err(TreeError::NotInTree(a("3"))));
    }

    #[test]
    fn leaves_and_protected() {
        assert_eq!(t("0").leaves(), vec![a("∅")]);
        assert_eq!(t("2 0 0").leaves(), vec![a("1"), a("2")]);
        assert_eq!(t("2 2 0 0 0").leaves(), vec![a("1.1"), a("1.2"), a("2")]);
        assert_eq!(t("0").protected_count(), 0);
        assert_eq!(t("2 2 0 0 0").protected_count(), 0);
        assert_eq!(t("2 2 0 0 2 0 0").protected_count(), 1);
        assert_eq!(t("1 1 0").protected_count(), 1);
    }

    #[test]
    fn graft_examples() {
        let cherry = t("2 0 0");
        assert_eq!(cherry.graft(&a("1"), &Tree::leaf()).unwrap(), cherry);
        assert_eq!(cherry.graft(&a("1"), &cherry).unwrap(), t("2 2 0 0 0"));
        assert_eq!(cherry.graft(&a("∅"), &cherry), Err(TreeError::NotALeaf(a("∅"))));
        let g = t("2 0 2 0 0").graft(&a("2.2"), &t("1 0")).unwrap();
        assert_eq!(g, t("2 0 2 0 1 0"));
        assert_eq!(g.fringe(&a("2.2")).unwrap(), t("1 0"));
    }

    #[test]
    fn ball_examples() {
        let big = t("2 2 0 0 0");
        let cherry = t("2 0 0");
        assert!(big.ball_member(&BallEvent::new(big.clone(), a("2")).unwrap()));
        assert!(big.ball_member(&BallEvent::new(cherry.clone(), a("1")).unwrap()));
        assert!(!big.ball_member(&BallEvent::new(cherry.clone(), a("2")).unwrap()));
        assert!(!cherry.ball_member(&BallEvent::new(big, a("2")).unwrap()));
        assert!(BallEvent::new(cherry, a("∅")).is_err());
    }

    #[test]
    fn restrict_examples() {
        let tree = t("2 2 0 0 0");
        let r0 = tree.restrict(0);
        assert!(r0.degree_map().is_empty());
        assert_eq!(r0.frontier(), BTreeSet::from([a("∅")]));
        let r1 = tree.restrict(1);
        assert_eq!(r1.degree_map(), BTreeMap::from([(a("∅"), 2)]));
        assert_eq!(r1.frontier(), BTreeSet::from([a("1"), a("2")]));
        let r2 = tree.restrict(2);
        assert_eq!(
            r2.degree_map(),
            BTreeMap::from([(a("∅"), 2), (a("1"), 2), (a("2"), 0)])
        );
        assert_eq!(r2.frontier(), BTreeSet::from([a("1.1"), a("1.2")]));
        assert_eq!(tree.restrict(5).truncated(), &tree);
    }

    #[test]
    fn graft_increment_examples() {
        assert_eq!(t("1 0").protected_graft_increment(&a("1")).unwrap(), 1);
        assert_eq!(t("2 0 0").protected_graft_increment(&a("1")).unwrap(), 0);
        assert_eq!(t("2 2 0 0 0").protected_graft_increment(&a("2")).unwrap(), 1);
        assert_eq!(t("0").protected_graft_increment(&a("∅")).unwrap(), 0);
        assert!(t("2 0 0").protected_graft_increment(&a("∅")).is_err());
    }

    #[test]
    fn index_and_positions_agree() {
        let tree = t("3 1 0 0 2 0 1 0");
        let addrs = tree.addresses();
        for (i, u) in addrs.iter().enumerate() {
            assert_eq!(tree.position(u), Some(i));
            assert_eq!(&tree.address_of(i), u);
        }
        assert!(addrs.windows(2).all(|w| lex_less(&w[0], &w[1])));
        let index = tree.index();
        assert_eq!(index.children(&tree, 0).collect::<Vec<_>>(), vec![1, 3, 4]);
        assert_eq!(tree.protected_flags().iter().filter(|&&p| p).count(), tree.protected_count());
    }

    #[test]
    fn address_round_trip() {
        for s in ["∅", "1", "1.2.3"] {
            assert_eq!(a(s).to_string(), s);
        }
        assert!("1.0".parse::<Address>().is_err());
    }
}
