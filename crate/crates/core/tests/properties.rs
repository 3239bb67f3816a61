use std::collections::BTreeSet;

use gwmark::harness::protected_identity_gap;
use gwmark::laws::{self, MarkFunction, OffspringLaw};
use gwmark::oracle;
use gwmark::samplers::{sample_gw, DegreeSampler, GwDraw, RngHandle};
use gwmark::scalar::{Rational, Scalar};
use gwmark::transforms::{leaf_removal, r_set, rizzolo_phi, SubsetSelection};
use gwmark::tree::{lex_less, Address, BallEvent, ProtectedCounter, Tree};
use proptest::prelude::*;

fn one() -> Rational {
    Rational::from_ratio(1, 1)
}

fn zero() -> Rational {
    Rational::from_ratio(0, 1)
}

/// Closes an arbitrary degree list into a tree: stops once the walk hits
/// −1, pads with leaves if it never does.
fn close(raw: Vec<u32>) -> Tree {
    let mut degrees = Vec::new();
    let mut open: i64 = 1;
    for k in raw {
        if open == 0 {
            break;
        }
        degrees.push(k);
        open += k as i64 - 1;
    }
    degrees.extend(std::iter::repeat_n(0, open.max(0) as usize));
    Tree::from_degrees(degrees).unwrap()
}

fn tree() -> impl Strategy<Value = Tree> {
    prop::collection::vec(0u32..4, 0..40).prop_map(close)
}

fn tree_and_mask() -> impl Strategy<Value = (Tree, Vec<bool>)> {
    tree().prop_flat_map(|t| {
        let n = t.card();
        (Just(t), prop::collection::vec(any::<bool>(), n))
    })
}

/// Critical law on {0, ..., 4} from weights on degrees 2..=4.
fn critical_law() -> impl Strategy<Value = OffspringLaw<Rational>> {
    prop::collection::vec(0i64..=6, 3).prop_filter_map("mean too large", |w| {
        let big: Vec<Rational> = w.iter().map(|&x| Rational::from_ratio(x, 48)).collect();
        let p0: Rational = big.iter().enumerate().map(|(i, p)| p.clone() * Rational::from_ratio(i as i64 + 1, 1)).sum();
        let rest: Rational = big.iter().cloned().sum::<Rational>() + p0.clone();
        let p1 = one() - rest;
        if p1 < zero() || !p0.is_positive_mass() {
            return None;
        }
        let mut weights = vec![p0, p1];
        weights.extend(big);
        OffspringLaw::new(weights).ok()
    })
}

proptest! {
    #[test]
    fn serialization_round_trips(t in tree()) {
        let text = t.to_string();
        prop_assert_eq!(text.parse::<Tree>().unwrap(), t.clone());
        prop_assert_eq!(t.lukasiewicz_sum(), -1);
    }

    #[test]
    fn preorder_is_lexicographic(t in tree()) {
        let addresses = t.addresses();
        for w in addresses.windows(2) {
            prop_assert!(lex_less(&w[0], &w[1]));
        }
        for (i, u) in addresses.iter().enumerate() {
            prop_assert_eq!(t.position(u), Some(i));
            prop_assert_eq!(&t.address_of(i), u);
            for v in u.ancestors() {
                prop_assert!(t.contains(&v));
            }
        }
    }

    #[test]
    fn graft_then_fringe(t in tree(), s in tree(), pick in any::<prop::sample::Index>()) {
        let leaves = t.leaves();
        let x = pick.get(&leaves);
        let g = t.graft(x, &s).unwrap();
        prop_assert_eq!(g.card(), t.card() + s.card() - 1);
        prop_assert_eq!(g.fringe(x).unwrap(), s.clone());
        let event = BallEvent::new(t.clone(), x.clone()).unwrap();
        prop_assert!(g.ball_member(&event));
        if s.card() > 1 {
            let inc = t.protected_graft_increment(x).unwrap() as usize;
            prop_assert_eq!(g.protected_count(), t.protected_count() + s.protected_count() + inc);
        }
    }

    #[test]
    fn protected_counts_agree(t in tree()) {
        let flags = t.protected_flags();
        let mut counter = ProtectedCounter::new();
        for &k in t.degrees() {
            counter.push(k);
        }
        prop_assert_eq!(counter.count(), t.protected_count());
        prop_assert_eq!(flags.iter().filter(|&&f| f).count(), t.protected_count());
    }

    #[test]
    fn restriction_to_full_height_is_identity(t in tree()) {
        let full = t.restrict(t.height());
        prop_assert_eq!(full.truncated(), &t);
    }

    #[test]
    fn phi_preserves_cardinality((t, mask) in tree_and_mask()) {
        let marked = mask.iter().filter(|&&m| m).count();
        prop_assume!(marked > 0);
        let out = rizzolo_phi(&SubsetSelection::from_flags(t.clone(), mask).unwrap());
        prop_assert_eq!(out.card(), marked);
        prop_assert_eq!(out.lukasiewicz_sum(), -1);
    }

    #[test]
    fn phi_of_everything_is_identity(t in tree()) {
        let all = vec![true; t.card()];
        prop_assert_eq!(rizzolo_phi(&SubsetSelection::from_flags(t.clone(), all).unwrap()), t);
    }

    #[test]
    fn leaf_removal_counts_internal_vertices(t in tree()) {
        prop_assume!(t.card() > 1);
        let reduced = leaf_removal(&t).unwrap();
        prop_assert_eq!(reduced.card(), t.internal_count());
    }

    #[test]
    fn same_stream_same_tree(seed in any::<u64>(), stream in any::<u64>()) {
        let sampler = DegreeSampler::new(&OffspringLaw::<Rational>::binary_critical());
        let draw = || sample_gw(&sampler, 10_000, &mut RngHandle::new(seed, stream));
        prop_assert_eq!(draw(), draw());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn reduced_law_is_critical(law in critical_law()) {
        let reduced = laws::reduced_law(&law).unwrap();
        prop_assert_eq!(reduced.mean(), one());
        prop_assert_eq!(reduced.weights().iter().cloned().sum::<Rational>(), one());
        let q = laws::protected_mark_function(&law).unwrap();
        for k in 0..=reduced.max_degree() {
            let qk = q.q(k);
            prop_assert!(qk >= zero() && qk <= one());
        }
        for k in reduced.support() {
            let w = laws::w_law(&law, k).unwrap();
            prop_assert_eq!(w.total(), one());
        }
    }

    #[test]
    fn protected_count_matches_reduced_marks(law in critical_law()) {
        let law = law.to_f64();
        let a = oracle::a_series(&law, 40).unwrap();
        prop_assert!(protected_identity_gap(&law, &a).unwrap() < 1e-12);
    }

    #[test]
    fn series_masses_are_subprobabilities(law in critical_law(), num in 0i64..=4) {
        let q = MarkFunction::constant(Rational::from_ratio(num, 4)).unwrap();
        prop_assume!(laws::check_pair(&law, &q).is_ok());
        let m = oracle::m_series(&law.to_f64(), &q.to_f64(), 30).unwrap();
        prop_assert!(m.probs.iter().all(|&p| p >= -1e-15));
        prop_assert!(m.probs.iter().sum::<f64>() <= 1.0 + 1e-12);
    }
}

/// `Card(R_u(t)) = 1 + Σ_{v ≤ u} (k_v(t) − 1)` on every tree with out-degrees
/// at most 3 and at most 7 vertices, at every vertex.
#[test]
fn r_set_cardinality_exhaustive() {
    let law = OffspringLaw::new(vec![Rational::from_ratio(1, 4); 4]).unwrap();
    let table = oracle::enumerate_trees(&law, 7).unwrap();
    let mut checked = 0;
    for (t, _) in &table.entries {
        let mut walk: i64 = 1;
        for (i, u) in t.addresses().iter().enumerate() {
            walk += t.degrees()[i] as i64 - 1;
            let r: BTreeSet<Address> = r_set(t, u).unwrap();
            assert_eq!(r.len() as i64, walk, "{t} at {u}");
            checked += 1;
        }
    }
    assert!(checked > 1000);
}

/// Every complete draw satisfies the tree identity.
#[test]
fn sampled_trees_are_finite_trees() {
    let sampler = DegreeSampler::new(&OffspringLaw::<f64>::geometric(0.5, 40).unwrap());
    let mut rng = RngHandle::new(7, 0);
    for _ in 0..10_000 {
        if let GwDraw::Tree(t) = sample_gw(&sampler, 100_000, &mut rng) {
            assert_eq!(t.lukasiewicz_sum(), -1);
        }
    }
}
