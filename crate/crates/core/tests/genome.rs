mod common;

use cdm_evo::genome::{
    canonical_key, infer_shapes, interpretability, parse_key, random_tree, repair, seed_tree, to_dot,
    BaselineModel, GenomeTree, LeafKind, Node, OperatorKind, TreeMetrics, MAX_DEPTH,
};
use cdm_evo::numcore::Shape;
use common::{check_dot, skeleton, unrepaired_node};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn random(seed: u64, lo: usize, hi: usize) -> GenomeTree {
    random_tree(lo, hi, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Depth counted directly from the definition: computation nodes on the
/// longest root-to-leaf path.
fn depth_oracle(n: &Node) -> usize {
    match n {
        Node::Leaf { .. } => 0,
        Node::Op { children, .. } => 1 + children.iter().map(depth_oracle).max().unwrap_or(0),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn repair_is_idempotent_and_keeps_topology(seed in any::<u64>(), other in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw = GenomeTree::new(unrepaired_node(&mut rng, MAX_DEPTH)).unwrap();
        let fixed = repair(&raw, &mut rng);
        prop_assert!(infer_shapes(&fixed).is_feasible());
        prop_assert_eq!(skeleton(fixed.root()), skeleton(raw.root()));
        prop_assert_eq!(repair(&fixed, &mut ChaCha8Rng::seed_from_u64(other)), fixed.clone());
        if infer_shapes(&raw).is_feasible() {
            prop_assert_eq!(fixed, raw);
        }
    }

    #[test]
    fn random_trees_respect_the_range(seed in any::<u64>(), lo in 1usize..6, extra in 0usize..6) {
        let t = random(seed, lo, lo + extra);
        prop_assert!((lo..=lo + extra).contains(&t.num_c()));
        prop_assert!(t.metrics().depth <= MAX_DEPTH);
        prop_assert_eq!(t.metrics().depth, depth_oracle(t.root()));
        prop_assert!(infer_shapes(&t).is_feasible());
    }

    #[test]
    fn keys_round_trip(seed in any::<u64>()) {
        let t = random(seed, 1, 12);
        let key = canonical_key(&t);
        let back = parse_key(&key).unwrap();
        prop_assert_eq!(canonical_key(&back), key);
        prop_assert_eq!(back.metrics(), t.metrics());
    }

    #[test]
    fn json_round_trips(seed in any::<u64>()) {
        let t = random(seed, 1, 12);
        prop_assert_eq!(GenomeTree::from_json(&t.to_json()).unwrap(), t.clone());
        prop_assert_eq!(GenomeTree::from_json(&t.to_json_pretty()).unwrap(), t);
    }

    #[test]
    fn dot_is_well_formed(seed in any::<u64>()) {
        let t = random(seed, 1, 12);
        let dot = to_dot(&t);
        prop_assert!(check_dot(&dot, t.root().size()).is_ok(), "{:?}\n{}", check_dot(&dot, t.root().size()), dot);
        prop_assert_eq!(dot.matches("shape=triangle").count(), t.metrics().breadth);
        prop_assert_eq!(dot.matches("shape=ellipse").count(), t.num_c());
    }

    #[test]
    fn interpretability_matches_the_formula(depth in 1usize..=9, breadth in 1usize..600, num_c in 1usize..600) {
        let f = interpretability(&TreeMetrics { depth, breadth, num_c }).unwrap();
        let want = 1.0 - (depth as f64 - 1.0) / 10.0 + breadth as f64 / 200.0 + 0.001 - num_c as f64 / 20000.0;
        prop_assert!((f - want).abs() < 1e-12);
    }
}

#[test]
fn commutative_operands_share_a_key() {
    use LeafKind::*;
    use OperatorKind::*;
    let a = GenomeTree::new(Node::binary(Add, Node::leaf(Student), Node::unary(Neg, Node::leaf(Exercise)))).unwrap();
    let b = GenomeTree::new(Node::binary(Add, Node::unary(Neg, Node::leaf(Exercise)), Node::leaf(Student))).unwrap();
    assert_eq!(canonical_key(&a), canonical_key(&b));
    let c = GenomeTree::new(Node::binary(Concat, Node::leaf(Student), Node::leaf(Exercise))).unwrap();
    let d = GenomeTree::new(Node::binary(Concat, Node::leaf(Exercise), Node::leaf(Student))).unwrap();
    assert_ne!(canonical_key(&c), canonical_key(&d));
}

#[test]
fn depth_over_cap_is_rejected() {
    let mut n = Node::leaf(LeafKind::Student);
    for _ in 0..=MAX_DEPTH {
        n = Node::unary(OperatorKind::Neg, n);
    }
    assert!(GenomeTree::new(n).is_err());
    assert!(interpretability(&TreeMetrics { depth: 10, breadth: 1, num_c: 10 }).is_err());
}

#[test]
fn seed_trees_match_their_roles() {
    for m in BaselineModel::ALL {
        let t = seed_tree(m);
        let report = infer_shapes(&t);
        assert!(report.is_feasible(), "{m:?}");
        let want = if m == BaselineModel::Ncd { Shape::Vector } else { Shape::Scalar };
        assert_eq!(report.root(), want, "{m:?}");
    }
}

#[test]
fn concat_of_scalars_is_repaired_to_a_broadcasting_operator() {
    use LeafKind::*;
    use OperatorKind::*;
    let t = GenomeTree::new(Node::binary(
        Concat,
        Node::unary(Sum, Node::leaf(Student)),
        Node::unary(Mean, Node::leaf(Exercise)),
    ))
    .unwrap();
    assert!(!infer_shapes(&t).is_feasible());
    for s in 0..20 {
        let r = repair(&t, &mut ChaCha8Rng::seed_from_u64(s));
        assert!(matches!(r.root_op(), Add | Mul));
    }
}
