use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::genome::{random_leaf, random_operator, repair_node, GenomeTree, Node, OperatorKind, MAX_DEPTH};

/// Attempts allowed for a variation that overshoots the depth cap before
/// the parent is returned unchanged.
pub const MAX_DEPTH_RETRIES: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VariationKind {
    Exchange,
    Delete,
    Replace,
    Insert,
}

impl VariationKind {
    pub const SINGLE_PARENT: [VariationKind; 3] =
        [VariationKind::Delete, VariationKind::Replace, VariationKind::Insert];
}

/// Offspring of a single-parent variation. `reverted` marks a parent clone
/// returned after the depth-cap retries ran out (or when the operator's
/// precondition fails).
#[derive(Clone, Debug, PartialEq)]
pub struct Variation {
    pub tree: GenomeTree,
    pub reverted: bool,
}

impl Variation {
    fn done(mut root: Node, rng: &mut (impl Rng + ?Sized)) -> Self {
        repair_node(&mut root, rng);
        Variation {
            tree: GenomeTree::new(root).expect("variation keeps a valid tree"),
            reverted: false,
        }
    }

    fn unchanged(p: &GenomeTree) -> Self {
        Variation {
            tree: p.clone(),
            reverted: true,
        }
    }
}

fn computation_ids(root: &Node) -> Vec<usize> {
    root.preorder()
        .iter()
        .enumerate()
        .filter(|(_, n)| !n.is_leaf())
        .map(|(i, _)| i)
        .collect()
}

fn place(root: &mut Node, id: usize, with: Node) {
    if id == 0 {
        *root = with;
    } else {
        root.replace(id, with).expect("id within tree");
    }
}

/// Swaps two uniformly chosen non-root subtrees (leaves allowed) between
/// the parents and repairs both offspring.
pub fn exchange<R: Rng + ?Sized>(p1: &GenomeTree, p2: &GenomeTree, rng: &mut R) -> (Variation, Variation) {
    let (n1, n2) = (p1.root().size(), p2.root().size());
    for _ in 0..MAX_DEPTH_RETRIES {
        let i = rng.gen_range(1..n1);
        let j = rng.gen_range(1..n2);
        let mut r1 = p1.root().clone();
        let mut r2 = p2.root().clone();
        let s1 = r1.get(i).expect("id within tree").clone();
        let s2 = r2.get(j).expect("id within tree").clone();
        r1.replace(i, s2);
        r2.replace(j, s1);
        if r1.depth() <= MAX_DEPTH && r2.depth() <= MAX_DEPTH {
            let a = Variation::done(r1, rng);
            let b = Variation::done(r2, rng);
            return (a, b);
        }
    }
    (Variation::unchanged(p1), Variation::unchanged(p2))
}

/// Removes one computation node, reconnecting a child subtree to its
/// parent. A binary node is only removed when the dropped child is a leaf,
/// so exactly one computation node disappears; a root may not collapse to
/// a bare leaf.
pub fn delete_node<R: Rng + ?Sized>(p: &GenomeTree, rng: &mut R) -> Variation {
    if p.num_c() < 2 {
        return Variation::unchanged(p);
    }
    let root = p.root();
    let mut options: Vec<(usize, Vec<usize>)> = Vec::new();
    for id in computation_ids(root) {
        let children = root.get(id).expect("id within tree").children();
        let kept: Vec<usize> = (0..children.len())
            .filter(|&k| {
                let dropped_ok = children.len() == 1 || children[1 - k].is_leaf();
                let root_ok = id != 0 || !children[k].is_leaf();
                dropped_ok && root_ok
            })
            .collect();
        if !kept.is_empty() {
            options.push((id, kept));
        }
    }
    let Some((id, kept)) = options.choose(rng) else {
        return Variation::unchanged(p);
    };
    let k = *kept.choose(rng).expect("non-empty");
    let survivor = root.get(*id).expect("id within tree").children()[k].clone();
    let mut out = root.clone();
    place(&mut out, *id, survivor);
    Variation::done(out, rng)
}

/// Gives a uniformly chosen computation node a different operator. A new
/// binary operator gets a random leaf as its second child; a new unary
/// operator keeps one of the old children.
pub fn replace_node<R: Rng + ?Sized>(p: &GenomeTree, rng: &mut R) -> Variation {
    let root = p.root();
    let id = *computation_ids(root).choose(rng).expect("root is a computation node");
    let node = root.get(id).expect("id within tree");
    let old = node.op().expect("computation node");
    let pool: Vec<OperatorKind> = OperatorKind::ALL.iter().copied().filter(|&o| o != old).collect();
    let op = *pool.choose(rng).expect("non-empty");
    let old_children = node.children();
    let children = match (old_children.len(), op.arity()) {
        (1, 2) => vec![old_children[0].clone(), random_leaf(rng)],
        (2, 1) => vec![old_children.choose(rng).expect("binary").clone()],
        _ => old_children.to_vec(),
    };
    let mut out = root.clone();
    place(&mut out, id, Node::Op { op, children });
    Variation::done(out, rng)
}

/// Inserts a random operator between a uniformly chosen computation node
/// and its parent; a binary newcomer gets a random leaf as second child.
pub fn insert_node<R: Rng + ?Sized>(p: &GenomeTree, rng: &mut R) -> Variation {
    let ids = computation_ids(p.root());
    for _ in 0..MAX_DEPTH_RETRIES {
        let op = random_operator(rng);
        let id = *ids.choose(rng).expect("root is a computation node");
        let sub = p.root().get(id).expect("id within tree").clone();
        let children = if op.is_binary() {
            vec![sub, random_leaf(rng)]
        } else {
            vec![sub]
        };
        let mut out = p.root().clone();
        place(&mut out, id, Node::Op { op, children });
        if out.depth() <= MAX_DEPTH {
            return Variation::done(out, rng);
        }
    }
    Variation::unchanged(p)
}

pub fn apply_single<R: Rng + ?Sized>(kind: VariationKind, p: &GenomeTree, rng: &mut R) -> Variation {
    match kind {
        VariationKind::Delete => delete_node(p, rng),
        VariationKind::Replace => replace_node(p, rng),
        VariationKind::Insert => insert_node(p, rng),
        VariationKind::Exchange => panic!("exchange needs two parents"),
    }
}

/// Pairs consecutive parents. When both have at least two computation
/// nodes, one of exchange/delete/replace/insert is drawn; otherwise only
/// replace or insert. Single-parent operators act on each parent
/// separately, so the offspring count equals the pool size.
pub fn genetic_operation<R: Rng + ?Sized>(pool: &[GenomeTree], rng: &mut R) -> Vec<GenomeTree> {
    let mut out = Vec::with_capacity(pool.len());
    for pair in pool.chunks(2) {
        let [p1, p2] = pair else {
            let kind = if pair[0].num_c() >= 2 {
                *VariationKind::SINGLE_PARENT.choose(rng).expect("non-empty")
            } else {
                *[VariationKind::Replace, VariationKind::Insert].choose(rng).expect("non-empty")
            };
            out.push(apply_single(kind, &pair[0], rng).tree);
            continue;
        };
        let both = p1.num_c() >= 2 && p2.num_c() >= 2;
        let draw = if both { rng.gen_range(1..=4) } else { rng.gen_range(3..=4) };
        let kind = match draw {
            1 => VariationKind::Exchange,
            2 => VariationKind::Delete,
            3 => VariationKind::Replace,
            _ => VariationKind::Insert,
        };
        if kind == VariationKind::Exchange {
            let (a, b) = exchange(p1, p2, rng);
            out.push(a.tree);
            out.push(b.tree);
        } else {
            out.push(apply_single(kind, p1, rng).tree);
            out.push(apply_single(kind, p2, rng).tree);
        }
    }
    out
}
