use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::genome::shapes::repair_node;
use crate::genome::{GenomeError, GenomeTree, LeafKind, Node, OperatorKind, MAX_DEPTH};

/// Hand-designed diagnostic functions expressible in the search space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BaselineModel {
    Irt,
    Mirt,
    Mf,
    Ncd,
}

impl BaselineModel {
    pub const ALL: [BaselineModel; 4] = [
        BaselineModel::Irt,
        BaselineModel::Mirt,
        BaselineModel::Mf,
        BaselineModel::Ncd,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BaselineModel::Irt => "IRT",
            BaselineModel::Mirt => "MIRT",
            BaselineModel::Mf => "MF",
            BaselineModel::Ncd => "NCD",
        }
    }
}

impl fmt::Display for BaselineModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BaselineModel {
    type Err = GenomeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BaselineModel::ALL
            .iter()
            .copied()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| GenomeError::UnknownSymbol(s.to_string()))
    }
}

/// The tree encoding of a baseline model.
pub fn seed_tree(model: BaselineModel) -> GenomeTree {
    use LeafKind::*;
    use OperatorKind::*;
    let l = Node::leaf;
    let root = match model {
        // Sum(h_S * h_E)
        BaselineModel::Mf => Node::unary(Sum, Node::binary(Mul, l(Student), l(Exercise))),
        // Sigmoid(beta + Sum(alpha * theta)), beta = FFN(h_E)
        BaselineModel::Mirt => Node::unary(
            Sigmoid,
            Node::binary(
                Add,
                Node::unary(Ffn, l(Exercise)),
                Node::unary(Sum, Node::binary(Mul, l(Concept), l(Student))),
            ),
        ),
        // Sigmoid(a * (theta - beta)) with a, beta from h_E and theta from h_S
        BaselineModel::Irt => Node::unary(
            Sigmoid,
            Node::binary(
                Mul,
                Node::unary(Ffn, l(Exercise)),
                Node::binary(
                    Add,
                    Node::unary(Ffn, l(Student)),
                    Node::unary(Neg, Node::unary(Ffn, l(Exercise))),
                ),
            ),
        ),
        // h_C * (Sigmoid(h_S) - Sigmoid(h_E)) * Sigmoid(FFN(h_E)), then the FC head
        BaselineModel::Ncd => Node::binary(
            Mul,
            Node::binary(
                Mul,
                l(Concept),
                Node::binary(
                    Add,
                    Node::unary(Sigmoid, l(Student)),
                    Node::unary(Neg, Node::unary(Sigmoid, l(Exercise))),
                ),
            ),
            Node::unary(Sigmoid, Node::unary(Ffn, l(Exercise))),
        ),
    };
    GenomeTree::new(root).expect("seed encodings are valid")
}

pub(crate) fn random_leaf<R: Rng + ?Sized>(rng: &mut R) -> Node {
    Node::leaf(*LeafKind::ALL.choose(rng).expect("non-empty"))
}

pub(crate) fn random_operator<R: Rng + ?Sized>(rng: &mut R) -> OperatorKind {
    *OperatorKind::ALL.choose(rng).expect("non-empty")
}

/// A fresh computation node with random leaf children.
fn random_op_over_leaves<R: Rng + ?Sized>(rng: &mut R) -> Node {
    let op = random_operator(rng);
    let children = (0..op.arity()).map(|_| random_leaf(rng)).collect();
    Node::Op { op, children }
}

/// Grows a random tree with a computation-node count drawn uniformly from
/// `lo..=hi`, expanding uniformly chosen leaves, then repairs it.
///
/// Only leaves above the depth cap are expanded; a dead end restarts growth.
pub fn random_tree<R: Rng + ?Sized>(lo: usize, hi: usize, rng: &mut R) -> GenomeTree {
    assert!(1 <= lo && lo <= hi, "node range must satisfy 1 <= lo <= hi");
    let target = rng.gen_range(lo..=hi);
    loop {
        let mut root = random_op_over_leaves(rng);
        let mut count = 1;
        while count < target {
            let open: Vec<usize> = root
                .layout()
                .iter()
                .enumerate()
                .filter(|(_, info)| info.is_leaf && info.level < MAX_DEPTH)
                .map(|(id, _)| id)
                .collect();
            let Some(&id) = open.choose(rng) else {
                break;
            };
            root.replace(id, random_op_over_leaves(rng));
            count += 1;
        }
        if count == target {
            repair_node(&mut root, rng);
            return GenomeTree::new(root).expect("growth respects the depth cap");
        }
    }
}
