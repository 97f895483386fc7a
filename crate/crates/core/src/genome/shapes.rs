use rand::seq::SliceRandom;
use rand::Rng;

use crate::genome::{GenomeError, GenomeTree, Node, OperatorKind, ShapeRule};
use crate::numcore::Shape;

/// Per-node shapes (indexed by preorder id) and the ids of nodes whose
/// input-shape preconditions fail.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShapeReport {
    pub shapes: Vec<Shape>,
    pub infeasible: Vec<usize>,
}

impl ShapeReport {
    pub fn root(&self) -> Shape {
        self.shapes[0]
    }

    pub fn is_feasible(&self) -> bool {
        self.infeasible.is_empty()
    }
}

/// Output shape of `op` given its input shapes, or `None` when the
/// operator's preconditions fail.
pub fn output_shape(op: OperatorKind, inputs: &[Shape]) -> Option<Shape> {
    match op.shape_rule() {
        ShapeRule::Same => Some(inputs[0]),
        ShapeRule::Single => (inputs[0] == Shape::Vector).then_some(Shape::Scalar),
        ShapeRule::Constant => inputs
            .iter()
            .all(|s| *s == Shape::Vector)
            .then_some(Shape::Vector),
        ShapeRule::Maximum => Some(inputs[0].max(inputs[1])),
    }
}

/// Shape for propagation past an infeasible node: identity on the input for
/// unary operators, the broadcast maximum for binary ones.
fn fallback_shape(inputs: &[Shape]) -> Shape {
    inputs.iter().copied().fold(Shape::Scalar, Shape::max)
}

/// Bottom-up shape inference on a raw node; fails only on arity errors.
pub fn infer_node_shapes(root: &Node) -> Result<ShapeReport, GenomeError> {
    let n = root.size();
    let mut report = ShapeReport {
        shapes: vec![Shape::Vector; n],
        infeasible: Vec::new(),
    };
    fn walk(node: &Node, next: &mut usize, r: &mut ShapeReport) -> Result<Shape, GenomeError> {
        let id = *next;
        *next += 1;
        let shape = match node {
            Node::Leaf { .. } => Shape::Vector,
            Node::Op { op, children } => {
                if children.len() != op.arity() {
                    return Err(GenomeError::Arity {
                        op: *op,
                        got: children.len(),
                    });
                }
                let mut inputs = Vec::with_capacity(2);
                for c in children {
                    inputs.push(walk(c, next, r)?);
                }
                match output_shape(*op, &inputs) {
                    Some(s) => s,
                    None => {
                        r.infeasible.push(id);
                        fallback_shape(&inputs)
                    }
                }
            }
        };
        r.shapes[id] = shape;
        Ok(shape)
    }
    walk(root, &mut 0, &mut report)?;
    report.infeasible.sort_unstable();
    Ok(report)
}

pub fn infer_shapes(tree: &GenomeTree) -> ShapeReport {
    infer_node_shapes(tree.root()).expect("constructed trees have valid arity")
}

/// Post-order repair: every infeasible unary node gets a random
/// shape-preserving operator and every infeasible Concat becomes Add or Mul.
/// Topology is untouched, and feasible trees consume no randomness.
pub fn repair_node<R: Rng + ?Sized>(root: &mut Node, rng: &mut R) {
    fn walk<R: Rng + ?Sized>(node: &mut Node, rng: &mut R) -> Shape {
        match node {
            Node::Leaf { .. } => Shape::Vector,
            Node::Op { op, children } => {
                let inputs: Vec<Shape> = children.iter_mut().map(|c| walk(c, rng)).collect();
                if let Some(s) = output_shape(*op, &inputs) {
                    return s;
                }
                let pool: &[OperatorKind] = if op.is_binary() {
                    &OperatorKind::BROADCASTING
                } else {
                    &OperatorKind::SHAPE_PRESERVING
                };
                *op = *pool.choose(rng).expect("non-empty pool");
                output_shape(*op, &inputs).expect("replacement accepts any shape")
            }
        }
    }
    walk(root, rng);
}

pub fn repair<R: Rng + ?Sized>(tree: &GenomeTree, rng: &mut R) -> GenomeTree {
    let mut root = tree.root().clone();
    repair_node(&mut root, rng);
    GenomeTree::new(root).expect("repair preserves structure")
}
