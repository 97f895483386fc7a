//! Tree-encoded architectures: the operator catalog, tree structure, shape
//! inference and repair, interpretability metrics, baseline seeds, and
//! serialization (canonical keys, JSON, DOT).

mod build;
mod dot;
mod key;
mod operator;
mod shapes;
mod tree;

use thiserror::Error;

pub use build::{random_tree, seed_tree, BaselineModel};
pub(crate) use build::{random_leaf, random_operator};
pub use dot::to_dot;
pub use key::{canonical_key, node_key, parse_key};
pub use operator::{LeafKind, OperatorKind, ShapeRule};
pub use shapes::{infer_node_shapes, infer_shapes, output_shape, repair, repair_node, ShapeReport};
pub use tree::{interpretability, GenomeTree, Node, NodeInfo, TreeMetrics, MAX_DEPTH};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenomeError {
    #[error("unknown operator or leaf name '{0}'")]
    UnknownSymbol(String),
    #[error("{op} takes {} children, got {got}", op.arity())]
    Arity { op: OperatorKind, got: usize },
    #[error("the root must be a computation node")]
    LeafRoot,
    #[error("tree depth {0} exceeds the cap of {MAX_DEPTH}")]
    DepthExceeded(usize),
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("invalid tree JSON: {0}")]
    Json(String),
}
