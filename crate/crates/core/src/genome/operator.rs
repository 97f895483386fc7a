use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::genome::GenomeError;

/// How an operator's output shape relates to its input shapes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShapeRule {
    /// Output has the shape of the (single) input.
    Same,
    /// Output is a scalar; the input must be a vector.
    Single,
    /// Output is a D-vector; every input must be a vector.
    Constant,
    /// Output is the larger of the two input shapes (scalar broadcasts).
    Maximum,
}

/// The fifteen computation-node operators of the search space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OperatorKind {
    Neg,
    Abs,
    Inv,
    Square,
    Sqrt,
    Tanh,
    Sigmoid,
    Softplus,
    Sum,
    Mean,
    #[serde(rename = "FFN")]
    Ffn,
    #[serde(rename = "FFN_D")]
    FfnD,
    Add,
    Mul,
    Concat,
}

impl OperatorKind {
    pub const ALL: [OperatorKind; 15] = [
        OperatorKind::Neg,
        OperatorKind::Abs,
        OperatorKind::Inv,
        OperatorKind::Square,
        OperatorKind::Sqrt,
        OperatorKind::Tanh,
        OperatorKind::Sigmoid,
        OperatorKind::Softplus,
        OperatorKind::Sum,
        OperatorKind::Mean,
        OperatorKind::Ffn,
        OperatorKind::FfnD,
        OperatorKind::Add,
        OperatorKind::Mul,
        OperatorKind::Concat,
    ];

    pub const UNARY: [OperatorKind; 12] = [
        OperatorKind::Neg,
        OperatorKind::Abs,
        OperatorKind::Inv,
        OperatorKind::Square,
        OperatorKind::Sqrt,
        OperatorKind::Tanh,
        OperatorKind::Sigmoid,
        OperatorKind::Softplus,
        OperatorKind::Sum,
        OperatorKind::Mean,
        OperatorKind::Ffn,
        OperatorKind::FfnD,
    ];

    pub const BINARY: [OperatorKind; 3] =
        [OperatorKind::Add, OperatorKind::Mul, OperatorKind::Concat];

    /// Unary operators that accept any input shape; replacements for
    /// infeasible unary nodes are drawn from here.
    pub const SHAPE_PRESERVING: [OperatorKind; 8] = [
        OperatorKind::Neg,
        OperatorKind::Abs,
        OperatorKind::Inv,
        OperatorKind::Square,
        OperatorKind::Sqrt,
        OperatorKind::Tanh,
        OperatorKind::Sigmoid,
        OperatorKind::Softplus,
    ];

    /// Binary operators that accept scalar inputs.
    pub const BROADCASTING: [OperatorKind; 2] = [OperatorKind::Add, OperatorKind::Mul];

    pub fn name(self) -> &'static str {
        match self {
            OperatorKind::Neg => "Neg",
            OperatorKind::Abs => "Abs",
            OperatorKind::Inv => "Inv",
            OperatorKind::Square => "Square",
            OperatorKind::Sqrt => "Sqrt",
            OperatorKind::Tanh => "Tanh",
            OperatorKind::Sigmoid => "Sigmoid",
            OperatorKind::Softplus => "Softplus",
            OperatorKind::Sum => "Sum",
            OperatorKind::Mean => "Mean",
            OperatorKind::Ffn => "FFN",
            OperatorKind::FfnD => "FFN_D",
            OperatorKind::Add => "Add",
            OperatorKind::Mul => "Mul",
            OperatorKind::Concat => "Concat",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            OperatorKind::Add | OperatorKind::Mul | OperatorKind::Concat => 2,
            _ => 1,
        }
    }

    pub fn is_binary(self) -> bool {
        self.arity() == 2
    }

    pub fn shape_rule(self) -> ShapeRule {
        match self {
            OperatorKind::Sum | OperatorKind::Mean | OperatorKind::Ffn => ShapeRule::Single,
            OperatorKind::FfnD | OperatorKind::Concat => ShapeRule::Constant,
            OperatorKind::Add | OperatorKind::Mul => ShapeRule::Maximum,
            _ => ShapeRule::Same,
        }
    }

    /// FFN, FFN_D and Concat own a learnable weight matrix.
    pub fn has_params(self) -> bool {
        matches!(
            self,
            OperatorKind::Ffn | OperatorKind::FfnD | OperatorKind::Concat
        )
    }

    /// Add and Mul are symmetric in their arguments.
    pub fn is_commutative(self) -> bool {
        matches!(self, OperatorKind::Add | OperatorKind::Mul)
    }

    /// Whether the operator rejects scalar inputs.
    pub fn requires_vector_input(self) -> bool {
        matches!(
            self.shape_rule(),
            ShapeRule::Single | ShapeRule::Constant
        )
    }
}

impl fmt::Display for OperatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OperatorKind {
    type Err = GenomeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        OperatorKind::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s)
            .ok_or_else(|| GenomeError::UnknownSymbol(s.to_string()))
    }
}

/// Input nodes of a tree.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LeafKind {
    /// Student embedding row.
    #[serde(rename = "H_S")]
    Student,
    /// Exercise embedding row.
    #[serde(rename = "H_E")]
    Exercise,
    /// The exercise's Q-matrix row.
    #[serde(rename = "H_C")]
    Concept,
}

impl LeafKind {
    pub const ALL: [LeafKind; 3] = [LeafKind::Student, LeafKind::Exercise, LeafKind::Concept];

    pub fn name(self) -> &'static str {
        match self {
            LeafKind::Student => "H_S",
            LeafKind::Exercise => "H_E",
            LeafKind::Concept => "H_C",
        }
    }
}

impl fmt::Display for LeafKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LeafKind {
    type Err = GenomeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        LeafKind::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s)
            .ok_or_else(|| GenomeError::UnknownSymbol(s.to_string()))
    }
}
