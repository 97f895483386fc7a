//! Batched activations, reverse-mode differentiation over the operator set,
//! and the Adam optimizer.

mod linalg;
mod params;
mod tape;
mod value;

use thiserror::Error;

pub use linalg::{gemm, Transpose};
pub use params::{Init, Param, ParamId, ParamStore, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use tape::{sigmoid, softplus, Gradients, Tape, Var, OP_EPSILON, VALUE_GUARD};
pub use value::{Shape, Value};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumError {
    #[error("{0} requires vector-shaped inputs")]
    InfeasibleShape(&'static str),
    #[error("non-finite or oversized value produced by {0}")]
    Overflow(&'static str),
    #[error("{op} takes {expected} inputs, got {got}")]
    Arity {
        op: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("{0}: parameter presence does not match the operator")]
    ParamMismatch(&'static str),
    #[error("parameter {name} has shape {got:?}, expected {expected:?}")]
    ParamShape {
        name: String,
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("batch sizes differ: {0} vs {1}")]
    BatchMismatch(usize, usize),
    #[error("vector widths differ: {0} vs {1}")]
    WidthMismatch(usize, usize),
}
