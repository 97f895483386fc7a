use serde::{Deserialize, Serialize};

/// Per-item shape of an activation: a scalar or a D-dimensional row vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Shape {
    Scalar,
    Vector,
}

impl Shape {
    /// The larger of two shapes; a scalar broadcasts against a vector.
    pub fn max(self, other: Shape) -> Shape {
        if self == Shape::Vector || other == Shape::Vector {
            Shape::Vector
        } else {
            Shape::Scalar
        }
    }
}

/// A batch of activations sharing one per-item [`Shape`].
///
/// Stored row-major with one row per batch item. Scalar batches have a
/// single column; vector batches have `dim` columns.
#[derive(Clone, Debug, PartialEq)]
pub struct Value {
    shape: Shape,
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Value {
    pub fn scalar(x: f64) -> Self {
        Value {
            shape: Shape::Scalar,
            rows: 1,
            cols: 1,
            data: vec![x],
        }
    }

    pub fn vector(xs: Vec<f64>) -> Self {
        Value {
            shape: Shape::Vector,
            rows: 1,
            cols: xs.len(),
            data: xs,
        }
    }

    /// One scalar per batch item.
    pub fn scalars(xs: Vec<f64>) -> Self {
        Value {
            shape: Shape::Scalar,
            rows: xs.len(),
            cols: 1,
            data: xs,
        }
    }

    /// A `rows x dim` batch of vectors.
    pub fn vectors(rows: usize, dim: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * dim, "vector batch data length");
        Value {
            shape: Shape::Vector,
            rows,
            cols: dim,
            data,
        }
    }

    pub(crate) fn from_parts(shape: Shape, rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        debug_assert!(shape == Shape::Vector || cols == 1);
        Value {
            shape,
            rows,
            cols,
            data,
        }
    }

    pub fn zeros_like(other: &Value) -> Self {
        Value {
            shape: other.shape,
            rows: other.rows,
            cols: other.cols,
            data: vec![0.0; other.data.len()],
        }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    /// Batch size.
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// 1 for scalars, D for vectors.
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Same shape and batch layout.
    pub fn same_layout(&self, other: &Value) -> bool {
        self.shape == other.shape && self.rows == other.rows && self.cols == other.cols
    }
}
