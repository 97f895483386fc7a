//! Reverse-mode differentiation over batched activations.
//!
//! Every forward operation appends a node to the [`Tape`]; node inputs always
//! precede the node itself, so a single reverse sweep visits nodes in a valid
//! order. Parameters are read from a [`ParamStore`] during both sweeps and
//! their gradients come back densely in a [`Gradients`] map.

use crate::genome::OperatorKind;
use crate::numcore::linalg::{gemm, Transpose};
use crate::numcore::params::{ParamId, ParamStore};
use crate::numcore::value::{Shape, Value};
use crate::numcore::NumError;

/// Added inside `Inv` and `Sqrt`.
pub const OP_EPSILON: f64 = 1e-6;

/// Largest magnitude a forward value may take before it counts as overflow.
pub const VALUE_GUARD: f64 = 1e12;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Input,
    Gather { param: ParamId, rows: Vec<usize> },
    Elementwise { kind: OperatorKind, x: Var },
    Reduce { x: Var, mean: bool },
    Project { x: Var, w: ParamId },
    Concat { x: Var, y: Var, w: ParamId },
    Add { x: Var, y: Var },
    Mul { x: Var, y: Var },
    Affine { x: Var, w: ParamId, b: ParamId },
}

#[derive(Clone, Debug)]
struct Node {
    value: Value,
    op: Op,
}

/// Ordered record of the forward computation.
#[derive(Clone, Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of one backward sweep: dense per parameter, and per tape node.
#[derive(Clone, Debug)]
pub struct Gradients {
    params: Vec<Option<Vec<f64>>>,
    nodes: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    /// A map with room for `n_params` parameters and no entries.
    pub fn empty(n_params: usize) -> Self {
        Gradients {
            params: vec![None; n_params],
            nodes: Vec::new(),
        }
    }

    pub fn param(&self, id: ParamId) -> Option<&[f64]> {
        self.params.get(id.0).and_then(|g| g.as_deref())
    }

    pub fn set_param(&mut self, id: ParamId, grad: Vec<f64>) {
        if self.params.len() <= id.0 {
            self.params.resize(id.0 + 1, None);
        }
        self.params[id.0] = Some(grad);
    }

    /// Gradient with respect to a tape node (inputs, gathers, intermediates).
    pub fn wrt(&self, var: Var) -> Option<&[f64]> {
        self.nodes.get(var.0).and_then(|g| g.as_deref())
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, var: Var) -> &Value {
        &self.nodes[var.0].value
    }

    fn push(&mut self, value: Value, op: Op) -> Result<Var, NumError> {
        guard(&value, &op)?;
        self.nodes.push(Node { value, op });
        Ok(Var(self.nodes.len() - 1))
    }

    /// Records a constant input.
    pub fn input(&mut self, value: Value) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Input,
        });
        Var(self.nodes.len() - 1)
    }

    /// Embedding lookup: selects `rows` of a parameter matrix as a vector batch.
    pub fn gather(&mut self, store: &ParamStore, param: ParamId, rows: &[usize]) -> Var {
        let p = store.get(param);
        let mut data = Vec::with_capacity(rows.len() * p.cols);
        for &r in rows {
            data.extend_from_slice(&p.value[r * p.cols..(r + 1) * p.cols]);
        }
        let value = Value::vectors(rows.len(), p.cols, data);
        self.nodes.push(Node {
            value,
            op: Op::Gather {
                param,
                rows: rows.to_vec(),
            },
        });
        Var(self.nodes.len() - 1)
    }

    /// Applies one search-space operator.
    ///
    /// `param` must be given exactly for FFN (D x 1), FFN_D (D x D) and
    /// Concat (2D x D).
    pub fn apply(
        &mut self,
        kind: OperatorKind,
        inputs: &[Var],
        param: Option<ParamId>,
        store: &ParamStore,
    ) -> Result<Var, NumError> {
        if inputs.len() != kind.arity() {
            return Err(NumError::Arity {
                op: kind.name(),
                expected: kind.arity(),
                got: inputs.len(),
            });
        }
        if kind.has_params() != param.is_some() {
            return Err(NumError::ParamMismatch(kind.name()));
        }
        let x = inputs[0];
        let xv = &self.nodes[x.0].value;
        if kind.requires_vector_input() && xv.shape() != Shape::Vector {
            return Err(NumError::InfeasibleShape(kind.name()));
        }
        use OperatorKind::*;
        match kind {
            Neg | Abs | Inv | Square | Sqrt | Tanh | Sigmoid | Softplus => {
                let data = xv.data().iter().map(|&v| elementwise(kind, v)).collect();
                let value = Value::from_parts(xv.shape(), xv.rows(), xv.cols(), data);
                self.push(value, Op::Elementwise { kind, x })
            }
            Sum | Mean => {
                let cols = xv.cols() as f64;
                let data = (0..xv.rows())
                    .map(|r| {
                        let s: f64 = xv.row(r).iter().sum();
                        if kind == Mean {
                            s / cols
                        } else {
                            s
                        }
                    })
                    .collect();
                let value = Value::scalars(data);
                self.push(
                    value,
                    Op::Reduce {
                        x,
                        mean: kind == Mean,
                    },
                )
            }
            Ffn | FfnD => {
                let w = param.expect("checked above");
                let p = store.get(w);
                let out_cols = if kind == Ffn { 1 } else { xv.cols() };
                if p.rows != xv.cols() || p.cols != out_cols {
                    return Err(NumError::ParamShape {
                        name: p.name.clone(),
                        expected: (xv.cols(), out_cols),
                        got: (p.rows, p.cols),
                    });
                }
                let mut out = vec![0.0; xv.rows() * out_cols];
                gemm(
                    xv.rows(),
                    xv.cols(),
                    out_cols,
                    xv.data(),
                    Transpose::No,
                    &p.value,
                    Transpose::No,
                    &mut out,
                    false,
                );
                let shape = if kind == Ffn {
                    Shape::Scalar
                } else {
                    Shape::Vector
                };
                let value = Value::from_parts(shape, xv.rows(), out_cols, out);
                self.push(value, Op::Project { x, w })
            }
            Concat => {
                let y = inputs[1];
                let yv = &self.nodes[y.0].value;
                if yv.shape() != Shape::Vector {
                    return Err(NumError::InfeasibleShape(kind.name()));
                }
                check_batch(xv, yv)?;
                if xv.cols() != yv.cols() {
                    return Err(NumError::WidthMismatch(xv.cols(), yv.cols()));
                }
                let w = param.expect("checked above");
                let p = store.get(w);
                let d = xv.cols();
                if p.rows != 2 * d || p.cols != d {
                    return Err(NumError::ParamShape {
                        name: p.name.clone(),
                        expected: (2 * d, d),
                        got: (p.rows, p.cols),
                    });
                }
                let (top, bottom) = p.value.split_at(d * d);
                let mut out = vec![0.0; xv.rows() * d];
                gemm(xv.rows(), d, d, xv.data(), Transpose::No, top, Transpose::No, &mut out, false);
                gemm(xv.rows(), d, d, yv.data(), Transpose::No, bottom, Transpose::No, &mut out, true);
                let value = Value::vectors(xv.rows(), d, out);
                self.push(value, Op::Concat { x, y, w })
            }
            Add | Mul => {
                let y = inputs[1];
                let yv = &self.nodes[y.0].value;
                let value = broadcast(xv, yv, |a, b| if kind == Add { a + b } else { a * b })?;
                let op = if kind == Add { Op::Add { x, y } } else { Op::Mul { x, y } };
                self.push(value, op)
            }
        }
    }

    /// Fully connected layer `x W + b` with `W: in x out`, `b: 1 x out`.
    /// The output is always a vector batch (width `out`).
    pub fn affine(
        &mut self,
        x: Var,
        w: ParamId,
        b: ParamId,
        store: &ParamStore,
    ) -> Result<Var, NumError> {
        let xv = &self.nodes[x.0].value;
        let wp = store.get(w);
        let bp = store.get(b);
        if wp.rows != xv.cols() || bp.rows != 1 || bp.cols != wp.cols {
            return Err(NumError::ParamShape {
                name: wp.name.clone(),
                expected: (xv.cols(), bp.cols),
                got: (wp.rows, wp.cols),
            });
        }
        let rows = xv.rows();
        let out_cols = wp.cols;
        let mut out = Vec::with_capacity(rows * out_cols);
        for _ in 0..rows {
            out.extend_from_slice(&bp.value);
        }
        gemm(
            rows,
            xv.cols(),
            out_cols,
            xv.data(),
            Transpose::No,
            &wp.value,
            Transpose::No,
            &mut out,
            true,
        );
        let shape = if out_cols == 1 {
            Shape::Scalar
        } else {
            Shape::Vector
        };
        let value = Value::from_parts(shape, rows, out_cols, out);
        self.push(value, Op::Affine { x, w, b })
    }

    /// Propagates `seed` (d loss / d output) back through the tape.
    pub fn backward(&self, output: Var, seed: &Value, store: &ParamStore) -> Gradients {
        let out_value = &self.nodes[output.0].value;
        assert!(
            seed.rows() == out_value.rows() && seed.cols() == out_value.cols(),
            "seed layout must match the output"
        );
        let mut adj: Vec<Option<Vec<f64>>> = vec![None; output.0 + 1];
        adj[output.0] = Some(seed.data().to_vec());
        let mut params: Vec<Option<Vec<f64>>> = vec![None; store.len()];

        for idx in (0..=output.0).rev() {
            let Some(g) = adj[idx].take() else {
                continue;
            };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Input => {}
                Op::Gather { param, rows } => {
                    let p = store.get(*param);
                    let acc = param_slot(&mut params, *param, p.len());
                    for (i, &r) in rows.iter().enumerate() {
                        let src = &g[i * p.cols..(i + 1) * p.cols];
                        for (a, s) in acc[r * p.cols..(r + 1) * p.cols].iter_mut().zip(src) {
                            *a += s;
                        }
                    }
                }
                Op::Elementwise { kind, x } => {
                    let xv = self.nodes[x.0].value.data();
                    let yv = node.value.data();
                    let dx: Vec<f64> = g
                        .iter()
                        .zip(xv.iter().zip(yv))
                        .map(|(&gi, (&xi, &yi))| gi * elementwise_grad(*kind, xi, yi))
                        .collect();
                    accumulate(&mut adj, *x, &dx);
                }
                Op::Reduce { x, mean } => {
                    let xv = &self.nodes[x.0].value;
                    let cols = xv.cols();
                    let scale = if *mean { 1.0 / cols as f64 } else { 1.0 };
                    let mut dx = vec![0.0; xv.data().len()];
                    for r in 0..xv.rows() {
                        dx[r * cols..(r + 1) * cols].fill(g[r] * scale);
                    }
                    accumulate(&mut adj, *x, &dx);
                }
                Op::Project { x, w } => {
                    let xv = &self.nodes[x.0].value;
                    let p = store.get(*w);
                    let (rows, inner, out) = (xv.rows(), p.rows, p.cols);
                    let mut dx = vec![0.0; rows * inner];
                    gemm(rows, out, inner, &g, Transpose::No, &p.value, Transpose::Yes, &mut dx, false);
                    accumulate(&mut adj, *x, &dx);
                    let dw = param_slot(&mut params, *w, p.len());
                    gemm(inner, rows, out, xv.data(), Transpose::Yes, &g, Transpose::No, dw, true);
                }
                Op::Concat { x, y, w } => {
                    let xv = &self.nodes[x.0].value;
                    let yv = &self.nodes[y.0].value;
                    let p = store.get(*w);
                    let rows = xv.rows();
                    let d = xv.cols();
                    let (top, bottom) = p.value.split_at(d * d);
                    let mut dx = vec![0.0; rows * d];
                    gemm(rows, d, d, &g, Transpose::No, top, Transpose::Yes, &mut dx, false);
                    let mut dy = vec![0.0; rows * d];
                    gemm(rows, d, d, &g, Transpose::No, bottom, Transpose::Yes, &mut dy, false);
                    let dw = param_slot(&mut params, *w, p.len());
                    let (dtop, dbottom) = dw.split_at_mut(d * d);
                    gemm(d, rows, d, xv.data(), Transpose::Yes, &g, Transpose::No, dtop, true);
                    gemm(d, rows, d, yv.data(), Transpose::Yes, &g, Transpose::No, dbottom, true);
                    accumulate(&mut adj, *x, &dx);
                    accumulate(&mut adj, *y, &dy);
                }
                Op::Add { x, y } => {
                    let dx = unbroadcast(&g, &node.value, &self.nodes[x.0].value, |_, _| 1.0);
                    let dy = unbroadcast(&g, &node.value, &self.nodes[y.0].value, |_, _| 1.0);
                    accumulate(&mut adj, *x, &dx);
                    accumulate(&mut adj, *y, &dy);
                }
                Op::Mul { x, y } => {
                    let xv = &self.nodes[x.0].value;
                    let yv = &self.nodes[y.0].value;
                    // d(x*y)/dx = y, evaluated at the broadcast position.
                    let dx = unbroadcast(&g, &node.value, xv, |r, c| at(yv, r, c));
                    let dy = unbroadcast(&g, &node.value, yv, |r, c| at(xv, r, c));
                    accumulate(&mut adj, *x, &dx);
                    accumulate(&mut adj, *y, &dy);
                }
                Op::Affine { x, w, b } => {
                    let xv = &self.nodes[x.0].value;
                    let wp = store.get(*w);
                    let (rows, inner, out) = (xv.rows(), wp.rows, wp.cols);
                    let mut dx = vec![0.0; rows * inner];
                    gemm(rows, out, inner, &g, Transpose::No, &wp.value, Transpose::Yes, &mut dx, false);
                    accumulate(&mut adj, *x, &dx);
                    let dw = param_slot(&mut params, *w, wp.len());
                    gemm(inner, rows, out, xv.data(), Transpose::Yes, &g, Transpose::No, dw, true);
                    let db = param_slot(&mut params, *b, out);
                    for r in 0..rows {
                        for (acc, gi) in db.iter_mut().zip(&g[r * out..(r + 1) * out]) {
                            *acc += gi;
                        }
                    }
                }
            }
            adj[idx] = Some(g);
        }

        Gradients { params, nodes: adj }
    }
}

fn param_slot(params: &mut [Option<Vec<f64>>], id: ParamId, len: usize) -> &mut [f64] {
    params[id.0].get_or_insert_with(|| vec![0.0; len])
}

fn accumulate(adj: &mut [Option<Vec<f64>>], var: Var, grad: &[f64]) {
    match &mut adj[var.0] {
        Some(acc) => {
            for (a, g) in acc.iter_mut().zip(grad) {
                *a += g;
            }
        }
        slot @ None => *slot = Some(grad.to_vec()),
    }
}

fn check_batch(x: &Value, y: &Value) -> Result<(), NumError> {
    if x.rows() != y.rows() {
        return Err(NumError::BatchMismatch(x.rows(), y.rows()));
    }
    Ok(())
}

/// Entry of `v` at broadcast position `(r, c)`.
#[inline]
fn at(v: &Value, r: usize, c: usize) -> f64 {
    if v.cols() == 1 {
        v.data()[r]
    } else {
        v.data()[r * v.cols() + c]
    }
}

fn broadcast(x: &Value, y: &Value, f: impl Fn(f64, f64) -> f64) -> Result<Value, NumError> {
    check_batch(x, y)?;
    let shape = x.shape().max(y.shape());
    let cols = match (x.shape(), y.shape()) {
        (Shape::Vector, Shape::Vector) => {
            if x.cols() != y.cols() {
                return Err(NumError::WidthMismatch(x.cols(), y.cols()));
            }
            x.cols()
        }
        (Shape::Vector, Shape::Scalar) => x.cols(),
        (Shape::Scalar, Shape::Vector) => y.cols(),
        (Shape::Scalar, Shape::Scalar) => 1,
    };
    let rows = x.rows();
    let mut data = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            data.push(f(at(x, r, c), at(y, r, c)));
        }
    }
    Ok(Value::from_parts(shape, rows, cols, data))
}

/// Reduces an output-shaped gradient onto an input that may have been
/// broadcast, scaling each entry by `local(r, c)`.
fn unbroadcast(g: &[f64], out: &Value, input: &Value, local: impl Fn(usize, usize) -> f64) -> Vec<f64> {
    let cols = out.cols();
    let mut d = vec![0.0; input.data().len()];
    for r in 0..out.rows() {
        for c in 0..cols {
            let gi = g[r * cols + c] * local(r, c);
            if input.cols() == 1 {
                d[r] += gi;
            } else {
                d[r * cols + c] += gi;
            }
        }
    }
    d
}

fn guard(value: &Value, op: &Op) -> Result<(), NumError> {
    if value
        .data()
        .iter()
        .all(|v| v.is_finite() && v.abs() <= VALUE_GUARD)
    {
        Ok(())
    } else {
        Err(NumError::Overflow(op_name(op)))
    }
}

fn op_name(op: &Op) -> &'static str {
    match op {
        Op::Input => "input",
        Op::Gather { .. } => "gather",
        Op::Elementwise { kind, .. } => kind.name(),
        Op::Reduce { mean: true, .. } => "Mean",
        Op::Reduce { mean: false, .. } => "Sum",
        Op::Project { .. } => "FFN",
        Op::Concat { .. } => "Concat",
        Op::Add { .. } => "Add",
        Op::Mul { .. } => "Mul",
        Op::Affine { .. } => "affine",
    }
}

/// Sign with `sign(0) = 0`.
#[inline]
pub(crate) fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn elementwise(kind: OperatorKind, x: f64) -> f64 {
    use OperatorKind::*;
    match kind {
        Neg => -x,
        Abs => x.abs(),
        Inv => 1.0 / (x + OP_EPSILON),
        Square => x * x,
        Sqrt => sign(x) * (x.abs() + OP_EPSILON).sqrt(),
        Tanh => x.tanh(),
        Sigmoid => sigmoid(x),
        Softplus => softplus(x),
        _ => unreachable!("{kind} is not elementwise"),
    }
}

/// Local derivative given input `x` and the already computed output `y`.
fn elementwise_grad(kind: OperatorKind, x: f64, y: f64) -> f64 {
    use OperatorKind::*;
    match kind {
        Neg => -1.0,
        Abs => sign(x),
        Inv => {
            let d = x + OP_EPSILON;
            -1.0 / (d * d)
        }
        Square => 2.0 * x,
        Sqrt => {
            let s = sign(x);
            s * s / (2.0 * (x.abs() + OP_EPSILON).sqrt())
        }
        Tanh => 1.0 - y * y,
        Sigmoid => y * (1.0 - y),
        Softplus => sigmoid(x),
        _ => unreachable!("{kind} is not elementwise"),
    }
}
