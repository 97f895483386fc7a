use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{QMatrix, ResponseLog};
use crate::genome::{infer_shapes, GenomeTree, LeafKind, Node, OperatorKind};
use crate::numcore::{sigmoid, softplus, Gradients, Init, NumError, ParamId, ParamStore, Shape, Tape, Value, Var};
use crate::training::TrainError;

/// Hidden widths of the FC head; the last layer emits the logit.
pub const HEAD_DIMS: [usize; 3] = [512, 256, 1];

/// Emitted probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]`.
pub const PROB_CLAMP: f64 = 1e-7;

/// Dataset sizes a model is built for. The embedding width equals the
/// concept count.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub n_students: usize,
    pub n_exercises: usize,
    pub n_concepts: usize,
}

impl Dims {
    pub fn embed(&self) -> usize {
        self.n_concepts
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum OutputMode {
    /// The scalar root is squashed to a probability (or used as-is when it
    /// is already a Sigmoid).
    ScalarDirect,
    /// The vector root feeds the monotonic FC head.
    VectorFcHead,
}

#[derive(Clone, Copy, Debug)]
struct Layer {
    w: ParamId,
    b: ParamId,
}

/// A tree bound to its trainable parameters.
#[derive(Clone, Debug)]
pub struct CandidateModel {
    tree: GenomeTree,
    dims: Dims,
    mode: OutputMode,
    seed: u64,
    store: ParamStore,
    w_s: ParamId,
    w_e: ParamId,
    /// Weight of each preorder node, if its operator has one.
    node_params: Vec<Option<ParamId>>,
    head: Vec<Layer>,
}

/// Result of one forward pass over a batch.
pub(crate) struct Forward {
    pub tape: Tape,
    /// Pre-sigmoid output, one entry per item.
    pub logit: Var,
    /// The tree's root value.
    pub root: Var,
}

impl CandidateModel {
    /// Binds fresh parameters to a feasible tree. Parameters are drawn in a
    /// fixed order from a generator seeded by `seed`.
    pub fn assemble(tree: &GenomeTree, dims: Dims, seed: u64) -> Result<Self, TrainError> {
        let report = infer_shapes(tree);
        if !report.is_feasible() {
            return Err(TrainError::Infeasible(report.infeasible));
        }
        if dims.n_students == 0 || dims.n_exercises == 0 || dims.n_concepts == 0 {
            return Err(TrainError::Config("model dimensions must be positive".into()));
        }
        let mode = match report.root() {
            Shape::Scalar => OutputMode::ScalarDirect,
            Shape::Vector => OutputMode::VectorFcHead,
        };
        let d = dims.embed();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let w_s = store.add("W_S", dims.n_students, d, Init::Xavier, false, &mut rng);
        let w_e = store.add("W_E", dims.n_exercises, d, Init::Xavier, false, &mut rng);
        let node_params = tree
            .root()
            .preorder()
            .into_iter()
            .enumerate()
            .map(|(id, node)| {
                let (rows, cols) = match node.op()? {
                    OperatorKind::Ffn => (d, 1),
                    OperatorKind::FfnD => (d, d),
                    OperatorKind::Concat => (2 * d, d),
                    _ => return None,
                };
                let name = format!("node{id}.{}", node.op()?.name());
                Some(store.add(name, rows, cols, Init::Xavier, false, &mut rng))
            })
            .collect();
        let mut head = Vec::new();
        if mode == OutputMode::VectorFcHead {
            let mut fan_in = d;
            for (i, &out) in HEAD_DIMS.iter().enumerate() {
                let w = store.add(format!("fc{}.w", i + 1), fan_in, out, Init::Xavier, true, &mut rng);
                let b = store.add(format!("fc{}.b", i + 1), 1, out, Init::Zeros, false, &mut rng);
                if i > 0 {
                    center_bias(&mut store, w, b);
                }
                head.push(Layer { w, b });
                fan_in = out;
            }
        }
        Ok(CandidateModel {
            tree: tree.clone(),
            dims,
            mode,
            seed,
            store,
            w_s,
            w_e,
            node_params,
            head,
        })
    }

    pub fn tree(&self) -> &GenomeTree {
        &self.tree
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn output_mode(&self) -> OutputMode {
        self.mode
    }

    /// Seed the parameters were initialized from.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn student_embedding(&self) -> ParamId {
        self.w_s
    }

    pub fn exercise_embedding(&self) -> ParamId {
        self.w_e
    }

    pub(crate) fn check_items(&self, q: &QMatrix, items: &[ResponseLog]) -> Result<(), TrainError> {
        if q.rows() != self.dims.n_exercises || q.cols() != self.dims.n_concepts {
            return Err(TrainError::Config(format!(
                "Q-matrix is {} x {}, model expects {} x {}",
                q.rows(),
                q.cols(),
                self.dims.n_exercises,
                self.dims.n_concepts
            )));
        }
        for it in items {
            if it.student >= self.dims.n_students || it.exercise >= self.dims.n_exercises {
                return Err(TrainError::Index {
                    student: it.student,
                    exercise: it.exercise,
                });
            }
        }
        Ok(())
    }

    pub(crate) fn forward(&self, q: &QMatrix, items: &[ResponseLog]) -> Result<Forward, NumError> {
        let mut tape = Tape::new();
        let mut leaves: [Option<Var>; 3] = [None; 3];
        let root_node = self.tree.root();
        let (logit, root) = match (self.mode, root_node) {
            // The root already squashes: its input is the logit, so the
            // emitted probability equals the root value.
            (
                OutputMode::ScalarDirect,
                Node::Op {
                    op: OperatorKind::Sigmoid,
                    children,
                },
            ) => {
                let z = self.eval_node(&children[0], &mut 1, &mut tape, &mut leaves, q, items)?;
                let root = tape.apply(OperatorKind::Sigmoid, &[z], None, &self.store)?;
                (z, root)
            }
            (OutputMode::ScalarDirect, _) => {
                let root = self.eval_node(root_node, &mut 0, &mut tape, &mut leaves, q, items)?;
                (root, root)
            }
            (OutputMode::VectorFcHead, _) => {
                let root = self.eval_node(root_node, &mut 0, &mut tape, &mut leaves, q, items)?;
                let mut h = root;
                for (i, layer) in self.head.iter().enumerate() {
                    h = tape.affine(h, layer.w, layer.b, &self.store)?;
                    if i + 1 < self.head.len() {
                        h = tape.apply(OperatorKind::Sigmoid, &[h], None, &self.store)?;
                    }
                }
                (h, root)
            }
        };
        Ok(Forward { tape, logit, root })
    }

    fn eval_node(
        &self,
        node: &Node,
        next: &mut usize,
        tape: &mut Tape,
        leaves: &mut [Option<Var>; 3],
        q: &QMatrix,
        items: &[ResponseLog],
    ) -> Result<Var, NumError> {
        let id = *next;
        *next += 1;
        match node {
            Node::Leaf { leaf } => {
                let slot = match leaf {
                    LeafKind::Student => 0,
                    LeafKind::Exercise => 1,
                    LeafKind::Concept => 2,
                };
                if let Some(v) = leaves[slot] {
                    return Ok(v);
                }
                let v = match leaf {
                    LeafKind::Student => {
                        let rows: Vec<usize> = items.iter().map(|i| i.student).collect();
                        tape.gather(&self.store, self.w_s, &rows)
                    }
                    LeafKind::Exercise => {
                        let rows: Vec<usize> = items.iter().map(|i| i.exercise).collect();
                        tape.gather(&self.store, self.w_e, &rows)
                    }
                    LeafKind::Concept => {
                        let k = q.cols();
                        let mut data = Vec::with_capacity(items.len() * k);
                        for it in items {
                            data.extend(q.row(it.exercise).iter().map(|&b| f64::from(b)));
                        }
                        tape.input(Value::vectors(items.len(), k, data))
                    }
                };
                leaves[slot] = Some(v);
                Ok(v)
            }
            Node::Op { op, children } => {
                let mut inputs = Vec::with_capacity(children.len());
                for c in children {
                    inputs.push(self.eval_node(c, next, tape, leaves, q, items)?);
                }
                tape.apply(*op, &inputs, self.node_params[id], &self.store)
            }
        }
    }

    /// Mean binary cross-entropy of a batch and its gradients with respect
    /// to every parameter the batch touches.
    pub fn loss_and_gradients(&self, q: &QMatrix, items: &[ResponseLog]) -> Result<(f64, Gradients), NumError> {
        let fwd = self.forward(q, items)?;
        let z = fwd.tape.value(fwd.logit).data();
        let b = items.len() as f64;
        let mut loss = 0.0;
        let mut seed = Vec::with_capacity(items.len());
        for (&zi, item) in z.iter().zip(items) {
            let y = f64::from(item.score);
            // -[y log s(z) + (1-y) log(1-s(z))] = softplus(z) - y z
            loss += softplus(zi) - y * zi;
            seed.push((sigmoid(zi) - y) / b);
        }
        let grads = fwd.tape.backward(fwd.logit, &Value::scalars(seed), &self.store);
        for (id, _) in self.store.iter() {
            if let Some(g) = grads.param(id) {
                if !g.iter().all(|v| v.is_finite()) {
                    return Err(NumError::Overflow("gradient"));
                }
            }
        }
        Ok((loss / b, grads))
    }

    /// Correct-response probabilities for `(student, exercise)` items; the
    /// score field is ignored.
    pub fn predict(&self, q: &QMatrix, items: &[ResponseLog]) -> Result<Vec<f64>, TrainError> {
        self.check_items(q, items)?;
        let mut out = Vec::with_capacity(items.len());
        for chunk in items.chunks(EVAL_CHUNK) {
            let fwd = self.forward(q, chunk)?;
            out.extend(fwd.tape.value(fwd.logit).data().iter().map(|&z| clamp_prob(sigmoid(z))));
        }
        Ok(out)
    }

    /// Tree root values, one row per item (width 1 for scalar roots).
    pub fn tree_outputs(&self, q: &QMatrix, items: &[ResponseLog]) -> Result<Vec<Vec<f64>>, TrainError> {
        self.check_items(q, items)?;
        let mut out = Vec::with_capacity(items.len());
        for chunk in items.chunks(EVAL_CHUNK) {
            let fwd = self.forward(q, chunk)?;
            let v = fwd.tape.value(fwd.root);
            out.extend((0..v.rows()).map(|r| v.row(r).to_vec()));
        }
        Ok(out)
    }

    /// Probability the FC head assigns to a given tree output vector.
    /// `None` for scalar-rooted models.
    pub fn head_probability(&self, y: &[f64]) -> Option<f64> {
        if self.mode != OutputMode::VectorFcHead || y.len() != self.dims.embed() {
            return None;
        }
        let mut h = y.to_vec();
        for (i, layer) in self.head.iter().enumerate() {
            let w = self.store.get(layer.w);
            let b = self.store.values(layer.b);
            let mut next = b.to_vec();
            for (r, &x) in h.iter().enumerate() {
                for (c, acc) in next.iter_mut().enumerate() {
                    *acc += x * w.value[r * w.cols + c];
                }
            }
            if i + 1 < self.head.len() {
                next.iter_mut().for_each(|v| *v = sigmoid(*v));
            }
            h = next;
        }
        Some(clamp_prob(sigmoid(h[0])))
    }
}

/// Sets `b = -0.5 * column sums of w`, so a layer fed by sigmoid outputs
/// near one half starts with centered pre-activations despite its
/// nonnegative weights.
fn center_bias(store: &mut ParamStore, w: ParamId, b: ParamId) {
    let wp = store.get(w);
    let mut sums = vec![0.0; wp.cols];
    for r in 0..wp.rows {
        for (c, s) in sums.iter_mut().enumerate() {
            *s += wp.value[r * wp.cols + c];
        }
    }
    for (dst, s) in store.get_mut(b).value.iter_mut().zip(sums) {
        *dst = -0.5 * s;
    }
}

/// Rows per forward pass when only predictions are needed.
const EVAL_CHUNK: usize = 1024;

pub(crate) fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}
