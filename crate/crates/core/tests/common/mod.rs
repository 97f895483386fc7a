//! Brute-force reference implementations shared by the integration tests.
//! None of these call into the library code they are compared against.
#![allow(dead_code)]

use cdm_evo::data::{generate_synthetic, ResponseDataset, ResponseLog, SplitRatios, SynthConfig, SynthData};
use cdm_evo::genome::{LeafKind, Node, OperatorKind, MAX_DEPTH};
use rand::seq::SliceRandom;
use rand::Rng;

/// Front index of every point by repeated peeling of the non-dominated set.
pub fn oracle_ranks(points: &[(f64, f64)]) -> Vec<usize> {
    let dom = |p: (f64, f64), q: (f64, f64)| p.0 >= q.0 && p.1 >= q.1 && (p.0 > q.0 || p.1 > q.1);
    let mut rank = vec![usize::MAX; points.len()];
    let mut level = 0;
    while rank.iter().any(|&r| r == usize::MAX) {
        let open: Vec<usize> = (0..points.len()).filter(|&i| rank[i] == usize::MAX).collect();
        let front: Vec<usize> = open
            .iter()
            .copied()
            .filter(|&i| !open.iter().any(|&j| dom(points[j], points[i])))
            .collect();
        for i in front {
            rank[i] = level;
        }
        level += 1;
    }
    rank
}

/// Crowding distance by scanning for each point's neighbours along each
/// objective, with ties ordered by position.
pub fn oracle_crowding(front: &[(f64, f64)]) -> Vec<f64> {
    let n = front.len();
    let mut dist = vec![0.0; n];
    for m in 0..2 {
        let v = |i: usize| if m == 0 { front[i].0 } else { front[i].1 };
        let less = |a: usize, b: usize| v(a) < v(b) || (v(a) == v(b) && a < b);
        let lo = (0..n).map(v).fold(f64::INFINITY, f64::min);
        let hi = (0..n).map(v).fold(f64::NEG_INFINITY, f64::max);
        for i in 0..n {
            let pred = (0..n).filter(|&j| less(j, i)).fold(None, |best: Option<usize>, j| match best {
                Some(b) if less(j, b) => Some(b),
                _ => Some(j),
            });
            let succ = (0..n).filter(|&j| less(i, j)).fold(None, |best: Option<usize>, j| match best {
                Some(b) if less(b, j) => Some(b),
                _ => Some(j),
            });
            match (pred, succ) {
                (Some(p), Some(s)) => {
                    if hi > lo {
                        dist[i] += (v(s) - v(p)) / (hi - lo);
                    }
                }
                _ => dist[i] = f64::INFINITY,
            }
        }
    }
    dist
}

/// Probability that a random positive outranks a random negative, ties
/// counting one half.
pub fn oracle_auc(preds: &[f64], labels: &[u8]) -> Option<f64> {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &pi) in preds.iter().enumerate() {
        if labels[i] != 1 {
            continue;
        }
        for (j, &pj) in preds.iter().enumerate() {
            if labels[j] != 0 {
                continue;
            }
            pairs += 1.0;
            if pi > pj {
                wins += 1.0;
            } else if pi == pj {
                wins += 0.5;
            }
        }
    }
    (pairs > 0.0).then(|| wins / pairs)
}

/// Checks a `digraph` rendering against a tree: one node statement per tree
/// node, one edge per parent link, balanced quoting and braces.
pub fn check_dot(dot: &str, n_nodes: usize) -> Result<(), String> {
    let lines: Vec<&str> = dot.lines().collect();
    if !lines.first().is_some_and(|l| l.starts_with("digraph ") && l.ends_with('{')) {
        return Err("missing digraph header".into());
    }
    if lines.last() != Some(&"}") {
        return Err("missing closing brace".into());
    }
    let mut declared = vec![false; n_nodes];
    let mut edges = 0;
    for line in &lines[1..lines.len() - 1] {
        let line = line.trim();
        if !line.ends_with(';') {
            return Err(format!("statement without semicolon: {line}"));
        }
        if line.matches('"').count() % 2 != 0 {
            return Err(format!("unbalanced quotes: {line}"));
        }
        let body = &line[..line.len() - 1];
        if let Some((a, b)) = body.split_once(" -> ") {
            let a = parse_id(a)?;
            let b = parse_id(b)?;
            if a >= n_nodes || b >= n_nodes || b >= a {
                return Err(format!("bad edge {line}"));
            }
            edges += 1;
        } else if let Some((id, attrs)) = body.split_once(' ') {
            if id.starts_with('n') {
                let id = parse_id(id)?;
                if id >= n_nodes || !attrs.starts_with('[') || !attrs.ends_with(']') {
                    return Err(format!("bad node statement {line}"));
                }
                declared[id] = true;
            }
        }
    }
    if declared.iter().any(|d| !d) {
        return Err("undeclared node".into());
    }
    if edges + 1 != n_nodes {
        return Err(format!("{edges} edges for {n_nodes} nodes"));
    }
    Ok(())
}

fn parse_id(s: &str) -> Result<usize, String> {
    s.trim()
        .strip_prefix('n')
        .and_then(|d| d.parse().ok())
        .ok_or_else(|| format!("bad node id {s}"))
}

/// Random tree over all operators without any shape repair. The root is a
/// computation node and the depth cap holds.
pub fn unrepaired_node<R: Rng + ?Sized>(rng: &mut R, max_depth: usize) -> Node {
    fn grow<R: Rng + ?Sized>(rng: &mut R, level: usize, max_depth: usize) -> Node {
        let stop = level > max_depth || (level > 1 && rng.gen_bool(0.35));
        if stop {
            return Node::leaf(*LeafKind::ALL.choose(rng).unwrap());
        }
        let op = *OperatorKind::ALL.choose(rng).unwrap();
        let children = (0..op.arity()).map(|_| grow(rng, level + 1, max_depth)).collect();
        Node::Op { op, children }
    }
    grow(rng, 1, max_depth.min(MAX_DEPTH))
}

/// Structure with operators reduced to their arity.
pub fn skeleton(node: &Node) -> String {
    match node {
        Node::Leaf { leaf } => leaf.name().to_string(),
        Node::Op { op, children } => {
            let inner: Vec<String> = children.iter().map(skeleton).collect();
            format!("{}({})", op.arity(), inner.join(","))
        }
    }
}

pub fn synthetic(seed: u64) -> (SynthData, ResponseDataset) {
    let synth = generate_synthetic(&SynthConfig {
        seed,
        ..SynthConfig::default()
    });
    let data = ResponseDataset::build(&synth.raw, 15, SplitRatios::default(), seed).expect("synthetic data splits");
    (synth, data)
}

/// Logistic matrix factorization with biases, fit by plain SGD with L2.
pub struct LogisticMf {
    rank: usize,
    u: Vec<f64>,
    v: Vec<f64>,
    bu: Vec<f64>,
    bv: Vec<f64>,
}

impl LogisticMf {
    pub fn fit<R: Rng + ?Sized>(
        logs: &[ResponseLog],
        n_students: usize,
        n_exercises: usize,
        rank: usize,
        epochs: usize,
        rng: &mut R,
    ) -> Self {
        let mut m = LogisticMf {
            rank,
            u: (0..n_students * rank).map(|_| rng.gen_range(-0.1..0.1)).collect(),
            v: (0..n_exercises * rank).map(|_| rng.gen_range(-0.1..0.1)).collect(),
            bu: vec![0.0; n_students],
            bv: vec![0.0; n_exercises],
        };
        let (lr, l2) = (0.05, 1e-3);
        let mut order: Vec<usize> = (0..logs.len()).collect();
        for _ in 0..epochs {
            order.shuffle(rng);
            for &i in &order {
                let l = logs[i];
                let err = f64::from(l.score) - m.prob(l.student, l.exercise);
                let (s, e) = (l.student * rank, l.exercise * rank);
                for k in 0..rank {
                    let (us, ve) = (m.u[s + k], m.v[e + k]);
                    m.u[s + k] += lr * (err * ve - l2 * us);
                    m.v[e + k] += lr * (err * us - l2 * ve);
                }
                m.bu[l.student] += lr * err;
                m.bv[l.exercise] += lr * err;
            }
        }
        m
    }

    pub fn prob(&self, s: usize, e: usize) -> f64 {
        let r = self.rank;
        let dot: f64 = (0..r).map(|k| self.u[s * r + k] * self.v[e * r + k]).sum();
        1.0 / (1.0 + (-(dot + self.bu[s] + self.bv[e])).exp())
    }
}

/// Relative error with a small floor so near-zero gradients compare on an
/// absolute scale.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-3)
}

/// One operator applied to random inputs, with a random linear functional
/// of the output as the loss.
#[derive(Clone, Debug)]
pub struct OpCase {
    pub kind: OperatorKind,
    pub inputs: Vec<(bool, Vec<f64>)>,
    pub weight: Option<(usize, usize, Vec<f64>)>,
    pub batch: usize,
    pub dim: usize,
}

pub const OP_BATCH: usize = 3;
pub const OP_DIM: usize = 4;

/// Inputs stay at least 0.1 away from zero so Abs and the signed root are
/// differentiable over the whole finite-difference stencil.
pub fn op_case<R: Rng + ?Sized>(kind: OperatorKind, rng: &mut R) -> OpCase {
    use OperatorKind::*;
    let (b, d) = (OP_BATCH, OP_DIM);
    let entry = |rng: &mut R| {
        let m = rng.gen_range(0.1..2.0);
        if rng.gen_bool(0.5) {
            m
        } else {
            -m
        }
    };
    let input = |rng: &mut R, vector: bool| {
        let n = if vector { b * d } else { b };
        (vector, (0..n).map(|_| entry(rng)).collect::<Vec<f64>>())
    };
    let needs_vector = matches!(kind, Sum | Mean | Ffn | FfnD | Concat);
    let mut inputs = vec![];
    let first = needs_vector || rng.gen_bool(0.5);
    inputs.push(input(rng, first));
    if kind.is_binary() {
        let second = kind == Concat || rng.gen_bool(0.5);
        inputs.push(input(rng, second));
    }
    let weight = match kind {
        Ffn => Some((d, 1)),
        FfnD => Some((d, d)),
        Concat => Some((2 * d, d)),
        _ => None,
    }
    .map(|(r, c)| (r, c, (0..r * c).map(|_| rng.gen_range(-1.0..1.0)).collect()));
    OpCase {
        kind,
        inputs,
        weight,
        batch: b,
        dim: d,
    }
}

fn value_of(vector: bool, data: &[f64], batch: usize, dim: usize) -> cdm_evo::numcore::Value {
    use cdm_evo::numcore::Value;
    if vector {
        Value::vectors(batch, dim, data.to_vec())
    } else {
        Value::scalars(data.to_vec())
    }
}

/// Loss weights for an output of `n` entries, derived deterministically.
fn loss_weights(n: usize) -> Vec<f64> {
    (0..n).map(|i| 0.3 + 0.7 * ((i * 7 + 3) % 11) as f64 / 11.0 - 0.5).collect()
}

/// Forward pass; returns the loss and, if requested, analytic gradients per
/// input entry followed by the weight entries.
pub fn op_loss(case: &OpCase, want_grad: bool) -> (f64, Vec<f64>) {
    use cdm_evo::numcore::{ParamStore, Tape, Value};
    let mut store = ParamStore::new();
    let pid = case
        .weight
        .as_ref()
        .map(|(r, c, w)| store.add_with_value("w", *r, *c, w.clone(), false));
    let mut tape = Tape::new();
    let vars: Vec<_> = case
        .inputs
        .iter()
        .map(|(v, data)| tape.input(value_of(*v, data, case.batch, case.dim)))
        .collect();
    let out = tape.apply(case.kind, &vars, pid, &store).expect("operator applies");
    let ov = tape.value(out).clone();
    let c = loss_weights(ov.data().len());
    let loss: f64 = ov.data().iter().zip(&c).map(|(a, b)| a * b).sum();
    if !want_grad {
        return (loss, vec![]);
    }
    let seed = if ov.cols() == 1 && ov.shape() == cdm_evo::numcore::Shape::Scalar {
        Value::scalars(c)
    } else {
        Value::vectors(ov.rows(), ov.cols(), c)
    };
    let g = tape.backward(out, &seed, &store);
    let mut flat = Vec::new();
    for (v, (_, data)) in vars.iter().zip(&case.inputs) {
        match g.wrt(*v) {
            Some(gx) => flat.extend_from_slice(gx),
            None => flat.extend(std::iter::repeat(0.0).take(data.len())),
        }
    }
    if let Some(p) = pid {
        flat.extend_from_slice(g.param(p).expect("weight gradient"));
    }
    (loss, flat)
}

/// Largest relative error between analytic and central-difference
/// gradients over every input and weight entry.
pub fn op_grad_error(case: &OpCase, h: f64) -> f64 {
    let (_, analytic) = op_loss(case, true);
    let mut worst: f64 = 0.0;
    let mut k = 0;
    let bump = |case: &OpCase, slot: (usize, usize), delta: f64| {
        let mut c = case.clone();
        match slot.0 {
            usize::MAX => c.weight.as_mut().unwrap().2[slot.1] += delta,
            i => c.inputs[i].1[slot.1] += delta,
        }
        op_loss(&c, false).0
    };
    let mut slots = Vec::new();
    for (i, (_, data)) in case.inputs.iter().enumerate() {
        slots.extend((0..data.len()).map(|j| (i, j)));
    }
    if let Some((_, _, w)) = &case.weight {
        slots.extend((0..w.len()).map(|j| (usize::MAX, j)));
    }
    for slot in slots {
        let numeric = (bump(case, slot, h) - bump(case, slot, -h)) / (2.0 * h);
        worst = worst.max(rel_err(analytic[k], numeric));
        k += 1;
    }
    worst
}
