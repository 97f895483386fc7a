use cdm_evo::evolve::{crowding_distance, exchange, fast_nondominated_sort, VariationKind};
use cdm_evo::genome::{
    canonical_key, infer_shapes, parse_key, seed_tree, to_dot, BaselineModel, GenomeTree, Node, MAX_DEPTH,
};
use cdm_evo::numcore::Shape;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

/// Accepts tree JSON or a canonical key.
pub fn parse_tree(text: &str) -> Result<GenomeTree, String> {
    let text = text.trim();
    if text.starts_with('{') {
        GenomeTree::from_json(text).map_err(|e| e.to_string())
    } else {
        parse_key(text).map_err(|e| e.to_string())
    }
}

#[derive(Serialize)]
struct Placed {
    id: usize,
    label: &'static str,
    kind: &'static str,
    parent: Option<usize>,
    /// Horizontal slot; leaves take consecutive integers.
    x: f64,
    /// Distance from the root in edges.
    y: usize,
}

fn place(node: &Node, parent: Option<usize>, y: usize, next_leaf: &mut f64, out: &mut Vec<Placed>) -> f64 {
    let id = out.len();
    let (label, kind) = match node {
        Node::Leaf { leaf } => (leaf.name(), "leaf"),
        Node::Op { op, .. } => (op.name(), if op.is_binary() { "binary" } else { "unary" }),
    };
    out.push(Placed {
        id,
        label,
        kind,
        parent,
        x: 0.0,
        y,
    });
    let x = if node.is_leaf() {
        *next_leaf += 1.0;
        *next_leaf - 1.0
    } else {
        let xs: Vec<f64> = node.children().iter().map(|c| place(c, Some(id), y + 1, next_leaf, out)).collect();
        xs.iter().sum::<f64>() / xs.len() as f64
    };
    out[id].x = x;
    x
}

fn shape_name(s: Shape) -> &'static str {
    match s {
        Shape::Scalar => "scalar",
        Shape::Vector => "vector",
    }
}

pub fn describe(text: &str) -> Result<String, String> {
    let tree = parse_tree(text)?;
    let report = infer_shapes(&tree);
    let mut layout = Vec::new();
    place(tree.root(), None, 0, &mut 0.0, &mut layout);
    let m = tree.metrics();
    Ok(json!({
        "key": canonical_key(&tree),
        "tree": tree,
        "depth": m.depth,
        "breadth": m.breadth,
        "num_c": m.num_c,
        "max_depth": MAX_DEPTH,
        "f2": tree.interpretability(),
        "feasible": report.is_feasible(),
        "infeasible": report.infeasible,
        "root_shape": report.is_feasible().then(|| shape_name(report.root())),
        "dot": to_dot(&tree),
        "layout": layout,
    })
    .to_string())
}

pub fn random_tree(lo: usize, hi: usize, seed: u64) -> Result<String, String> {
    if lo == 0 || lo > hi || hi > 64 {
        return Err(format!("node range {lo}..={hi} must satisfy 1 <= lo <= hi <= 64"));
    }
    let t = cdm_evo::genome::random_tree(lo, hi, &mut ChaCha8Rng::seed_from_u64(seed));
    Ok(t.to_json())
}

fn offspring(trees: &[(GenomeTree, bool)]) -> String {
    let items: Vec<_> = trees
        .iter()
        .map(|(t, reverted)| json!({ "tree": t, "key": canonical_key(t), "reverted": reverted }))
        .collect();
    serde_json::Value::Array(items).to_string()
}

pub fn vary(operation: &str, tree: &str, other: &str, seed: u64) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = parse_tree(tree)?;
    let kind = match operation {
        "exchange" => VariationKind::Exchange,
        "delete" => VariationKind::Delete,
        "replace" => VariationKind::Replace,
        "insert" => VariationKind::Insert,
        _ => return Err(format!("unknown operation '{operation}'")),
    };
    if kind == VariationKind::Exchange {
        let q = parse_tree(other)?;
        let (a, b) = exchange(&p, &q, &mut rng);
        return Ok(offspring(&[(a.tree, a.reverted), (b.tree, b.reverted)]));
    }
    let v = cdm_evo::evolve::apply_single(kind, &p, &mut rng);
    Ok(offspring(&[(v.tree, v.reverted)]))
}

pub fn pareto(points: &str) -> Result<String, String> {
    let pts: Vec<(f64, f64)> = serde_json::from_str(points).map_err(|e| format!("points: {e}"))?;
    if pts.iter().any(|(a, b)| !a.is_finite() || !b.is_finite()) {
        return Err("points must be finite".into());
    }
    let ranks = fast_nondominated_sort(&pts);
    let mut crowding = vec![0.0; pts.len()];
    for r in 0..=ranks.iter().copied().max().unwrap_or(0) {
        let members: Vec<usize> = (0..pts.len()).filter(|&i| ranks[i] == r).collect();
        let front: Vec<(f64, f64)> = members.iter().map(|&i| pts[i]).collect();
        for (&i, d) in members.iter().zip(crowding_distance(&front)) {
            crowding[i] = d;
        }
    }
    // JSON has no infinity; boundary points report null.
    let crowding: Vec<Option<f64>> = crowding.into_iter().map(|d| d.is_finite().then_some(d)).collect();
    Ok(json!({ "rank": ranks, "crowding": crowding }).to_string())
}

pub fn seeds() -> String {
    let items: Vec<_> = BaselineModel::ALL
        .iter()
        .map(|&m| json!({ "name": m.name(), "key": canonical_key(&seed_tree(m)) }))
        .collect();
    serde_json::Value::Array(items).to_string()
}
