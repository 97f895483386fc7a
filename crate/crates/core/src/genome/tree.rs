use serde::{Deserialize, Serialize};

use crate::genome::{GenomeError, LeafKind, OperatorKind};

/// Maximum number of computation nodes on any root-to-leaf path.
pub const MAX_DEPTH: usize = 9;

/// A node of an expression tree.
///
/// Node ids are preorder positions: the root is 0, and a node's first child
/// immediately follows it.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Node {
    Leaf { leaf: LeafKind },
    Op { op: OperatorKind, children: Vec<Node> },
}

impl Node {
    pub fn leaf(kind: LeafKind) -> Node {
        Node::Leaf { leaf: kind }
    }

    pub fn unary(op: OperatorKind, child: Node) -> Node {
        debug_assert_eq!(op.arity(), 1);
        Node::Op {
            op,
            children: vec![child],
        }
    }

    pub fn binary(op: OperatorKind, left: Node, right: Node) -> Node {
        debug_assert_eq!(op.arity(), 2);
        Node::Op {
            op,
            children: vec![left, right],
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, Node::Leaf { .. })
    }

    pub fn op(&self) -> Option<OperatorKind> {
        match self {
            Node::Op { op, .. } => Some(*op),
            Node::Leaf { .. } => None,
        }
    }

    pub fn children(&self) -> &[Node] {
        match self {
            Node::Op { children, .. } => children,
            Node::Leaf { .. } => &[],
        }
    }

    /// Total node count (computation nodes and leaves).
    pub fn size(&self) -> usize {
        1 + self.children().iter().map(Node::size).sum::<usize>()
    }

    pub fn computation_count(&self) -> usize {
        match self {
            Node::Leaf { .. } => 0,
            Node::Op { children, .. } => {
                1 + children.iter().map(Node::computation_count).sum::<usize>()
            }
        }
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            Node::Leaf { .. } => 1,
            Node::Op { children, .. } => children.iter().map(Node::leaf_count).sum(),
        }
    }

    /// Computation-node levels on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        match self {
            Node::Leaf { .. } => 0,
            Node::Op { children, .. } => {
                1 + children.iter().map(Node::depth).max().unwrap_or(0)
            }
        }
    }

    /// Nodes in preorder; the index of each entry is its node id.
    pub fn preorder(&self) -> Vec<&Node> {
        let mut out = Vec::with_capacity(self.size());
        fn walk<'a>(n: &'a Node, out: &mut Vec<&'a Node>) {
            out.push(n);
            for c in n.children() {
                walk(c, out);
            }
        }
        walk(self, &mut out);
        out
    }

    /// Parent id, position among siblings, and computation-node depth for
    /// every node in preorder.
    pub fn layout(&self) -> Vec<NodeInfo> {
        let mut out = Vec::with_capacity(self.size());
        fn walk(n: &Node, parent: Option<(usize, usize)>, above: usize, out: &mut Vec<NodeInfo>) {
            let id = out.len();
            let level = if n.is_leaf() { above } else { above + 1 };
            out.push(NodeInfo {
                parent: parent.map(|p| p.0),
                slot: parent.map(|p| p.1).unwrap_or(0),
                level,
                is_leaf: n.is_leaf(),
            });
            for (i, c) in n.children().iter().enumerate() {
                walk(c, Some((id, i)), level, out);
            }
        }
        walk(self, None, 0, &mut out);
        out
    }

    pub fn get(&self, id: usize) -> Option<&Node> {
        fn find<'a>(n: &'a Node, id: usize, next: &mut usize) -> Option<&'a Node> {
            if *next == id {
                return Some(n);
            }
            *next += 1;
            for c in n.children() {
                if let Some(found) = find(c, id, next) {
                    return Some(found);
                }
            }
            None
        }
        find(self, id, &mut 0)
    }

    pub fn get_mut(&mut self, id: usize) -> Option<&mut Node> {
        fn find<'a>(n: &'a mut Node, id: usize, next: &mut usize) -> Option<&'a mut Node> {
            if *next == id {
                return Some(n);
            }
            *next += 1;
            match n {
                Node::Leaf { .. } => None,
                Node::Op { children, .. } => {
                    for c in children.iter_mut() {
                        if let Some(found) = find(c, id, next) {
                            return Some(found);
                        }
                    }
                    None
                }
            }
        }
        find(self, id, &mut 0)
    }

    /// Replaces the subtree at `id`, returning the old one.
    pub fn replace(&mut self, id: usize, with: Node) -> Option<Node> {
        self.get_mut(id).map(|slot| std::mem::replace(slot, with))
    }

    fn check_arity(&self) -> Result<(), GenomeError> {
        if let Node::Op { op, children } = self {
            if children.len() != op.arity() {
                return Err(GenomeError::Arity {
                    op: *op,
                    got: children.len(),
                });
            }
            for c in children {
                c.check_arity()?;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NodeInfo {
    pub parent: Option<usize>,
    /// Child position under the parent (0 for the root).
    pub slot: usize,
    /// Computation nodes from the root down to and including this node.
    pub level: usize,
    pub is_leaf: bool,
}

/// Depth, breadth and computation-node count of a tree.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TreeMetrics {
    pub depth: usize,
    pub breadth: usize,
    pub num_c: usize,
}

/// Interpretability objective: depth dominates, then breadth, then size.
pub fn interpretability(m: &TreeMetrics) -> Result<f64, GenomeError> {
    if m.depth > MAX_DEPTH {
        return Err(GenomeError::DepthExceeded(m.depth));
    }
    let depth = m.depth as f64;
    let breadth = m.breadth as f64;
    let num_c = m.num_c as f64;
    Ok((1.0 - (depth - 1.0) / 10.0) + breadth / 200.0 + (0.001 - num_c / 20000.0))
}

/// A single-root expression tree whose root is a computation node.
///
/// Construction checks arity, the computation root, and the depth cap.
/// Shape feasibility is a separate concern (see [`infer_shapes`]).
///
/// [`infer_shapes`]: crate::genome::infer_shapes
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Node", into = "Node")]
pub struct GenomeTree {
    root: Node,
}

impl GenomeTree {
    pub fn new(root: Node) -> Result<Self, GenomeError> {
        if root.is_leaf() {
            return Err(GenomeError::LeafRoot);
        }
        root.check_arity()?;
        let depth = root.depth();
        if depth > MAX_DEPTH {
            return Err(GenomeError::DepthExceeded(depth));
        }
        Ok(GenomeTree { root })
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn into_root(self) -> Node {
        self.root
    }

    pub fn root_op(&self) -> OperatorKind {
        self.root.op().expect("root is a computation node")
    }

    pub fn metrics(&self) -> TreeMetrics {
        TreeMetrics {
            depth: self.root.depth(),
            breadth: self.root.leaf_count(),
            num_c: self.root.computation_count(),
        }
    }

    pub fn num_c(&self) -> usize {
        self.root.computation_count()
    }

    /// The interpretability objective; never fails for a constructed tree.
    pub fn interpretability(&self) -> f64 {
        interpretability(&self.metrics()).expect("depth cap holds by construction")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("tree serialization cannot fail")
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("tree serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Self, GenomeError> {
        serde_json::from_str(s).map_err(|e| GenomeError::Json(e.to_string()))
    }
}

impl TryFrom<Node> for GenomeTree {
    type Error = GenomeError;

    fn try_from(root: Node) -> Result<Self, Self::Error> {
        GenomeTree::new(root)
    }
}

impl From<GenomeTree> for Node {
    fn from(t: GenomeTree) -> Node {
        t.root
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use LeafKind::*;
    use OperatorKind::*;

    fn l(k: LeafKind) -> Node {
        Node::leaf(k)
    }

    #[test]
    fn chain_metrics() {
        let t = GenomeTree::new(Node::unary(
            Tanh,
            Node::unary(Abs, Node::unary(Neg, l(Student))),
        ))
        .unwrap();
        assert_eq!(
            t.metrics(),
            TreeMetrics {
                depth: 3,
                breadth: 1,
                num_c: 3
            }
        );
    }

    #[test]
    fn two_level_binary_metrics() {
        let t = GenomeTree::new(Node::binary(
            Add,
            Node::unary(Neg, l(Student)),
            Node::unary(Abs, l(Exercise)),
        ))
        .unwrap();
        assert_eq!(
            t.metrics(),
            TreeMetrics {
                depth: 2,
                breadth: 2,
                num_c: 3
            }
        );
    }

    #[test]
    fn minimal_tree_metrics() {
        let t = GenomeTree::new(Node::unary(Sigmoid, l(Student))).unwrap();
        assert_eq!(
            t.metrics(),
            TreeMetrics {
                depth: 1,
                breadth: 1,
                num_c: 1
            }
        );
    }

    #[test]
    fn worked_interpretability_values() {
        let cases = [
            ((3, 1, 3), 0.80585),
            ((2, 2, 3), 0.91085),
            ((3, 3, 4), 0.81580),
            ((3, 4, 4), 0.82080),
            ((3, 4, 5), 0.82075),
        ];
        for ((depth, breadth, num_c), want) in cases {
            let got = interpretability(&TreeMetrics {
                depth,
                breadth,
                num_c,
            })
            .unwrap();
            assert!((got - want).abs() <= 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn depth_cap_is_enforced() {
        let m = TreeMetrics {
            depth: 10,
            breadth: 1,
            num_c: 10,
        };
        assert!(matches!(
            interpretability(&m),
            Err(GenomeError::DepthExceeded(10))
        ));
        let mut n = l(Student);
        for _ in 0..10 {
            n = Node::unary(Neg, n);
        }
        assert!(matches!(GenomeTree::new(n), Err(GenomeError::DepthExceeded(10))));
    }

    #[test]
    fn structural_errors() {
        assert!(matches!(GenomeTree::new(l(Student)), Err(GenomeError::LeafRoot)));
        let bad = Node::Op {
            op: Add,
            children: vec![l(Student)],
        };
        assert!(matches!(GenomeTree::new(bad), Err(GenomeError::Arity { .. })));
    }

    #[test]
    fn json_format() {
        let t = GenomeTree::new(Node::unary(Sum, Node::binary(Mul, l(Student), l(Exercise)))).unwrap();
        assert_eq!(
            t.to_json(),
            r#"{"op":"Sum","children":[{"op":"Mul","children":[{"leaf":"H_S"},{"leaf":"H_E"}]}]}"#
        );
        assert_eq!(GenomeTree::from_json(&t.to_json()).unwrap(), t);
        assert!(GenomeTree::from_json(r#"{"leaf":"H_S"}"#).is_err());
        assert!(GenomeTree::from_json(r#"{"op":"Add","children":[{"leaf":"H_S"}]}"#).is_err());
        assert!(GenomeTree::from_json(r#"{"op":"Relu","children":[{"leaf":"H_S"}]}"#).is_err());
    }

    #[test]
    fn preorder_ids_and_layout() {
        let root = Node::binary(Add, Node::unary(Ffn, l(Student)), l(Exercise));
        let ids = root.preorder();
        assert_eq!(ids.len(), 4);
        assert_eq!(ids[1].op(), Some(Ffn));
        assert_eq!(root.get(3), Some(&l(Exercise)));
        let info = root.layout();
        assert_eq!(info[2].parent, Some(1));
        assert_eq!(info[3].parent, Some(0));
        assert_eq!(info[3].slot, 1);
        assert_eq!(info[2].level, 2);
        assert_eq!(info[3].level, 1);
        let mut r2 = root.clone();
        let old = r2.replace(3, l(Concept)).unwrap();
        assert_eq!(old, l(Exercise));
        assert_eq!(r2.get(3), Some(&l(Concept)));
    }
}
