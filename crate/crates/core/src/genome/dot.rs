use std::fmt::Write;

use crate::genome::{GenomeTree, Node};

const UNARY_FILL: &str = "#8fd18f";
const BINARY_FILL: &str = "#f5b041";

/// Graphviz rendering: leaves as triangles, unary operators as green
/// ellipses, binary operators as orange ellipses. Edges follow data flow
/// (child to parent).
pub fn to_dot(tree: &GenomeTree) -> String {
    let nodes = tree.root().preorder();
    let layout = tree.root().layout();
    let mut out = String::from("digraph cd_cell {\n  rankdir=BT;\n");
    for (id, node) in nodes.iter().enumerate() {
        match node {
            Node::Leaf { leaf } => {
                let _ = writeln!(out, "  n{id} [label=\"{}\", shape=triangle];", leaf.name());
            }
            Node::Op { op, .. } => {
                let fill = if op.is_binary() { BINARY_FILL } else { UNARY_FILL };
                let _ = writeln!(
                    out,
                    "  n{id} [label=\"{}\", shape=ellipse, style=filled, fillcolor=\"{fill}\"];",
                    op.name()
                );
            }
        }
    }
    for (id, info) in layout.iter().enumerate() {
        if let Some(parent) = info.parent {
            let _ = writeln!(out, "  n{id} -> n{parent};");
        }
    }
    out.push_str("}\n");
    out
}
