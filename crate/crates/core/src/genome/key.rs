//! Canonical prefix serialization used for duplicate detection.
//!
//! `Op(child,child)` with bare leaf names; children of Add and Mul are
//! sorted so that commuted trees share a key.

use crate::genome::{GenomeError, GenomeTree, LeafKind, Node, OperatorKind};

pub fn canonical_key(tree: &GenomeTree) -> String {
    node_key(tree.root())
}

pub fn node_key(node: &Node) -> String {
    match node {
        Node::Leaf { leaf } => leaf.name().to_string(),
        Node::Op { op, children } => {
            let mut keys: Vec<String> = children.iter().map(node_key).collect();
            if op.is_commutative() {
                keys.sort();
            }
            format!("{}({})", op.name(), keys.join(","))
        }
    }
}

/// Parses a key (or any prefix expression in the same syntax) into a tree.
pub fn parse_key(s: &str) -> Result<GenomeTree, GenomeError> {
    let mut p = Parser { src: s.as_bytes(), pos: 0 };
    let node = p.node()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.error("trailing input"));
    }
    GenomeTree::new(node)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, msg: &str) -> GenomeError {
        GenomeError::Parse {
            pos: self.pos,
            msg: msg.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn eat(&mut self, c: u8) -> bool {
        self.skip_ws();
        if self.src.get(self.pos) == Some(&c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn ident(&mut self) -> Result<&str, GenomeError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.error("expected a name"));
        }
        Ok(std::str::from_utf8(&self.src[start..self.pos]).expect("ascii"))
    }

    fn node(&mut self) -> Result<Node, GenomeError> {
        let name = self.ident()?.to_string();
        if !self.eat(b'(') {
            return name.parse::<LeafKind>().map(Node::leaf);
        }
        let op: OperatorKind = name.parse()?;
        let mut children = vec![self.node()?];
        while self.eat(b',') {
            children.push(self.node()?);
        }
        if !self.eat(b')') {
            return Err(self.error("expected ')'"));
        }
        if children.len() != op.arity() {
            return Err(GenomeError::Arity {
                op,
                got: children.len(),
            });
        }
        Ok(Node::Op { op, children })
    }
}
