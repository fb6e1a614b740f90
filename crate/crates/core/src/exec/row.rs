use std::fmt;
use std::sync::Arc;

use crate::extraction::SemanticValue;
use crate::graph::{NodeId, RelId, Value};

/// Alternating nodes and relationships; `rels.len() + 1 == nodes.len()`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Path {
    pub nodes: Vec<NodeId>,
    pub rels: Vec<RelId>,
}

impl Path {
    pub fn single(n: NodeId) -> Self {
        Path { nodes: vec![n], rels: Vec::new() }
    }

    pub fn hops(&self) -> usize {
        self.rels.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Binding {
    Null,
    Node(NodeId),
    Rel(RelId),
    Path(Path),
    Value(Value),
    Semantic(SemanticValue),
}

impl Binding {
    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Binding::Value(Value::Boolean(b)) => Some(*b),
            _ => None,
        }
    }

    pub fn is_null(&self) -> bool {
        matches!(self, Binding::Null)
    }

    /// Hashable identity used as a join key.
    pub fn join_key(&self) -> String {
        match self {
            Binding::Node(n) => format!("n{}", n.0),
            Binding::Rel(r) => format!("r{}", r.0),
            other => format!("{other:?}"),
        }
    }
}

impl fmt::Display for Binding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Binding::Null => f.write_str("null"),
            Binding::Node(n) => write!(f, "node:{}", n.0),
            Binding::Rel(r) => write!(f, "rel:{}", r.0),
            Binding::Path(p) => {
                for (i, n) in p.nodes.iter().enumerate() {
                    if i > 0 {
                        write!(f, "-[{}]-", p.rels[i - 1].0)?;
                    }
                    write!(f, "({})", n.0)?;
                }
                Ok(())
            }
            Binding::Value(v) => write!(f, "{v}"),
            Binding::Semantic(s) => write!(f, "{s}"),
        }
    }
}

/// Variable bindings in insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Row {
    cols: Vec<(Arc<str>, Binding)>,
}

impl Row {
    pub fn new() -> Self {
        Row::default()
    }

    pub fn get(&self, var: &str) -> Option<&Binding> {
        self.cols.iter().find(|(k, _)| &**k == var).map(|(_, b)| b)
    }

    pub fn contains(&self, var: &str) -> bool {
        self.get(var).is_some()
    }

    /// Binds `var`, replacing an earlier binding.
    pub fn set(&mut self, var: Arc<str>, b: Binding) {
        match self.cols.iter_mut().find(|(k, _)| *k == var) {
            Some(slot) => slot.1 = b,
            None => self.cols.push((var, b)),
        }
    }

    pub fn with(mut self, var: Arc<str>, b: Binding) -> Self {
        self.set(var, b);
        self
    }

    /// Adds the bindings of `other` that `self` lacks.
    pub fn merge(&mut self, other: &Row) {
        for (k, v) in &other.cols {
            if !self.contains(k) {
                self.cols.push((k.clone(), v.clone()));
            }
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Binding)> {
        self.cols.iter().map(|(k, v)| (&**k, v))
    }

    pub fn len(&self) -> usize {
        self.cols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cols.is_empty()
    }
}
