use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::sync::Arc;

use crate::graph::Direction;
use crate::query::{Predicate, QEdge, ReturnItem, ShortestPathPat};

#[derive(Debug, Clone, PartialEq)]
pub enum LogicalOp {
    /// One empty row; the input of queries without MATCH.
    SingleRow,
    AllNodeScan { var: String },
    /// Scans `label`; nodes must also carry every label in `extra`.
    NodeByLabelScan { var: String, label: String, extra: Vec<String> },
    /// Structured when `pred.unstructured` is false. `indexed` marks a
    /// predicate a property index can answer.
    Filter { pred: Predicate, indexed: bool },
    /// Follows `edge` from the bound `from` to `to`. With `into`, `to` is
    /// already bound and the step only checks adjacency.
    Expand { from: String, to: String, edge: QEdge, edge_id: usize, dir: Direction, into: bool, to_labels: Vec<String> },
    /// Natural join on `on`; empty `on` is a cartesian product.
    Join { on: Vec<String> },
    ShortestPath { pat: ShortestPathPat, out: String },
    Projection { items: Vec<ReturnItem>, limit: Option<u64>, preds: Vec<Predicate> },
}

impl LogicalOp {
    pub fn name(&self) -> &'static str {
        match self {
            LogicalOp::SingleRow => "SingleRow",
            LogicalOp::AllNodeScan { .. } => "AllNodeScan",
            LogicalOp::NodeByLabelScan { .. } => "NodeByLabelScan",
            LogicalOp::Filter { pred, .. } if pred.unstructured => "UnstructuredFilter",
            LogicalOp::Filter { .. } => "Filter",
            LogicalOp::Expand { into: true, .. } => "ExpandInto",
            LogicalOp::Expand { .. } => "Expand",
            LogicalOp::Join { on } if on.is_empty() => "CartesianProduct",
            LogicalOp::Join { .. } => "Join",
            LogicalOp::ShortestPath { .. } => "ShortestPath",
            LogicalOp::Projection { .. } => "Projection",
        }
    }

    /// One-line description without estimates.
    pub fn describe(&self) -> String {
        match self {
            LogicalOp::SingleRow => "SingleRow".into(),
            LogicalOp::AllNodeScan { var } => format!("AllNodeScan({var})"),
            LogicalOp::NodeByLabelScan { var, label, extra } => {
                let mut s = format!("NodeByLabelScan({var}:{label}");
                for l in extra {
                    let _ = write!(s, ":{l}");
                }
                s + ")"
            }
            LogicalOp::Filter { pred, indexed } => {
                let mut s = String::from(self.name());
                if let Some(id) = &pred.filter_id {
                    let _ = write!(s, "[{id}]");
                }
                let _ = write!(s, " {}", pred.expr);
                if *indexed {
                    s.push_str(" (index)");
                }
                s
            }
            LogicalOp::Expand { from, to, edge, dir, to_labels, .. } => {
                let (l, r) = match dir {
                    Direction::Out => ("-", "->"),
                    Direction::In => ("<-", "-"),
                    Direction::Both => ("-", "-"),
                };
                let mut s = format!("{}({from}){l}[{}", self.name(), edge.var);
                if let Some(t) = &edge.rel_type {
                    let _ = write!(s, ":{t}");
                }
                let _ = write!(s, "]{r}({to}");
                for lb in to_labels {
                    let _ = write!(s, ":{lb}");
                }
                s + ")"
            }
            LogicalOp::Join { on } if on.is_empty() => "CartesianProduct".into(),
            LogicalOp::Join { on } => format!("Join(on {})", on.join(", ")),
            LogicalOp::ShortestPath { pat, out } => {
                let t = pat.rel_type.as_deref().map(|t| format!(":{t}")).unwrap_or_default();
                format!("ShortestPath({})-[{t}*{}..{}]-({}) as {out}", pat.from, pat.min_hops, pat.max_hops, pat.to)
            }
            LogicalOp::Projection { items, limit, .. } => {
                let cols: Vec<String> = items
                    .iter()
                    .map(|i| match &i.alias {
                        Some(a) => format!("{} AS {a}", i.expr),
                        None => i.expr.to_string(),
                    })
                    .collect();
                let mut s = format!("Projection({})", cols.join(", "));
                if let Some(l) = limit {
                    let _ = write!(s, " LIMIT {l}");
                }
                s
            }
        }
    }
}

/// A logical plan node with its estimates and the part of the query graph it
/// covers. Children are shared between candidate plans.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanNode {
    pub op: LogicalOp,
    pub inputs: Vec<Arc<PlanNode>>,
    /// Estimated seconds for the whole subtree.
    pub cost: f64,
    /// Estimated output rows.
    pub card: f64,
    /// Q-node indexes bound by this subtree.
    pub covered: BTreeSet<usize>,
    /// Node, relationship and path variables bound by this subtree.
    pub bound: BTreeSet<String>,
    /// Ids of predicates applied in this subtree.
    pub applied: BTreeSet<usize>,
    /// Ids of q-edges realized in this subtree.
    pub edges: BTreeSet<usize>,
}

impl PlanNode {
    /// Own cost, excluding inputs.
    pub fn op_cost(&self) -> f64 {
        self.cost - self.inputs.iter().map(|c| c.cost).sum::<f64>()
    }

    /// Structural identity: the operator tree without estimates.
    pub fn fingerprint(&self) -> String {
        let mut s = self.op.describe();
        if !self.inputs.is_empty() {
            s.push('[');
            for (i, c) in self.inputs.iter().enumerate() {
                if i > 0 {
                    s.push_str(" | ");
                }
                s.push_str(&c.fingerprint());
            }
            s.push(']');
        }
        s
    }

    /// Indented operator tree, root first, with cumulative cost and rows.
    pub fn explain(&self) -> String {
        let mut out = String::new();
        self.explain_into(&mut out, 0);
        out
    }

    fn explain_into(&self, out: &mut String, depth: usize) {
        let _ = writeln!(
            out,
            "{}{} (cost={}, rows={})",
            "  ".repeat(depth),
            self.op.describe(),
            fmt_num(self.cost),
            fmt_num(self.card)
        );
        for c in &self.inputs {
            c.explain_into(out, depth + 1);
        }
    }

    /// Operators in post-order.
    pub fn walk(&self) -> Vec<&PlanNode> {
        let mut out = Vec::new();
        fn go<'a>(n: &'a PlanNode, out: &mut Vec<&'a PlanNode>) {
            for c in &n.inputs {
                go(c, out);
            }
            out.push(n);
        }
        go(self, &mut out);
        out
    }

    pub fn op_count(&self) -> usize {
        self.walk().len()
    }
}

fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        "0".into()
    } else if x.abs() >= 0.01 && x.abs() < 1e7 {
        let s = format!("{x:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{x:.3e}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_formatting() {
        assert_eq!(fmt_num(0.0), "0");
        assert_eq!(fmt_num(4.0), "4");
        assert_eq!(fmt_num(0.125), "0.125");
        assert_eq!(fmt_num(1.1e-5), "1.100e-5");
    }
}
