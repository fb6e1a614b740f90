use std::collections::BTreeMap;

use crate::graph::{Direction, GraphStats, GraphStore};
use crate::query::{CmpOp, Expr, Predicate};

use super::plan::LogicalOp;
use super::speed::SpeedRegistry;

/// Selectivities and per-row costs used for estimation.
#[derive(Debug, Clone, PartialEq)]
pub struct CostModel {
    pub structured_selectivity: f64,
    pub unstructured_selectivity: f64,
    pub join_selectivity: f64,
    /// Speed assumed for unstructured filters that never ran.
    pub default_v: f64,
    pub indexed_filter_row: f64,
    pub filter_row: f64,
    pub scan_row: f64,
    pub expand_in_row: f64,
    pub expand_out_row: f64,
    pub join_row: f64,
    pub shortest_path_row: f64,
    pub projection_row: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel {
            structured_selectivity: 0.1,
            unstructured_selectivity: 0.05,
            join_selectivity: 0.1,
            default_v: 0.1,
            indexed_filter_row: 1e-6,
            filter_row: 1e-5,
            scan_row: 1e-6,
            expand_in_row: 1e-6,
            expand_out_row: 1e-5,
            join_row: 1e-6,
            shortest_path_row: 1e-5,
            projection_row: 1e-7,
        }
    }
}

/// Snapshot of everything estimation reads.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PlanContext {
    pub stats: GraphStats,
    pub indexes: Vec<(Option<String>, String)>,
    /// Measured seconds per row by filter id.
    pub speeds: BTreeMap<String, f64>,
}

impl PlanContext {
    pub fn capture(g: &GraphStore, speeds: &SpeedRegistry) -> Self {
        PlanContext { stats: g.stats(), indexes: g.index_definitions(), speeds: speeds.snapshot() }
    }

    pub fn has_index(&self, label: Option<&str>, key: &str) -> bool {
        self.indexes.iter().any(|(l, k)| l.as_deref() == label && k == key)
    }

    /// Whether an index on `var`'s labels (or on all nodes) answers `pred`.
    pub fn index_for(&self, pred: &Predicate, labels: &[String]) -> bool {
        let Some((var, key)) = indexable(&pred.expr) else { return false };
        pred.vars.len() == 1
            && pred.vars.contains(var)
            && (self.has_index(None, key) || labels.iter().any(|l| self.has_index(Some(l), key)))
    }

    fn label_fraction(&self, labels: &[String]) -> f64 {
        let n = self.stats.node_count as f64;
        if labels.is_empty() {
            return 1.0;
        }
        if n == 0.0 {
            return 0.0;
        }
        labels.iter().map(|l| self.stats.label_count(l) as f64 / n).fold(1.0, f64::min)
    }
}

/// `var.key <op> constant` with an ordered operator, in either operand order.
pub fn indexable(e: &Expr) -> Option<(&str, &str)> {
    let Expr::Cmp(op, a, b) = e else { return None };
    if !matches!(op, CmpOp::Eq | CmpOp::Lt | CmpOp::Gt | CmpOp::Le | CmpOp::Ge) {
        return None;
    }
    fn prop(x: &Expr) -> Option<(&str, &str)> {
        match x {
            Expr::Prop(v, k) => match v.as_ref() {
                Expr::Var(v) => Some((v.as_str(), k.as_str())),
                _ => None,
            },
            _ => None,
        }
    }
    let constant = |x: &Expr| matches!(x, Expr::Lit(_) | Expr::Param(_));
    match (prop(a), prop(b)) {
        (Some(p), None) if constant(b) => Some(p),
        (None, Some(p)) if constant(a) => Some(p),
        _ => None,
    }
}

impl CostModel {
    /// Output rows of `op` given its input cardinalities.
    pub fn estimate_cardinality(&self, op: &LogicalOp, inputs: &[f64], ctx: &PlanContext) -> f64 {
        let n = ctx.stats.node_count as f64;
        let input = inputs.first().copied().unwrap_or(0.0);
        match op {
            LogicalOp::SingleRow => 1.0,
            LogicalOp::AllNodeScan { .. } => n,
            LogicalOp::NodeByLabelScan { label, extra, .. } => {
                // labels treated as independent
                let base = ctx.stats.label_count(label) as f64;
                extra.iter().map(|l| ctx.label_fraction(std::slice::from_ref(l))).fold(base, |c, f| c * f)
            }
            LogicalOp::Filter { pred, .. } => {
                input
                    * if pred.unstructured { self.unstructured_selectivity } else { self.structured_selectivity }
            }
            LogicalOp::Expand { edge, dir, into, to_labels, .. } => {
                let fan = ctx.stats.fan_out(edge.rel_type.as_deref(), *dir);
                if *into {
                    input * (fan / n.max(1.0)).min(1.0)
                } else {
                    input * fan * ctx.label_fraction(to_labels)
                }
            }
            LogicalOp::Join { on } => {
                let product: f64 = inputs.iter().product();
                if on.is_empty() {
                    product
                } else {
                    product * self.join_selectivity
                }
            }
            LogicalOp::ShortestPath { .. } => input,
            LogicalOp::Projection { limit, .. } => match limit {
                Some(l) => input.min(*l as f64),
                None => input,
            },
        }
    }

    /// Seconds for `op` alone.
    pub fn op_cost(&self, op: &LogicalOp, inputs: &[f64], out: f64, ctx: &PlanContext) -> f64 {
        let input = inputs.first().copied().unwrap_or(0.0);
        match op {
            LogicalOp::SingleRow => 0.0,
            LogicalOp::AllNodeScan { .. } | LogicalOp::NodeByLabelScan { .. } => self.scan_row * out,
            LogicalOp::Filter { pred, indexed } => {
                if pred.unstructured {
                    self.unstructured_v(pred, ctx) * input
                } else if *indexed {
                    self.indexed_filter_row * input
                } else {
                    self.filter_row * input
                }
            }
            LogicalOp::Expand { .. } => self.expand_in_row * input + self.expand_out_row * out,
            LogicalOp::Join { .. } => self.join_row * (inputs.iter().sum::<f64>() + out),
            LogicalOp::ShortestPath { .. } => self.shortest_path_row * input,
            LogicalOp::Projection { preds, .. } => {
                let per_row: f64 = preds.iter().map(|p| self.unstructured_v(p, ctx)).sum();
                (self.projection_row + per_row) * input
            }
        }
    }

    /// Expected seconds per row of an unstructured predicate.
    pub fn unstructured_v(&self, pred: &Predicate, ctx: &PlanContext) -> f64 {
        pred.filter_id.as_ref().and_then(|id| ctx.speeds.get(id)).copied().unwrap_or(self.default_v)
    }
}

/// `Both` fan-out counts each relationship from either end.
pub fn relative_direction(edge_dir: Direction, from_is_source: bool) -> Direction {
    match (edge_dir, from_is_source) {
        (Direction::Both, _) => Direction::Both,
        (d, true) => d,
        (d, false) => d.reverse(),
    }
}
