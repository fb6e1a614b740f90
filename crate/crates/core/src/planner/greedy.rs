use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use crate::query::{Expr, PredRole, Predicate, QueryGraph, ReturnItem};

use super::cost::{relative_direction, CostModel, PlanContext};
use super::plan::{LogicalOp, PlanNode};
use super::PlanError;

/// One greedy iteration, for tracing.
#[derive(Debug, Clone)]
pub struct Step {
    pub candidates: Vec<(String, f64)>,
    pub best: String,
    pub table: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Optimized {
    pub plan: Arc<PlanNode>,
    pub iterations: usize,
    pub steps: Vec<Step>,
}

/// Plan construction over one query graph.
pub struct Optimizer<'a> {
    pub qg: &'a QueryGraph,
    pub ctx: &'a PlanContext,
    pub model: &'a CostModel,
    component: Vec<usize>,
}

impl<'a> Optimizer<'a> {
    pub fn new(qg: &'a QueryGraph, ctx: &'a PlanContext, model: &'a CostModel) -> Self {
        let mut component = vec![0; qg.nodes.len()];
        for (c, members) in qg.components().into_iter().enumerate() {
            for m in members {
                component[m] = c;
            }
        }
        Optimizer { qg, ctx, model, component }
    }

    fn node(&self, op: LogicalOp, inputs: Vec<Arc<PlanNode>>) -> Arc<PlanNode> {
        let in_cards: Vec<f64> = inputs.iter().map(|c| c.card).collect();
        let card = self.model.estimate_cardinality(&op, &in_cards, self.ctx);
        let own = self.model.op_cost(&op, &in_cards, card, self.ctx);
        let mut covered = BTreeSet::new();
        let mut bound = BTreeSet::new();
        let mut applied = BTreeSet::new();
        let mut edges = BTreeSet::new();
        let mut cost = own;
        for c in &inputs {
            covered.extend(c.covered.iter().copied());
            bound.extend(c.bound.iter().cloned());
            applied.extend(c.applied.iter().copied());
            edges.extend(c.edges.iter().copied());
            cost += c.cost;
        }
        match &op {
            LogicalOp::AllNodeScan { var } | LogicalOp::NodeByLabelScan { var, .. } => {
                covered.insert(self.qg.node_index(var).expect("scan of a q-node"));
                bound.insert(var.clone());
            }
            LogicalOp::Filter { pred, .. } => {
                applied.insert(pred.id);
            }
            LogicalOp::Expand { to, edge, edge_id, .. } => {
                covered.insert(self.qg.node_index(to).expect("expand to a q-node"));
                bound.insert(to.clone());
                bound.insert(edge.var.clone());
                edges.insert(*edge_id);
            }
            LogicalOp::ShortestPath { out, .. } => {
                bound.insert(out.clone());
            }
            _ => {}
        }
        for p in &self.qg.paths {
            if p.nodes.iter().chain(&p.rels).all(|v| bound.contains(v)) {
                bound.insert(p.var.clone());
            }
        }
        Arc::new(PlanNode { op, inputs, cost, card, covered, bound, applied, edges })
    }

    /// Cheapest access path for one q-node.
    pub fn leaf(&self, idx: usize) -> Arc<PlanNode> {
        let q = &self.qg.nodes[idx];
        let op = if q.labels.is_empty() {
            LogicalOp::AllNodeScan { var: q.var.clone() }
        } else {
            let mut labels = q.labels.clone();
            labels.sort_by_key(|l| (self.ctx.stats.label_count(l), l.clone()));
            let label = labels.remove(0);
            LogicalOp::NodeByLabelScan { var: q.var.clone(), label, extra: labels }
        };
        self.node(op, vec![])
    }

    /// Initial PlanTable: one leaf per q-node, or a single row when there are none.
    pub fn leaf_table(&self) -> Vec<Arc<PlanNode>> {
        if self.qg.nodes.is_empty() {
            return vec![self.node(LogicalOp::SingleRow, vec![])];
        }
        (0..self.qg.nodes.len()).map(|i| self.leaf(i)).collect()
    }

    pub fn filter(&self, input: Arc<PlanNode>, pred: &Predicate) -> Arc<PlanNode> {
        let indexed = !pred.unstructured && {
            let labels = pred.vars.iter().next().and_then(|v| self.qg.node(v)).map(|q| q.labels.as_slice());
            labels.is_some_and(|l| self.ctx.index_for(pred, l))
        };
        self.node(LogicalOp::Filter { pred: pred.clone(), indexed }, vec![input])
    }

    pub fn expand(&self, input: Arc<PlanNode>, edge_id: usize, from_source: bool) -> Arc<PlanNode> {
        let edge = &self.qg.edges[edge_id];
        let (from, to) = if from_source { (&edge.from, &edge.to) } else { (&edge.to, &edge.from) };
        let into = input.bound.contains(to);
        let to_labels = if into { Vec::new() } else { self.qg.node(to).map(|q| q.labels.clone()).unwrap_or_default() };
        let op = LogicalOp::Expand {
            from: from.clone(),
            to: to.clone(),
            edge: edge.clone(),
            edge_id,
            dir: relative_direction(edge.direction, from_source),
            into,
            to_labels,
        };
        self.node(op, vec![input])
    }

    pub fn join(&self, a: Arc<PlanNode>, b: Arc<PlanNode>) -> Arc<PlanNode> {
        let on: Vec<String> = a.bound.intersection(&b.bound).cloned().collect();
        self.node(LogicalOp::Join { on }, vec![a, b])
    }

    /// Applies every pending structured filter whose variables are bound.
    pub fn apply_selections(&self, mut plan: Arc<PlanNode>) -> Arc<PlanNode> {
        for p in self.qg.filters() {
            if !p.unstructured && !plan.applied.contains(&p.id) && p.vars.is_subset(&plan.bound) {
                plan = self.filter(plan, p);
            }
        }
        plan
    }

    fn can_cross(&self, a: &PlanNode, b: &PlanNode) -> bool {
        let comps = |p: &PlanNode| p.covered.iter().map(|&i| self.component[i]).collect::<BTreeSet<_>>();
        comps(a).is_disjoint(&comps(b))
    }

    /// Every plan reachable from `table` in one step: pairwise joins,
    /// single-edge expansions (optionally joined with the plan already
    /// holding the far endpoint) and pending filters.
    pub fn candidates(&self, table: &[Arc<PlanNode>]) -> Vec<Arc<PlanNode>> {
        let mut out = Vec::new();
        for (i, p) in table.iter().enumerate() {
            for q in &table[i + 1..] {
                if !p.bound.is_disjoint(&q.bound) || self.can_cross(p, q) {
                    out.push(self.join(p.clone(), q.clone()));
                }
            }
        }
        for p in table {
            for (eid, e) in self.qg.edges.iter().enumerate() {
                if p.edges.contains(&eid) {
                    continue;
                }
                let (fb, tb) = (p.bound.contains(&e.from), p.bound.contains(&e.to));
                let starts: &[bool] = match (fb, tb) {
                    (true, true) => &[true],
                    (true, false) => &[true],
                    (false, true) => &[false],
                    (false, false) => &[],
                };
                for &from_source in starts {
                    let ex = self.expand(p.clone(), eid, from_source);
                    // an expansion into a variable another partial plan already
                    // holds must join it, or the step would not shrink the table
                    let mut bare = true;
                    if !(fb && tb) {
                        let far = if from_source { &e.to } else { &e.from };
                        for q in table {
                            if !Arc::ptr_eq(p, q) && q.bound.contains(far) {
                                bare &= q.covered.is_subset(&ex.covered);
                                out.push(self.join(ex.clone(), q.clone()));
                            }
                        }
                    }
                    if bare {
                        out.push(ex);
                    }
                }
            }
            for pred in self.qg.filters() {
                if !p.applied.contains(&pred.id) && pred.vars.is_subset(&p.bound) {
                    out.push(self.filter(p.clone(), pred));
                }
            }
        }
        out
    }

    /// argmin cost; ties by fewer covered q-nodes, then fingerprint.
    pub fn pick_best(cands: &[Arc<PlanNode>]) -> Option<Arc<PlanNode>> {
        cands
            .iter()
            .map(|c| (c, c.fingerprint()))
            .min_by(|(a, fa), (b, fb)| {
                a.cost
                    .partial_cmp(&b.cost)
                    .unwrap_or(Ordering::Equal)
                    .then(a.covered.len().cmp(&b.covered.len()))
                    .then_with(|| fa.cmp(fb))
            })
            .map(|(c, _)| c.clone())
    }

    /// Replaces every entry covered by `best` with `applySelections(best)`.
    pub fn commit(&self, table: &mut Vec<Arc<PlanNode>>, best: Arc<PlanNode>) {
        table.retain(|t| !t.covered.is_subset(&best.covered));
        table.push(self.apply_selections(best));
    }

    /// Greedy PlanTable optimization.
    pub fn optimize(&self) -> Result<Optimized, PlanError> {
        let mut table = self.leaf_table();
        let mut steps = Vec::new();
        loop {
            let cands = self.candidates(&table);
            let Some(best) = Self::pick_best(&cands) else { break };
            let step = Step {
                candidates: cands.iter().map(|c| (c.fingerprint(), c.cost)).collect(),
                best: best.fingerprint(),
                table: Vec::new(),
            };
            self.commit(&mut table, best);
            steps.push(Step { table: table.iter().map(|t| t.fingerprint()).collect(), ..step });
        }
        let iterations = steps.len();
        let plan = self.finish(table)?;
        Ok(Optimized { plan, iterations, steps })
    }

    /// Checks the table holds one complete plan and adds shortest paths and
    /// the projection on top.
    pub fn finish(&self, table: Vec<Arc<PlanNode>>) -> Result<Arc<PlanNode>, PlanError> {
        let [plan] = <[_; 1]>::try_from(table).map_err(|t: Vec<_>| {
            PlanError::Unsatisfiable(format!("{} disconnected partial plans remain", t.len()))
        })?;
        let missing_edges = self.qg.edges.len() - plan.edges.len();
        let missing_preds = self.qg.filters().filter(|p| !plan.applied.contains(&p.id)).count();
        if plan.covered.len() != self.qg.nodes.len() || missing_edges > 0 || missing_preds > 0 {
            return Err(PlanError::Unsatisfiable(format!(
                "plan misses {} q-nodes, {missing_edges} edges, {missing_preds} predicates",
                self.qg.nodes.len() - plan.covered.len()
            )));
        }
        Ok(self.project(plan))
    }

    /// Shortest paths and projection over a complete plan.
    pub fn project(&self, mut plan: Arc<PlanNode>) -> Arc<PlanNode> {
        let mut items = Vec::with_capacity(self.qg.returns.len());
        let mut n = 0;
        for r in &self.qg.returns {
            let mut expr = r.expr.clone();
            let mut sps = Vec::new();
            rewrite_shortest_paths(&mut expr, &mut n, &mut sps);
            for (pat, out) in sps {
                plan = self.node(LogicalOp::ShortestPath { pat, out }, vec![plan]);
            }
            let alias = r.alias.clone().or_else(|| (expr != r.expr).then(|| r.expr.to_string()));
            items.push(ReturnItem { expr, alias });
        }
        let preds: Vec<Predicate> =
            self.qg.predicates.iter().filter(|p| p.role == PredRole::Projection).cloned().collect();
        self.node(LogicalOp::Projection { items, limit: self.qg.limit, preds }, vec![plan])
    }

    /// Cheapest plan reachable by any sequence of candidate picks; memoized
    /// on the plan table, so only usable for small query graphs.
    pub fn exhaustive(&self) -> Result<Arc<PlanNode>, PlanError> {
        type Memo = HashMap<Vec<String>, Option<Arc<PlanNode>>>;
        fn go(o: &Optimizer, table: Vec<Arc<PlanNode>>, memo: &mut Memo) -> Option<Arc<PlanNode>> {
            let mut key: Vec<String> = table.iter().map(|t| t.fingerprint()).collect();
            key.sort();
            if let Some(r) = memo.get(&key) {
                return r.clone();
            }
            let cands = o.candidates(&table);
            let best = if cands.is_empty() {
                o.finish(table).ok()
            } else {
                cands
                    .into_iter()
                    .filter_map(|c| {
                        let mut t = table.clone();
                        o.commit(&mut t, c);
                        go(o, t, memo)
                    })
                    .min_by(|a, b| a.cost.total_cmp(&b.cost))
            };
            memo.insert(key, best.clone());
            best
        }
        go(self, self.leaf_table(), &mut HashMap::new())
            .ok_or_else(|| PlanError::Unsatisfiable("no candidate sequence completes the plan".into()))
    }

    /// Left-deep plan in q-node order with every single-variable predicate
    /// applied directly above its scan and the rest at the top.
    pub fn naive(&self) -> Result<Arc<PlanNode>, PlanError> {
        let leaves: Vec<Arc<PlanNode>> = (0..self.qg.nodes.len())
            .map(|i| {
                let var = &self.qg.nodes[i].var;
                let mut p = self.leaf(i);
                for pred in self.qg.filters() {
                    if pred.vars.len() == 1 && pred.vars.contains(var) {
                        p = self.filter(p, pred);
                    }
                }
                p
            })
            .collect();
        let mut cur = match leaves.first() {
            Some(l) => l.clone(),
            None => self.node(LogicalOp::SingleRow, vec![]),
        };
        for (i, leaf) in leaves.iter().enumerate().skip(1) {
            let var = &self.qg.nodes[i].var;
            let link = self.qg.edges.iter().enumerate().find_map(|(eid, e)| {
                if cur.edges.contains(&eid) {
                    None
                } else if &e.to == var && cur.bound.contains(&e.from) {
                    Some((eid, true))
                } else if &e.from == var && cur.bound.contains(&e.to) {
                    Some((eid, false))
                } else {
                    None
                }
            });
            cur = match link {
                Some((eid, from_source)) => self.join(self.expand(cur, eid, from_source), leaf.clone()),
                None => self.join(cur, leaf.clone()),
            };
        }
        for eid in 0..self.qg.edges.len() {
            if !cur.edges.contains(&eid) {
                let from_source = cur.bound.contains(&self.qg.edges[eid].from);
                cur = self.expand(cur, eid, from_source);
            }
        }
        for pred in self.qg.filters() {
            if !cur.applied.contains(&pred.id) {
                cur = self.filter(cur, pred);
            }
        }
        self.finish(vec![cur])
    }
}

fn rewrite_shortest_paths(e: &mut Expr, n: &mut usize, out: &mut Vec<(crate::query::ShortestPathPat, String)>) {
    match e {
        Expr::ShortestPath(pat) => {
            let var = format!("_p{n}");
            *n += 1;
            out.push((pat.clone(), var.clone()));
            *e = Expr::Var(var);
        }
        Expr::Prop(x, _) | Expr::SubProp(x, _) | Expr::BlobFn(_, x) | Expr::Not(x) => rewrite_shortest_paths(x, n, out),
        Expr::Cmp(_, a, b) | Expr::And(a, b) | Expr::Or(a, b) => {
            rewrite_shortest_paths(a, n, out);
            rewrite_shortest_paths(b, n, out);
        }
        _ => {}
    }
}
