use std::collections::{BTreeMap, HashMap, VecDeque};
use std::ops::Bound;
use std::sync::Arc;

use crate::graph::{Direction, NodeId, RelId, Value};
use crate::planner::{indexable, LogicalOp, PlanNode};
use crate::query::{CmpOp, Expr, Predicate, ReturnItem};

use super::row::{Binding, Row};
use super::{ExecContext, ExecError};

/// Pull-based operator.
pub trait Operator {
    fn next(&mut self) -> Result<Option<Row>, ExecError>;
}

pub type BoxOp<'a> = Box<dyn Operator + 'a>;

/// Instantiates the operator tree for `plan`.
pub fn build<'a>(plan: &PlanNode, ctx: &'a ExecContext<'a>) -> Result<BoxOp<'a>, ExecError> {
    let desc = plan.op.describe();
    Ok(match &plan.op {
        LogicalOp::SingleRow => Box::new(SingleRow { done: false }),
        LogicalOp::AllNodeScan { var } => Box::new(Scan { ctx, iter: ctx.graph.scan(None), var: var.as_str().into(), extra: vec![] }),
        LogicalOp::NodeByLabelScan { var, label, extra } => {
            Box::new(Scan { ctx, iter: ctx.graph.scan(Some(label)), var: var.as_str().into(), extra: extra.clone() })
        }
        LogicalOp::Filter { pred, indexed } => {
            if *indexed {
                if let Some(seek) = index_seek(plan, pred, ctx)? {
                    return Ok(seek);
                }
            }
            let input = build(&plan.inputs[0], ctx)?;
            if pred.unstructured {
                Box::new(UnstructuredFilter {
                    ctx,
                    input,
                    pred: pred.clone(),
                    desc,
                    batch: VecDeque::new(),
                    exhausted: false,
                    elapsed: 0.0,
                    rows: 0,
                    flushed: false,
                })
            } else {
                Box::new(Filter { ctx, input, expr: pred.expr.clone(), desc })
            }
        }
        LogicalOp::Expand { from, to, edge, dir, into, to_labels, .. } => Box::new(Expand {
            ctx,
            input: build(&plan.inputs[0], ctx)?,
            from: from.clone(),
            to: to.as_str().into(),
            rel_var: edge.var.as_str().into(),
            rel_type: edge.rel_type.clone(),
            dir: *dir,
            into: *into,
            to_labels: to_labels.clone(),
            pending: VecDeque::new(),
        }),
        LogicalOp::Join { on } => Box::new(Join {
            left: build(&plan.inputs[0], ctx)?,
            right: Some(build(&plan.inputs[1], ctx)?),
            on: on.clone(),
            table: HashMap::new(),
            pending: VecDeque::new(),
        }),
        LogicalOp::ShortestPath { pat, out } => Box::new(ShortestPath {
            ctx,
            input: build(&plan.inputs[0], ctx)?,
            expr: Expr::ShortestPath(pat.clone()),
            out: out.as_str().into(),
        }),
        LogicalOp::Projection { items, limit, preds } => Box::new(Projection::new(
            ctx,
            build(&plan.inputs[0], ctx)?,
            items.clone(),
            *limit,
            preds,
            desc,
        )),
    })
}

struct SingleRow {
    done: bool,
}

impl Operator for SingleRow {
    fn next(&mut self) -> Result<Option<Row>, ExecError> {
        if self.done {
            return Ok(None);
        }
        self.done = true;
        Ok(Some(Row::new()))
    }
}

struct Scan<'a> {
    ctx: &'a ExecContext<'a>,
    iter: Box<dyn Iterator<Item = NodeId> + 'a>,
    var: Arc<str>,
    extra: Vec<String>,
}

impl Operator for Scan<'_> {
    fn next(&mut self) -> Result<Option<Row>, ExecError> {
        for id in self.iter.by_ref() {
            if self.extra.iter().all(|l| self.ctx.graph.has_label(id, l)) {
                return Ok(Some(Row::new().with(self.var.clone(), Binding::Node(id))));
            }
        }
        Ok(None)
    }
}

/// Serves a filter directly over a scan from a property index. Candidates
/// are re-checked against the scan's labels and the full predicate.
fn index_seek<'a>(plan: &PlanNode, pred: &Predicate, ctx: &'a ExecContext<'a>) -> Result<Option<BoxOp<'a>>, ExecError> {
    let (var, labels) = match &plan.inputs[0].op {
        LogicalOp::AllNodeScan { var } => (var, Vec::new()),
        LogicalOp::NodeByLabelScan { var, label, extra } => {
            let mut l = vec![label.clone()];
            l.extend(extra.iter().cloned());
            (var, l)
        }
        _ => return Ok(None),
    };
    let Some((pvar, key)) = indexable(&pred.expr) else { return Ok(None) };
    if pvar != var {
        return Ok(None);
    }
    let Expr::Cmp(op, a, b) = &pred.expr else { return Ok(None) };
    let (op, constant) = match a.as_ref() {
        Expr::Prop(..) => (*op, b.as_ref()),
        _ => (flip(*op), a.as_ref()),
    };
    let value = match ctx.eval(constant, &Row::new())? {
        Binding::Value(v) => v,
        _ => return Ok(None),
    };
    if op != CmpOp::Eq && !matches!(value, Value::Integer(_) | Value::Float(_) | Value::Text(_)) {
        return Ok(None);
    }
    let probe = |label: Option<&str>| match op {
        CmpOp::Eq => ctx.graph.index_lookup(label, key, &value),
        CmpOp::Lt => ctx.graph.index_range(label, key, Bound::Unbounded, Bound::Excluded(&value)),
        CmpOp::Le => ctx.graph.index_range(label, key, Bound::Unbounded, Bound::Included(&value)),
        CmpOp::Gt => ctx.graph.index_range(label, key, Bound::Excluded(&value), Bound::Unbounded),
        CmpOp::Ge => ctx.graph.index_range(label, key, Bound::Included(&value), Bound::Unbounded),
        _ => None,
    };
    let ids = std::iter::once(None).chain(labels.iter().map(|l| Some(l.as_str()))).find_map(probe);
    let Some(ids) = ids else { return Ok(None) };
    let var: Arc<str> = var.as_str().into();
    let mut rows = VecDeque::new();
    for id in ids {
        if labels.iter().all(|l| ctx.graph.has_label(id, l)) {
            let row = Row::new().with(var.clone(), Binding::Node(id));
            if ctx.holds(&pred.expr, &row)? {
                rows.push_back(row);
            }
        }
    }
    ctx.counters.index_probes.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
    Ok(Some(Box::new(Buffered { rows })))
}

fn flip(op: CmpOp) -> CmpOp {
    match op {
        CmpOp::Lt => CmpOp::Gt,
        CmpOp::Gt => CmpOp::Lt,
        CmpOp::Le => CmpOp::Ge,
        CmpOp::Ge => CmpOp::Le,
        op => op,
    }
}

struct Buffered {
    rows: VecDeque<Row>,
}

impl Operator for Buffered {
    fn next(&mut self) -> Result<Option<Row>, ExecError> {
        Ok(self.rows.pop_front())
    }
}

struct Filter<'a> {
    ctx: &'a ExecContext<'a>,
    input: BoxOp<'a>,
    expr: Expr,
    desc: String,
}

impl Operator for Filter<'_> {
    fn next(&mut self) -> Result<Option<Row>, ExecError> {
        while let Some(row) = self.input.next()? {
            if self.ctx.holds(&self.expr, &row).map_err(|e| e.at(&self.desc))? {
                return Ok(Some(row));
            }
        }
        Ok(None)
    }
}

/// Filters in batches so extraction for a batch can run concurrently, and
/// reports its own evaluation time to the speed registry when exhausted.
struct UnstructuredFilter<'a> {
    ctx: &'a ExecContext<'a>,
    input: BoxOp<'a>,
    pred: Predicate,
    desc: String,
    batch: VecDeque<Row>,
    exhausted: bool,
    elapsed: f64,
    rows: u64,
    flushed: bool,
}

impl UnstructuredFilter<'_> {
    fn fill(&mut self) -> Result<(), ExecError> {
        let mut input = Vec::new();
        while input.len() < self.ctx.batch_size.max(1) {
            match self.input.next()? {
                Some(r) => input.push(r),
                None => {
                    self.exhausted = true;
                    break;
                }
            }
        }
        if input.is_empty() {
            return Ok(());
        }
        let t0 = self.ctx.clock.now();
        if self.ctx.in_flight > 1 && input.len() > 1 {
            let mut wanted = Vec::new();
            for r in &input {
                self.ctx.pending_extractions(&self.pred.expr, r, &mut wanted);
            }
            let mut by_sub: BTreeMap<String, Vec<crate::blob::BlobId>> = BTreeMap::new();
            for (b, s) in wanted {
                by_sub.entry(s.to_string()).or_default().push(b);
            }
            for (sub, mut ids) in by_sub {
                ids.sort();
                ids.dedup();
                // failures resurface, with context, during evaluation
                let _ = self.ctx.extraction.prefetch(&ids, &sub.as_str().into(), self.ctx.in_flight);
            }
        }
        let mut result = Ok(());
        for r in input {
            self.rows += 1;
            match self.ctx.holds(&self.pred.expr, &r) {
                Ok(true) => self.batch.push_back(r),
                Ok(false) => {}
                Err(e) => {
                    result = Err(e.at(&self.desc));
                    break;
                }
            }
        }
        self.elapsed += (self.ctx.clock.now() - t0).as_secs_f64();
        result
    }

    fn flush(&mut self) {
        if !self.flushed && self.rows > 0 {
            if let Some(id) = &self.pred.filter_id {
                let _ = self.ctx.speeds.record(id, self.elapsed, self.rows);
            }
            self.ctx.counters.record_work(id_or(&self.pred), self.elapsed, self.rows);
        }
        self.flushed = true;
    }
}

fn id_or(p: &Predicate) -> &str {
    p.filter_id.as_deref().unwrap_or("")
}

impl Operator for UnstructuredFilter<'_> {
    fn next(&mut self) -> Result<Option<Row>, ExecError> {
        loop {
            if let Some(r) = self.batch.pop_front() {
                return Ok(Some(r));
            }
            if self.exhausted {
                self.flush();
                return Ok(None);
            }
            self.fill()?;
        }
    }
}

struct Expand<'a> {
    ctx: &'a ExecContext<'a>,
    input: BoxOp<'a>,
    from: String,
    to: Arc<str>,
    rel_var: Arc<str>,
    rel_type: Option<String>,
    dir: Direction,
    into: bool,
    to_labels: Vec<String>,
    pending: VecDeque<Row>,
}

impl Operator for Expand<'_> {
    fn next(&mut self) -> Result<Option<Row>, ExecError> {
        loop {
            if let Some(r) = self.pending.pop_front() {
                return Ok(Some(r));
            }
            let Some(row) = self.input.next()? else { return Ok(None) };
            let src = match row.get(&self.from) {
                Some(Binding::Node(n)) => *n,
                _ => return Err(ExecError::Unbound(self.from.clone())),
            };
            let target = if self.into {
                match row.get(&self.to) {
                    Some(Binding::Node(n)) => Some(*n),
                    _ => return Err(ExecError::Unbound(self.to.to_string())),
                }
            } else {
                None
            };
            let bound_rel = match row.get(&self.rel_var) {
                Some(Binding::Rel(r)) => Some(*r),
                _ => None,
            };
            let steps: Vec<(RelId, NodeId)> = self.ctx.graph.expand(src, self.dir, self.rel_type.as_deref())?.collect();
            for (r, v) in steps {
                if target.is_some_and(|t| t != v) || bound_rel.is_some_and(|b| b != r) {
                    continue;
                }
                if !self.to_labels.iter().all(|l| self.ctx.graph.has_label(v, l)) {
                    continue;
                }
                let mut out = row.clone();
                out.set(self.rel_var.clone(), Binding::Rel(r));
                if !self.into {
                    out.set(self.to.clone(), Binding::Node(v));
                }
                self.pending.push_back(out);
            }
        }
    }
}

/// Hash join building on the right input; cartesian product when `on` is empty.
struct Join<'a> {
    left: BoxOp<'a>,
    right: Option<BoxOp<'a>>,
    on: Vec<String>,
    table: HashMap<Vec<String>, Vec<Row>>,
    pending: VecDeque<Row>,
}

impl Join<'_> {
    fn key(&self, row: &Row) -> Option<Vec<String>> {
        self.on.iter().map(|v| row.get(v).map(Binding::join_key)).collect()
    }
}

impl Operator for Join<'_> {
    fn next(&mut self) -> Result<Option<Row>, ExecError> {
        if let Some(mut right) = self.right.take() {
            while let Some(r) = right.next()? {
                if let Some(k) = self.key(&r) {
                    self.table.entry(k).or_default().push(r);
                }
            }
        }
        loop {
            if let Some(r) = self.pending.pop_front() {
                return Ok(Some(r));
            }
            let Some(l) = self.left.next()? else { return Ok(None) };
            let Some(k) = self.key(&l) else { continue };
            if let Some(matches) = self.table.get(&k) {
                for r in matches {
                    let mut out = l.clone();
                    out.merge(r);
                    self.pending.push_back(out);
                }
            }
        }
    }
}

struct ShortestPath<'a> {
    ctx: &'a ExecContext<'a>,
    input: BoxOp<'a>,
    expr: Expr,
    out: Arc<str>,
}

impl Operator for ShortestPath<'_> {
    fn next(&mut self) -> Result<Option<Row>, ExecError> {
        let Some(mut row) = self.input.next()? else { return Ok(None) };
        let p = self.ctx.eval(&self.expr, &row)?;
        row.set(self.out.clone(), p);
        Ok(Some(row))
    }
}

struct Projection<'a> {
    ctx: &'a ExecContext<'a>,
    input: BoxOp<'a>,
    items: Vec<(Arc<str>, ReturnItem, Option<String>)>,
    limit: Option<u64>,
    emitted: u64,
    desc: String,
    work: BTreeMap<String, (f64, u64)>,
    flushed: bool,
}

impl<'a> Projection<'a> {
    fn new(
        ctx: &'a ExecContext<'a>,
        input: BoxOp<'a>,
        items: Vec<ReturnItem>,
        limit: Option<u64>,
        preds: &[Predicate],
        desc: String,
    ) -> Self {
        let items = items
            .into_iter()
            .map(|i| {
                let timed = preds.iter().find(|p| p.expr == i.expr).and_then(|p| p.filter_id.clone());
                (i.column().into(), i, timed)
            })
            .collect();
        Projection { ctx, input, items, limit, emitted: 0, desc, work: BTreeMap::new(), flushed: false }
    }

    fn flush(&mut self) {
        if self.flushed {
            return;
        }
        self.flushed = true;
        for (id, (secs, rows)) in &self.work {
            if *rows > 0 {
                let _ = self.ctx.speeds.record(id, *secs, *rows);
                self.ctx.counters.record_work(id, *secs, *rows);
            }
        }
    }
}

impl Operator for Projection<'_> {
    fn next(&mut self) -> Result<Option<Row>, ExecError> {
        if self.limit.is_some_and(|l| self.emitted >= l) {
            return Ok(None);
        }
        let Some(row) = self.input.next()? else {
            self.flush();
            return Ok(None);
        };
        let mut out = Row::new();
        for (col, item, timed) in &self.items {
            let t0 = self.ctx.clock.now();
            let v = self.ctx.eval(&item.expr, &row).map_err(|e| e.at(&self.desc))?;
            if let Some(id) = timed {
                let w = self.work.entry(id.clone()).or_default();
                w.0 += (self.ctx.clock.now() - t0).as_secs_f64();
                w.1 += 1;
            }
            out.set(col.clone(), v);
        }
        self.emitted += 1;
        Ok(Some(out))
    }
}

/// Runs `plan` to completion without a projection boundary check.
pub fn drain(mut op: BoxOp<'_>) -> Result<Vec<Row>, ExecError> {
    let mut rows = Vec::new();
    while let Some(r) = op.next()? {
        rows.push(r);
    }
    Ok(rows)
}

/// The projection at the root of `plan`, fed from already computed rows.
pub(super) fn project_over<'a>(plan: &PlanNode, rows: Vec<Row>, ctx: &'a ExecContext<'a>) -> Result<BoxOp<'a>, ExecError> {
    let LogicalOp::Projection { items, limit, preds } = &plan.op else {
        return Err(ExecError::Type("plan root is not a projection".into()));
    };
    let input = Box::new(Buffered { rows: rows.into() });
    Ok(Box::new(Projection::new(ctx, input, items.clone(), *limit, preds, plan.op.describe())))
}
