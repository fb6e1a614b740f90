use std::collections::{BTreeMap, BTreeSet};

use crate::extraction::DEFAULT_SUB_KEY;
use crate::graph::Direction;

use super::ast::*;
use super::QueryError;

#[derive(Debug, Clone, PartialEq)]
pub struct QNode {
    pub var: String,
    pub labels: Vec<String>,
}

/// A pattern relationship. `direction` is `Out` (from → to) or `Both`; incoming
/// patterns are stored with endpoints swapped.
#[derive(Debug, Clone, PartialEq)]
pub struct QEdge {
    pub var: String,
    pub from: String,
    pub to: String,
    pub rel_type: Option<String>,
    pub direction: Direction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredRole {
    /// Restricts rows.
    Filter,
    /// Computed per output row by the projection.
    Projection,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Predicate {
    pub id: usize,
    pub expr: Expr,
    pub vars: BTreeSet<String>,
    pub unstructured: bool,
    pub role: PredRole,
    /// Speed-statistics identity; set for unstructured predicates only.
    pub filter_id: Option<String>,
}

impl Predicate {
    pub fn is_attached(&self) -> bool {
        self.role == PredRole::Filter && self.vars.len() <= 1
    }
}

/// A named path: alternating node and relationship variables.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedPath {
    pub var: String,
    pub nodes: Vec<String>,
    pub rels: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct QueryGraph {
    pub nodes: Vec<QNode>,
    pub edges: Vec<QEdge>,
    pub predicates: Vec<Predicate>,
    pub paths: Vec<NamedPath>,
    pub returns: Vec<ReturnItem>,
    pub limit: Option<u64>,
}

impl QueryGraph {
    pub fn node(&self, var: &str) -> Option<&QNode> {
        self.nodes.iter().find(|n| n.var == var)
    }

    pub fn node_index(&self, var: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.var == var)
    }

    pub fn attached(&self) -> impl Iterator<Item = &Predicate> {
        self.predicates.iter().filter(|p| p.is_attached())
    }

    pub fn detached(&self) -> impl Iterator<Item = &Predicate> {
        self.predicates.iter().filter(|p| !p.is_attached())
    }

    pub fn filters(&self) -> impl Iterator<Item = &Predicate> {
        self.predicates.iter().filter(|p| p.role == PredRole::Filter)
    }

    /// Connected components over q-nodes, each a sorted list of node indexes.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.nodes.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while p[r] != r {
                r = p[r];
            }
            p[x] = r;
            r
        }
        for e in &self.edges {
            let (a, b) = (self.node_index(&e.from).unwrap(), self.node_index(&e.to).unwrap());
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            parent[ra.max(rb)] = ra.min(rb);
        }
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for i in 0..n {
            let r = find(&mut parent, i);
            groups.entry(r).or_default().push(i);
        }
        groups.into_values().collect()
    }

    /// Every node and relationship variable.
    pub fn entity_vars(&self) -> BTreeSet<String> {
        self.nodes.iter().map(|n| n.var.clone()).chain(self.edges.iter().map(|e| e.var.clone())).collect()
    }
}

/// Speed-statistics identity of an unstructured expression: the sub-property
/// key (default `face`) followed by the comparison symbol.
pub fn filter_id(expr: &Expr) -> String {
    let sub = expr.sub_keys().into_iter().next().unwrap_or_else(|| DEFAULT_SUB_KEY.to_string());
    format!("{sub}{}", first_op(expr).map(CmpOp::as_str).unwrap_or("="))
}

fn first_op(expr: &Expr) -> Option<CmpOp> {
    match expr {
        Expr::Cmp(op, a, b) => {
            if matches!(op, CmpOp::Sem(_)) {
                return Some(*op);
            }
            first_op(a).or_else(|| first_op(b)).or(Some(*op))
        }
        Expr::And(a, b) | Expr::Or(a, b) => first_op(a).or_else(|| first_op(b)),
        Expr::Not(e) => first_op(e),
        _ => None,
    }
}

#[derive(PartialEq, Clone, Copy)]
enum VarKind {
    Node,
    Rel,
    Path,
}

#[derive(Default)]
struct Builder {
    qg: QueryGraph,
    kinds: BTreeMap<String, VarKind>,
    anon: usize,
    pending: Vec<Expr>,
}

impl Builder {
    fn declare(&mut self, var: &str, kind: VarKind) -> Result<(), QueryError> {
        match self.kinds.get(var) {
            Some(k) if *k == kind && kind == VarKind::Node => Ok(()),
            Some(_) => Err(QueryError::Semantic { pos: None, msg: format!("variable `{var}` is bound more than once") }),
            None => {
                self.kinds.insert(var.to_string(), kind);
                Ok(())
            }
        }
    }

    fn fresh(&mut self, prefix: &str) -> String {
        loop {
            let v = format!("_{prefix}{}", self.anon);
            self.anon += 1;
            if !self.kinds.contains_key(&v) {
                return v;
            }
        }
    }

    fn inline_props(&mut self, var: &str, props: &[(String, Expr)]) {
        for (k, v) in props {
            self.pending.push(Expr::cmp(CmpOp::Eq, Expr::prop(var, k), v.clone()));
        }
    }

    fn pattern(&mut self, p: &PathPattern) -> Result<(), QueryError> {
        let mut node_vars = Vec::with_capacity(p.nodes.len());
        for n in &p.nodes {
            let var = match &n.var {
                Some(v) => v.clone(),
                None => self.fresh("n"),
            };
            self.declare(&var, VarKind::Node)?;
            match self.qg.nodes.iter_mut().find(|q| q.var == var) {
                Some(q) => {
                    for l in &n.labels {
                        if !q.labels.contains(l) {
                            q.labels.push(l.clone());
                        }
                    }
                }
                None => self.qg.nodes.push(QNode { var: var.clone(), labels: n.labels.clone() }),
            }
            self.inline_props(&var, &n.props);
            node_vars.push(var);
        }
        let mut rel_vars = Vec::with_capacity(p.rels.len());
        for (i, r) in p.rels.iter().enumerate() {
            let var = match &r.var {
                Some(v) => v.clone(),
                None => self.fresh("e"),
            };
            self.declare(&var, VarKind::Rel)?;
            let (a, b) = (node_vars[i].clone(), node_vars[i + 1].clone());
            let (from, to, direction) = match r.direction {
                Direction::In => (b, a, Direction::Out),
                d => (a, b, d),
            };
            self.qg.edges.push(QEdge { var: var.clone(), from, to, rel_type: r.rel_type.clone(), direction });
            self.inline_props(&var, &r.props);
            rel_vars.push(var);
        }
        if let Some(pv) = &p.var {
            self.declare(pv, VarKind::Path)?;
            self.qg.paths.push(NamedPath { var: pv.clone(), nodes: node_vars, rels: rel_vars });
        }
        Ok(())
    }

    fn check_bound(&self, e: &Expr) -> Result<(), QueryError> {
        for v in e.vars() {
            if !self.kinds.contains_key(&v) {
                return Err(QueryError::UnboundVariable(v));
            }
        }
        if let Expr::ShortestPath(sp) = e {
            for v in [&sp.from, &sp.to] {
                if self.kinds.get(v) != Some(&VarKind::Node) {
                    return Err(QueryError::Semantic { pos: None, msg: format!("shortestPath endpoint `{v}` is not a node") });
                }
            }
        }
        Ok(())
    }

    fn add_predicate(&mut self, expr: Expr, role: PredRole) {
        let unstructured = expr.is_unstructured();
        let filter_id = unstructured.then(|| filter_id(&expr));
        let id = self.qg.predicates.len();
        let vars = expr.vars();
        self.qg.predicates.push(Predicate { id, expr, vars, unstructured, role, filter_id });
    }
}

/// Builds the query graph for the MATCH/WHERE/RETURN part of `q` and checks
/// that every referenced variable is bound.
pub fn to_query_graph(q: &Query) -> Result<QueryGraph, QueryError> {
    let mut b = Builder::default();
    for p in &q.matches {
        b.pattern(p)?;
    }
    let match_kinds = b.kinds.clone();
    // CREATE binds new variables for later clauses but adds nothing to the graph
    for p in &q.creates {
        for n in &p.nodes {
            if let Some(v) = &n.var {
                if !b.kinds.contains_key(v) {
                    b.kinds.insert(v.clone(), VarKind::Node);
                }
            }
            for (_, e) in &n.props {
                check_create_expr(&b, e)?;
            }
        }
        for r in &p.rels {
            if let Some(v) = &r.var {
                b.declare(v, VarKind::Rel)?;
            }
            if r.direction == Direction::Both {
                return Err(QueryError::Semantic { pos: None, msg: "CREATE needs a directed relationship".into() });
            }
        }
    }
    let pending = std::mem::take(&mut b.pending);
    for e in pending {
        b.add_predicate(e, PredRole::Filter);
    }
    if let Some(w) = &q.where_clause {
        let scope = Builder { kinds: match_kinds.clone(), ..Default::default() };
        scope.check_bound(w)?;
        if let Some(sp) = find_shortest_path(w) {
            return Err(QueryError::Semantic { pos: None, msg: format!("shortestPath({}, {}) is only allowed in RETURN", sp.from, sp.to) });
        }
        for c in w.clone().conjuncts() {
            b.add_predicate(c, PredRole::Filter);
        }
    }
    for s in &q.sets {
        if !b.kinds.contains_key(&s.var) {
            return Err(QueryError::UnboundVariable(s.var.clone()));
        }
        b.check_bound(&s.value)?;
    }
    for d in &q.deletes {
        match b.kinds.get(d) {
            None => return Err(QueryError::UnboundVariable(d.clone())),
            Some(VarKind::Path) => return Err(QueryError::Semantic { pos: None, msg: format!("cannot delete path `{d}`") }),
            Some(_) => {}
        }
    }
    for r in &q.returns {
        b.check_bound(&r.expr)?;
        if matches!(r.expr, Expr::Cmp(..)) && r.expr.is_unstructured() && r.expr.vars().len() > 1 {
            b.add_predicate(r.expr.clone(), PredRole::Projection);
        }
    }
    b.qg.returns = q.returns.clone();
    b.qg.limit = q.limit;
    Ok(b.qg)
}

fn check_create_expr(b: &Builder, e: &Expr) -> Result<(), QueryError> {
    b.check_bound(e)
}

fn find_shortest_path(e: &Expr) -> Option<&ShortestPathPat> {
    match e {
        Expr::ShortestPath(sp) => Some(sp),
        Expr::Prop(x, _) | Expr::SubProp(x, _) | Expr::BlobFn(_, x) | Expr::Not(x) => find_shortest_path(x),
        Expr::Cmp(_, a, b) | Expr::And(a, b) | Expr::Or(a, b) => find_shortest_path(a).or_else(|| find_shortest_path(b)),
        _ => None,
    }
}
