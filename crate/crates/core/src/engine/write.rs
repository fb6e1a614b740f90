//! CREATE / SET / DELETE. Effects are computed for every matched row against
//! the pre-statement graph, validated, and only then applied, so a failing
//! statement leaves the graph untouched.

use std::collections::BTreeSet;
use std::sync::Arc;

use crate::exec::{Binding, ExecContext, ExecError, Row};
use crate::graph::{Direction, Entity, GraphStore, NodeId, RelId, Value};
use crate::query::{Expr, Query};

#[derive(Debug, Clone, PartialEq)]
pub enum Mutation {
    CreateNode { id: NodeId, labels: Vec<String>, props: Vec<(String, Value)> },
    CreateRel { id: RelId, src: NodeId, tgt: NodeId, rel_type: String, props: Vec<(String, Value)> },
    /// `None` removes the property.
    Set { entity: Entity, key: String, value: Option<Value> },
    DeleteRel(RelId),
    DeleteNode(NodeId),
}

/// Counts of applied effects.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct WriteSummary {
    pub nodes_created: u64,
    pub rels_created: u64,
    pub properties_set: u64,
    pub nodes_deleted: u64,
    pub rels_deleted: u64,
}

pub struct WritePlanner {
    next_node: u64,
    next_rel: u64,
    pub mutations: Vec<Mutation>,
    pub rows: Vec<Row>,
    deleted_nodes: BTreeSet<NodeId>,
    deleted_rels: BTreeSet<RelId>,
}

fn to_value(b: Binding, what: &str) -> Result<Option<Value>, ExecError> {
    match b {
        Binding::Null => Ok(None),
        Binding::Value(v) => Ok(Some(v)),
        other => Err(ExecError::Type(format!("{what}: cannot store {other} as a property value"))),
    }
}

impl WritePlanner {
    pub fn new(g: &GraphStore) -> Self {
        let (next_node, next_rel) = g.next_ids();
        WritePlanner {
            next_node,
            next_rel,
            mutations: Vec::new(),
            rows: Vec::new(),
            deleted_nodes: BTreeSet::new(),
            deleted_rels: BTreeSet::new(),
        }
    }

    fn props(ctx: &ExecContext, props: &[(String, Expr)], row: &Row) -> Result<Vec<(String, Value)>, ExecError> {
        let mut out = Vec::new();
        for (k, e) in props {
            if let Some(v) = to_value(ctx.eval(e, row)?, k)? {
                out.push((k.clone(), v));
            }
        }
        Ok(out)
    }

    /// Plans the effects of `q` for one matched row.
    pub fn row(&mut self, ctx: &ExecContext, q: &Query, mut row: Row) -> Result<(), ExecError> {
        for p in &q.creates {
            let mut ids = Vec::with_capacity(p.nodes.len());
            for n in &p.nodes {
                let bound = n.var.as_deref().and_then(|v| row.get(v));
                match bound {
                    Some(Binding::Node(id)) => {
                        if !n.labels.is_empty() || !n.props.is_empty() {
                            return Err(ExecError::Type(format!(
                                "variable {} is already bound; CREATE cannot add labels or properties to it",
                                n.var.as_deref().unwrap_or("")
                            )));
                        }
                        ids.push(*id);
                    }
                    Some(other) => return Err(ExecError::Type(format!("{other} is not a node"))),
                    None => {
                        let id = NodeId(self.next_node);
                        self.next_node += 1;
                        let props = Self::props(ctx, &n.props, &row)?;
                        self.mutations.push(Mutation::CreateNode { id, labels: n.labels.clone(), props });
                        if let Some(v) = &n.var {
                            row.set(Arc::from(v.as_str()), Binding::Node(id));
                        }
                        ids.push(id);
                    }
                }
            }
            for (i, r) in p.rels.iter().enumerate() {
                let (src, tgt) = match r.direction {
                    Direction::In => (ids[i + 1], ids[i]),
                    _ => (ids[i], ids[i + 1]),
                };
                let rel_type =
                    r.rel_type.clone().ok_or_else(|| ExecError::Type("CREATE needs a relationship type".into()))?;
                let id = RelId(self.next_rel);
                self.next_rel += 1;
                let props = Self::props(ctx, &r.props, &row)?;
                self.mutations.push(Mutation::CreateRel { id, src, tgt, rel_type, props });
                if let Some(v) = &r.var {
                    row.set(Arc::from(v.as_str()), Binding::Rel(id));
                }
            }
        }
        for s in &q.sets {
            let entity = match row.get(&s.var) {
                Some(Binding::Node(n)) => Entity::from(*n),
                Some(Binding::Rel(r)) => Entity::from(*r),
                Some(Binding::Null) => continue,
                _ => return Err(ExecError::Type(format!("cannot set a property on {}", s.var))),
            };
            let value = to_value(ctx.eval(&s.value, &row)?, &s.key)?;
            self.mutations.push(Mutation::Set { entity, key: s.key.clone(), value });
        }
        for d in &q.deletes {
            match row.get(d) {
                Some(Binding::Node(n)) => {
                    if self.deleted_nodes.insert(*n) {
                        if q.detach {
                            for (r, _) in ctx.graph.expand(*n, Direction::Both, None)? {
                                if self.deleted_rels.insert(r) {
                                    self.mutations.push(Mutation::DeleteRel(r));
                                }
                            }
                        }
                        self.mutations.push(Mutation::DeleteNode(*n));
                    }
                }
                Some(Binding::Rel(r)) => {
                    if self.deleted_rels.insert(*r) {
                        self.mutations.push(Mutation::DeleteRel(*r));
                    }
                }
                Some(Binding::Null) => {}
                _ => return Err(ExecError::Type(format!("cannot delete {d}"))),
            }
        }
        self.rows.push(row);
        Ok(())
    }

    /// Plain DELETE of a node that keeps relationships is rejected, as are
    /// writes to entities deleted by the same statement.
    pub fn validate(&self, g: &GraphStore) -> Result<(), ExecError> {
        for n in &self.deleted_nodes {
            for (r, _) in g.expand(*n, Direction::Both, None)? {
                if !self.deleted_rels.contains(&r) {
                    return Err(ExecError::Type(format!(
                        "node {} still has relationships; use DETACH DELETE",
                        n.0
                    )));
                }
            }
        }
        for m in &self.mutations {
            match m {
                Mutation::CreateRel { src, tgt, .. } if self.deleted_nodes.contains(src) || self.deleted_nodes.contains(tgt) => {
                    return Err(ExecError::Type("cannot attach a relationship to a deleted node".into()));
                }
                Mutation::Set { entity: Entity::Node(n), .. } if self.deleted_nodes.contains(n) => {
                    return Err(ExecError::Type(format!("node {} is deleted by this statement", n.0)));
                }
                Mutation::Set { entity: Entity::Rel(r), .. } if self.deleted_rels.contains(r) => {
                    return Err(ExecError::Type(format!("relationship {} is deleted by this statement", r.0)));
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// Applies validated mutations in order.
pub fn apply(g: &mut GraphStore, mutations: &[Mutation]) -> Result<WriteSummary, ExecError> {
    let mut s = WriteSummary::default();
    for m in mutations {
        match m {
            Mutation::CreateNode { id, labels, props } => {
                g.insert_node_with_id(*id, labels, props.iter().map(|(k, v)| (k, v.clone())))?;
                s.nodes_created += 1;
            }
            Mutation::CreateRel { id, src, tgt, rel_type, props } => {
                g.insert_rel_with_id(*id, *src, *tgt, rel_type, props.iter().map(|(k, v)| (k, v.clone())))?;
                s.rels_created += 1;
            }
            Mutation::Set { entity, key, value } => {
                match value {
                    Some(v) => g.set_property(*entity, key, v.clone())?,
                    None => {
                        g.remove_property(*entity, key)?;
                    }
                }
                s.properties_set += 1;
            }
            Mutation::DeleteRel(r) => {
                g.delete_rel(*r)?;
                s.rels_deleted += 1;
            }
            Mutation::DeleteNode(n) => {
                g.delete_node(*n)?;
                s.nodes_deleted += 1;
            }
        }
    }
    Ok(s)
}
