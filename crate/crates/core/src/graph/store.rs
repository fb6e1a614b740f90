use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::ops::Bound;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::value::{IndexKey, Value};
use super::GraphError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RelId(pub u64);

/// Either endpoint kind that can carry properties.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Entity {
    Node(NodeId),
    Rel(RelId),
}

impl From<NodeId> for Entity {
    fn from(n: NodeId) -> Self {
        Entity::Node(n)
    }
}

impl From<RelId> for Entity {
    fn from(r: RelId) -> Self {
        Entity::Rel(r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    Out,
    In,
    Both,
}

impl Direction {
    pub fn reverse(self) -> Direction {
        match self {
            Direction::Out => Direction::In,
            Direction::In => Direction::Out,
            Direction::Both => Direction::Both,
        }
    }
}

/// Interned string handle. Equal text always maps to the same symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Sym(u32);

#[derive(Debug, Default, Clone)]
pub struct Interner {
    ids: HashMap<Arc<str>, Sym>,
    names: Vec<Arc<str>>,
}

impl Interner {
    pub fn intern(&mut self, s: &str) -> Sym {
        if let Some(sym) = self.ids.get(s) {
            return *sym;
        }
        let sym = Sym(self.names.len() as u32);
        let name: Arc<str> = Arc::from(s);
        self.names.push(name.clone());
        self.ids.insert(name, sym);
        sym
    }

    pub fn get(&self, s: &str) -> Option<Sym> {
        self.ids.get(s).copied()
    }

    pub fn resolve(&self, sym: Sym) -> &str {
        &self.names[sym.0 as usize]
    }
}

#[derive(Debug, Clone, Default)]
struct NodeRecord {
    labels: BTreeSet<Sym>,
    props: BTreeMap<Sym, Value>,
    out: Vec<RelId>,
    inc: Vec<RelId>,
}

#[derive(Debug, Clone)]
struct RelRecord {
    rel_type: Sym,
    src: NodeId,
    tgt: NodeId,
    props: BTreeMap<Sym, Value>,
}

/// Materialized view of a node with resolved names.
#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: NodeId,
    pub labels: BTreeSet<String>,
    pub properties: BTreeMap<String, Value>,
}

/// Materialized view of a relationship with resolved names.
#[derive(Debug, Clone, PartialEq)]
pub struct Relationship {
    pub id: RelId,
    pub rel_type: String,
    pub src: NodeId,
    pub tgt: NodeId,
    pub properties: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct GraphStats {
    pub node_count: u64,
    pub rel_count: u64,
    pub label_counts: BTreeMap<String, u64>,
    pub rel_type_counts: BTreeMap<String, u64>,
    pub avg_out_degree: f64,
}

impl GraphStats {
    pub fn label_count(&self, label: &str) -> u64 {
        self.label_counts.get(label).copied().unwrap_or(0)
    }

    /// Expected neighbours reached by one expansion step.
    pub fn fan_out(&self, rel_type: Option<&str>, dir: Direction) -> f64 {
        if self.node_count == 0 {
            return 0.0;
        }
        let per_node = match rel_type {
            Some(t) => self.rel_type_counts.get(t).copied().unwrap_or(0) as f64 / self.node_count as f64,
            None => self.avg_out_degree,
        };
        match dir {
            Direction::Both => 2.0 * per_node,
            _ => per_node,
        }
    }
}

#[derive(Debug, Clone)]
struct PropertyIndex {
    label: Option<Sym>,
    key: Sym,
    entries: BTreeMap<IndexKey, BTreeSet<NodeId>>,
}

impl PropertyIndex {
    fn covers(&self, rec: &NodeRecord) -> bool {
        self.label.is_none_or(|l| rec.labels.contains(&l))
    }

    fn insert(&mut self, id: NodeId, v: &Value) {
        if let Some(k) = IndexKey::from_value(v) {
            self.entries.entry(k).or_default().insert(id);
        }
    }

    fn remove(&mut self, id: NodeId, v: &Value) {
        if let Some(k) = IndexKey::from_value(v) {
            if let Some(set) = self.entries.get_mut(&k) {
                set.remove(&id);
                if set.is_empty() {
                    self.entries.remove(&k);
                }
            }
        }
    }
}

/// In-memory property graph with per-node adjacency lists.
///
/// Every node keeps its outgoing and incoming relationship ids, so expansion
/// costs time proportional to the node's degree. Identifiers are dense,
/// ascending and never reused; iteration is always in ascending id order.
#[derive(Debug, Default)]
pub struct GraphStore {
    interner: Interner,
    nodes: BTreeMap<NodeId, NodeRecord>,
    rels: BTreeMap<RelId, RelRecord>,
    next_node: u64,
    next_rel: u64,
    label_counts: HashMap<Sym, u64>,
    type_counts: HashMap<Sym, u64>,
    indexes: Vec<PropertyIndex>,
    rows_scanned: AtomicU64,
}

impl Clone for GraphStore {
    fn clone(&self) -> Self {
        GraphStore {
            interner: self.interner.clone(),
            nodes: self.nodes.clone(),
            rels: self.rels.clone(),
            next_node: self.next_node,
            next_rel: self.next_rel,
            label_counts: self.label_counts.clone(),
            type_counts: self.type_counts.clone(),
            indexes: self.indexes.clone(),
            rows_scanned: AtomicU64::new(self.rows_scanned.load(Ordering::Relaxed)),
        }
    }
}

impl GraphStore {
    pub fn new() -> Self {
        GraphStore { next_node: 1, next_rel: 1, ..Default::default() }
    }

    pub fn interner(&self) -> &Interner {
        &self.interner
    }

    pub fn intern(&mut self, s: &str) -> Sym {
        self.interner.intern(s)
    }

    pub fn create_node<L, K, P>(&mut self, labels: L, props: P) -> NodeId
    where
        L: IntoIterator,
        L::Item: AsRef<str>,
        P: IntoIterator<Item = (K, Value)>,
        K: AsRef<str>,
    {
        let id = NodeId(self.next_node);
        self.next_node += 1;
        self.insert_node_record(id, labels, props);
        id
    }

    /// Inserts a node under a caller-chosen id (snapshot restore, loaders).
    pub fn insert_node_with_id<L, K, P>(&mut self, id: NodeId, labels: L, props: P) -> Result<(), GraphError>
    where
        L: IntoIterator,
        L::Item: AsRef<str>,
        P: IntoIterator<Item = (K, Value)>,
        K: AsRef<str>,
    {
        if self.nodes.contains_key(&id) || id.0 == 0 {
            return Err(GraphError::DuplicateNode(id));
        }
        self.next_node = self.next_node.max(id.0 + 1);
        self.insert_node_record(id, labels, props);
        Ok(())
    }

    fn insert_node_record<L, K, P>(&mut self, id: NodeId, labels: L, props: P)
    where
        L: IntoIterator,
        L::Item: AsRef<str>,
        P: IntoIterator<Item = (K, Value)>,
        K: AsRef<str>,
    {
        let mut rec = NodeRecord::default();
        for l in labels {
            let sym = self.interner.intern(l.as_ref());
            if rec.labels.insert(sym) {
                *self.label_counts.entry(sym).or_insert(0) += 1;
            }
        }
        for (k, v) in props {
            let sym = self.interner.intern(k.as_ref());
            rec.props.insert(sym, v);
        }
        for idx in &mut self.indexes {
            if idx.covers(&rec) {
                if let Some(v) = rec.props.get(&idx.key) {
                    idx.insert(id, v);
                }
            }
        }
        self.nodes.insert(id, rec);
    }

    pub fn create_rel<K, P>(&mut self, src: NodeId, tgt: NodeId, rel_type: &str, props: P) -> Result<RelId, GraphError>
    where
        P: IntoIterator<Item = (K, Value)>,
        K: AsRef<str>,
    {
        let id = RelId(self.next_rel);
        self.insert_rel_record(id, src, tgt, rel_type, props)?;
        self.next_rel += 1;
        Ok(id)
    }

    pub fn insert_rel_with_id<K, P>(
        &mut self,
        id: RelId,
        src: NodeId,
        tgt: NodeId,
        rel_type: &str,
        props: P,
    ) -> Result<(), GraphError>
    where
        P: IntoIterator<Item = (K, Value)>,
        K: AsRef<str>,
    {
        if self.rels.contains_key(&id) || id.0 == 0 {
            return Err(GraphError::DuplicateRel(id));
        }
        self.insert_rel_record(id, src, tgt, rel_type, props)?;
        self.next_rel = self.next_rel.max(id.0 + 1);
        Ok(())
    }

    fn insert_rel_record<K, P>(&mut self, id: RelId, src: NodeId, tgt: NodeId, rel_type: &str, props: P) -> Result<(), GraphError>
    where
        P: IntoIterator<Item = (K, Value)>,
        K: AsRef<str>,
    {
        for n in [src, tgt] {
            if !self.nodes.contains_key(&n) {
                return Err(GraphError::UnknownNode(n));
            }
        }
        let t = self.interner.intern(rel_type);
        let props = props
            .into_iter()
            .map(|(k, v)| (self.interner.intern(k.as_ref()), v))
            .collect();
        self.rels.insert(id, RelRecord { rel_type: t, src, tgt, props });
        *self.type_counts.entry(t).or_insert(0) += 1;
        insert_sorted(&mut self.nodes.get_mut(&src).expect("checked").out, id);
        insert_sorted(&mut self.nodes.get_mut(&tgt).expect("checked").inc, id);
        Ok(())
    }

    /// Removes a node together with every relationship touching it.
    pub fn delete_node(&mut self, id: NodeId) -> Result<(), GraphError> {
        let rec = self.nodes.get(&id).ok_or(GraphError::UnknownNode(id))?;
        let mut attached: Vec<RelId> = rec.out.iter().chain(rec.inc.iter()).copied().collect();
        attached.sort();
        attached.dedup();
        for r in attached {
            self.delete_rel(r)?;
        }
        let rec = self.nodes.remove(&id).expect("present");
        for l in &rec.labels {
            decrement(&mut self.label_counts, *l);
        }
        for idx in &mut self.indexes {
            if idx.covers(&rec) {
                if let Some(v) = rec.props.get(&idx.key) {
                    idx.remove(id, v);
                }
            }
        }
        Ok(())
    }

    pub fn delete_rel(&mut self, id: RelId) -> Result<(), GraphError> {
        let rec = self.rels.remove(&id).ok_or(GraphError::UnknownRel(id))?;
        decrement(&mut self.type_counts, rec.rel_type);
        if let Some(n) = self.nodes.get_mut(&rec.src) {
            n.out.retain(|r| *r != id);
        }
        if let Some(n) = self.nodes.get_mut(&rec.tgt) {
            n.inc.retain(|r| *r != id);
        }
        Ok(())
    }

    pub fn contains_node(&self, id: NodeId) -> bool {
        self.nodes.contains_key(&id)
    }

    pub fn contains_rel(&self, id: RelId) -> bool {
        self.rels.contains_key(&id)
    }

    pub fn node(&self, id: NodeId) -> Option<Node> {
        let rec = self.nodes.get(&id)?;
        Some(Node {
            id,
            labels: rec.labels.iter().map(|s| self.interner.resolve(*s).to_string()).collect(),
            properties: self.resolve_props(&rec.props),
        })
    }

    pub fn rel(&self, id: RelId) -> Option<Relationship> {
        let rec = self.rels.get(&id)?;
        Some(Relationship {
            id,
            rel_type: self.interner.resolve(rec.rel_type).to_string(),
            src: rec.src,
            tgt: rec.tgt,
            properties: self.resolve_props(&rec.props),
        })
    }

    fn resolve_props(&self, props: &BTreeMap<Sym, Value>) -> BTreeMap<String, Value> {
        props.iter().map(|(k, v)| (self.interner.resolve(*k).to_string(), v.clone())).collect()
    }

    /// Source, target and type of a relationship.
    pub fn rel_endpoints(&self, id: RelId) -> Option<(NodeId, NodeId, &str)> {
        self.rels.get(&id).map(|r| (r.src, r.tgt, self.interner.resolve(r.rel_type)))
    }

    pub fn has_label(&self, id: NodeId, label: &str) -> bool {
        match (self.nodes.get(&id), self.interner.get(label)) {
            (Some(rec), Some(sym)) => rec.labels.contains(&sym),
            _ => false,
        }
    }

    pub fn add_label(&mut self, id: NodeId, label: &str) -> Result<(), GraphError> {
        if !self.nodes.contains_key(&id) {
            return Err(GraphError::UnknownNode(id));
        }
        let sym = self.interner.intern(label);
        let rec = self.nodes.get_mut(&id).expect("checked");
        if !rec.labels.insert(sym) {
            return Ok(());
        }
        *self.label_counts.entry(sym).or_insert(0) += 1;
        let rec = &self.nodes[&id];
        for idx in &mut self.indexes {
            if idx.label == Some(sym) {
                if let Some(v) = rec.props.get(&idx.key) {
                    idx.insert(id, v);
                }
            }
        }
        Ok(())
    }

    /// Adjacent `(relationship, neighbour)` pairs in ascending relationship id.
    ///
    /// With [`Direction::Both`] a self-loop is reported once.
    pub fn expand(&self, id: NodeId, dir: Direction, rel_type: Option<&str>) -> Result<Expand<'_>, GraphError> {
        let rec = self.nodes.get(&id).ok_or(GraphError::UnknownNode(id))?;
        let type_filter = match rel_type {
            Some(t) => match self.interner.get(t) {
                Some(sym) => TypeFilter::Only(sym),
                None => TypeFilter::Nothing,
            },
            None => TypeFilter::Any,
        };
        let (out, inc): (&[RelId], &[RelId]) = match dir {
            Direction::Out => (&rec.out, &[]),
            Direction::In => (&[], &rec.inc),
            Direction::Both => (&rec.out, &rec.inc),
        };
        Ok(Expand { store: self, node: id, out, inc, type_filter, last: None })
    }

    pub fn degree(&self, id: NodeId, dir: Direction) -> usize {
        self.nodes.get(&id).map_or(0, |rec| match dir {
            Direction::Out => rec.out.len(),
            Direction::In => rec.inc.len(),
            Direction::Both => rec.out.len() + rec.inc.len(),
        })
    }

    /// All nodes, or all nodes carrying `label`, in ascending id order.
    pub fn scan<'a>(&'a self, label: Option<&str>) -> Box<dyn Iterator<Item = NodeId> + 'a> {
        match label {
            None => Box::new(self.nodes.keys().copied().inspect(|_| self.count_scanned())),
            Some(l) => match self.interner.get(l) {
                None => Box::new(std::iter::empty()),
                Some(sym) => Box::new(
                    self.nodes
                        .iter()
                        .inspect(|_| self.count_scanned())
                        .filter(move |(_, rec)| rec.labels.contains(&sym))
                        .map(|(id, _)| *id),
                ),
            },
        }
    }

    fn count_scanned(&self) {
        self.rows_scanned.fetch_add(1, Ordering::Relaxed);
    }

    /// Node records visited by scans since creation (instrumentation).
    pub fn rows_scanned(&self) -> u64 {
        self.rows_scanned.load(Ordering::Relaxed)
    }

    pub fn rel_ids(&self) -> impl Iterator<Item = RelId> + '_ {
        self.rels.keys().copied()
    }

    pub fn get_property(&self, entity: impl Into<Entity>, key: &str) -> Result<Option<&Value>, GraphError> {
        let props = self.props_of(entity.into())?;
        Ok(self.interner.get(key).and_then(|k| props.get(&k)))
    }

    pub fn set_property(&mut self, entity: impl Into<Entity>, key: &str, value: Value) -> Result<(), GraphError> {
        let entity = entity.into();
        self.props_of(entity)?;
        let k = self.interner.intern(key);
        match entity {
            Entity::Node(id) => {
                let rec = self.nodes.get_mut(&id).expect("checked");
                let old = rec.props.insert(k, value);
                let rec = &self.nodes[&id];
                for idx in self.indexes.iter_mut().filter(|i| i.key == k) {
                    if idx.covers(rec) {
                        if let Some(old) = &old {
                            idx.remove(id, old);
                        }
                        idx.insert(id, &rec.props[&k]);
                    }
                }
            }
            Entity::Rel(id) => {
                self.rels.get_mut(&id).expect("checked").props.insert(k, value);
            }
        }
        Ok(())
    }

    pub fn remove_property(&mut self, entity: impl Into<Entity>, key: &str) -> Result<Option<Value>, GraphError> {
        let entity = entity.into();
        self.props_of(entity)?;
        let Some(k) = self.interner.get(key) else { return Ok(None) };
        match entity {
            Entity::Node(id) => {
                let old = self.nodes.get_mut(&id).expect("checked").props.remove(&k);
                if let Some(old) = &old {
                    let rec = &self.nodes[&id];
                    for idx in self.indexes.iter_mut().filter(|i| i.key == k) {
                        if idx.covers(rec) {
                            idx.remove(id, old);
                        }
                    }
                }
                Ok(old)
            }
            Entity::Rel(id) => Ok(self.rels.get_mut(&id).expect("checked").props.remove(&k)),
        }
    }

    /// Property keys and values of an entity in key-name order.
    pub fn properties(&self, entity: impl Into<Entity>) -> Result<Vec<(&str, &Value)>, GraphError> {
        let props = self.props_of(entity.into())?;
        let mut out: Vec<_> = props.iter().map(|(k, v)| (self.interner.resolve(*k), v)).collect();
        out.sort_by(|a, b| a.0.cmp(b.0));
        Ok(out)
    }

    pub fn labels(&self, id: NodeId) -> Result<Vec<&str>, GraphError> {
        let rec = self.nodes.get(&id).ok_or(GraphError::UnknownNode(id))?;
        let mut out: Vec<_> = rec.labels.iter().map(|s| self.interner.resolve(*s)).collect();
        out.sort();
        Ok(out)
    }

    fn props_of(&self, entity: Entity) -> Result<&BTreeMap<Sym, Value>, GraphError> {
        match entity {
            Entity::Node(id) => self.nodes.get(&id).map(|r| &r.props).ok_or(GraphError::UnknownNode(id)),
            Entity::Rel(id) => self.rels.get(&id).map(|r| &r.props).ok_or(GraphError::UnknownRel(id)),
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn rel_count(&self) -> usize {
        self.rels.len()
    }

    pub fn next_ids(&self) -> (u64, u64) {
        (self.next_node, self.next_rel)
    }

    pub(crate) fn set_next_ids(&mut self, next_node: u64, next_rel: u64) {
        self.next_node = self.next_node.max(next_node);
        self.next_rel = self.next_rel.max(next_rel);
    }

    pub fn stats(&self) -> GraphStats {
        let node_count = self.nodes.len() as u64;
        let rel_count = self.rels.len() as u64;
        let resolve = |m: &HashMap<Sym, u64>| {
            m.iter()
                .filter(|(_, c)| **c > 0)
                .map(|(s, c)| (self.interner.resolve(*s).to_string(), *c))
                .collect()
        };
        GraphStats {
            node_count,
            rel_count,
            label_counts: resolve(&self.label_counts),
            rel_type_counts: resolve(&self.type_counts),
            avg_out_degree: if node_count == 0 { 0.0 } else { rel_count as f64 / node_count as f64 },
        }
    }

    /// Creates an index over `key` for nodes with `label` (or all nodes).
    pub fn create_index(&mut self, label: Option<&str>, key: &str) {
        let label = label.map(|l| self.interner.intern(l));
        let key = self.interner.intern(key);
        if self.indexes.iter().any(|i| i.label == label && i.key == key) {
            return;
        }
        let mut idx = PropertyIndex { label, key, entries: BTreeMap::new() };
        for (id, rec) in &self.nodes {
            if idx.covers(rec) {
                if let Some(v) = rec.props.get(&key) {
                    idx.insert(*id, v);
                }
            }
        }
        self.indexes.push(idx);
    }

    pub fn has_index(&self, label: Option<&str>, key: &str) -> bool {
        self.find_index(label, key).is_some()
    }

    /// `(label, key)` pairs that have an index, with `None` meaning all nodes.
    pub fn index_definitions(&self) -> Vec<(Option<String>, String)> {
        self.indexes
            .iter()
            .map(|i| {
                (
                    i.label.map(|l| self.interner.resolve(l).to_string()),
                    self.interner.resolve(i.key).to_string(),
                )
            })
            .collect()
    }

    fn find_index(&self, label: Option<&str>, key: &str) -> Option<&PropertyIndex> {
        let key = self.interner.get(key)?;
        let label = match label {
            Some(l) => Some(self.interner.get(l)?),
            None => None,
        };
        self.indexes.iter().find(|i| i.key == key && i.label == label)
    }

    /// Equality probe; `None` when no index exists for `(label, key)`.
    pub fn index_lookup(&self, label: Option<&str>, key: &str, value: &Value) -> Option<Vec<NodeId>> {
        let idx = self.find_index(label, key)?;
        let Some(k) = IndexKey::from_value(value) else { return Some(Vec::new()) };
        Some(idx.entries.get(&k).map(|s| s.iter().copied().collect()).unwrap_or_default())
    }

    /// Range probe over an ordered index; results in ascending id order.
    pub fn index_range(
        &self,
        label: Option<&str>,
        key: &str,
        lo: Bound<&Value>,
        hi: Bound<&Value>,
    ) -> Option<Vec<NodeId>> {
        let idx = self.find_index(label, key)?;
        let conv = |b: Bound<&Value>| -> Option<Bound<IndexKey>> {
            Some(match b {
                Bound::Included(v) => Bound::Included(IndexKey::from_value(v)?),
                Bound::Excluded(v) => Bound::Excluded(IndexKey::from_value(v)?),
                Bound::Unbounded => Bound::Unbounded,
            })
        };
        let (Some(lo), Some(hi)) = (conv(lo), conv(hi)) else { return Some(Vec::new()) };
        // keep the probe inside one key domain (numbers vs texts)
        let domain = match (&lo, &hi) {
            (Bound::Included(k) | Bound::Excluded(k), _) | (_, Bound::Included(k) | Bound::Excluded(k)) => {
                std::mem::discriminant(k)
            }
            _ => return Some(Vec::new()),
        };
        if let (Bound::Included(a) | Bound::Excluded(a), Bound::Included(b) | Bound::Excluded(b)) = (&lo, &hi) {
            if a > b {
                return Some(Vec::new());
            }
        }
        let mut out: Vec<NodeId> = idx
            .entries
            .range((lo, hi))
            .filter(|(k, _)| std::mem::discriminant(*k) == domain)
            .flat_map(|(_, ids)| ids.iter().copied())
            .collect();
        out.sort();
        Some(out)
    }
}

fn insert_sorted(v: &mut Vec<RelId>, id: RelId) {
    match v.last() {
        Some(last) if *last > id => {
            let pos = v.partition_point(|r| *r < id);
            v.insert(pos, id);
        }
        _ => v.push(id),
    }
}

fn decrement(m: &mut HashMap<Sym, u64>, k: Sym) {
    if let Some(c) = m.get_mut(&k) {
        *c = c.saturating_sub(1);
    }
}

#[derive(Clone, Copy)]
enum TypeFilter {
    Any,
    Only(Sym),
    Nothing,
}

/// Iterator over a node's adjacency, merging both lists for [`Direction::Both`].
pub struct Expand<'a> {
    store: &'a GraphStore,
    node: NodeId,
    out: &'a [RelId],
    inc: &'a [RelId],
    type_filter: TypeFilter,
    last: Option<RelId>,
}

impl Iterator for Expand<'_> {
    type Item = (RelId, NodeId);

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let take_out = match (self.out.first(), self.inc.first()) {
                (None, None) => return None,
                (Some(_), None) => true,
                (None, Some(_)) => false,
                (Some(a), Some(b)) => a <= b,
            };
            let rel = if take_out {
                let r = self.out[0];
                self.out = &self.out[1..];
                r
            } else {
                let r = self.inc[0];
                self.inc = &self.inc[1..];
                r
            };
            // self-loops sit in both lists
            if self.last == Some(rel) {
                continue;
            }
            self.last = Some(rel);
            let rec = &self.store.rels[&rel];
            match self.type_filter {
                TypeFilter::Nothing => return None,
                TypeFilter::Only(t) if rec.rel_type != t => continue,
                _ => {}
            }
            let other = if take_out { rec.tgt } else { rec.src };
            debug_assert!(if take_out { rec.src == self.node } else { rec.tgt == self.node });
            return Some((rel, other));
        }
    }
}
