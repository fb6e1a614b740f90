use std::collections::{HashMap, VecDeque};

use crate::graph::{Direction, GraphError, GraphStore, NodeId, RelId};

use super::row::Path;

/// Minimum-hop undirected path from `a` to `b` with between `min` and `max`
/// hops. Among equally short paths the lexicographically smallest node
/// sequence wins, then the smallest relationship ids.
pub fn shortest_path(
    g: &GraphStore,
    a: NodeId,
    b: NodeId,
    rel_type: Option<&str>,
    min: u32,
    max: u32,
) -> Result<Option<Path>, GraphError> {
    for n in [a, b] {
        if !g.contains_node(n) {
            return Err(GraphError::UnknownNode(n));
        }
    }
    if a == b {
        return Ok((min == 0).then(|| Path::single(a)));
    }
    let dist = bfs(g, b, rel_type, max)?;
    let Some(&d) = dist.get(&a) else { return Ok(None) };
    if d < min {
        return longer_simple_path(g, a, b, rel_type, min, max);
    }
    let mut path = Path::single(a);
    let mut cur = a;
    while cur != b {
        let want = dist[&cur] - 1;
        let mut best: Option<(NodeId, RelId)> = None;
        for (r, v) in g.expand(cur, Direction::Both, rel_type)? {
            if dist.get(&v) == Some(&want) && best.is_none_or(|bv| (v, r) < bv) {
                best = Some((v, r));
            }
        }
        let (v, r) = best.expect("bfs distance implies a closer neighbour");
        path.nodes.push(v);
        path.rels.push(r);
        cur = v;
    }
    Ok(Some(path))
}

/// Hop distances to `from` over undirected edges, up to `max`.
fn bfs(g: &GraphStore, from: NodeId, rel_type: Option<&str>, max: u32) -> Result<HashMap<NodeId, u32>, GraphError> {
    let mut dist = HashMap::from([(from, 0u32)]);
    let mut queue = VecDeque::from([from]);
    while let Some(u) = queue.pop_front() {
        let du = dist[&u];
        if du == max {
            continue;
        }
        for (_, v) in g.expand(u, Direction::Both, rel_type)? {
            if let std::collections::hash_map::Entry::Vacant(e) = dist.entry(v) {
                e.insert(du + 1);
                queue.push_back(v);
            }
        }
    }
    Ok(dist)
}

/// Smallest simple path of at least `min` hops, for ranges that exclude the
/// true distance.
fn longer_simple_path(
    g: &GraphStore,
    a: NodeId,
    b: NodeId,
    rel_type: Option<&str>,
    min: u32,
    max: u32,
) -> Result<Option<Path>, GraphError> {
    fn dfs(
        g: &GraphStore,
        path: &mut Path,
        b: NodeId,
        rel_type: Option<&str>,
        len: u32,
    ) -> Result<bool, GraphError> {
        let cur = *path.nodes.last().unwrap();
        if path.hops() as u32 == len {
            return Ok(cur == b);
        }
        let mut next: Vec<(NodeId, RelId)> =
            g.expand(cur, Direction::Both, rel_type)?.map(|(r, v)| (v, r)).filter(|(v, _)| !path.nodes.contains(v)).collect();
        next.sort();
        for (v, r) in next {
            if v == b && (path.hops() as u32 + 1) < len {
                continue;
            }
            path.nodes.push(v);
            path.rels.push(r);
            if dfs(g, path, b, rel_type, len)? {
                return Ok(true);
            }
            path.nodes.pop();
            path.rels.pop();
        }
        Ok(false)
    }
    for len in min.max(1)..=max {
        let mut p = Path::single(a);
        if dfs(g, &mut p, b, rel_type, len)? {
            return Ok(Some(p));
        }
    }
    Ok(None)
}
