//! The small sports graph used throughout the docs and tests: eight nodes
//! (players, teams, a pet and a league) and eight relationships.

use super::{GraphStore, Value};

/// `(labels, name)` for nodes 1..=8.
pub const SPORTS_NODES: [(&str, &str); 8] = [
    ("Person", "Michael Jordan"),
    ("Team", "Chicago Bulls"),
    ("Pet", "Mimi"),
    ("Person", "Kerr"),
    ("Team", "Gold State Warriors"),
    ("Person", "Steven Kerr"),
    ("Organization", "NBA"),
    ("Person", "Scott Pippen"),
];

/// `(src, tgt, type)` for relationships 1..=8, using 1-based node numbers.
pub const SPORTS_RELS: [(u64, u64, &str); 8] = [
    (1, 2, "workFor"),
    (1, 3, "hasPet"),
    (1, 4, "teamMate"),
    (4, 2, "workFor"),
    (6, 5, "coachOf"),
    (5, 7, "belongTo"),
    (2, 7, "belongTo"),
    (1, 8, "teamMate"),
];

pub fn sports_graph() -> GraphStore {
    let mut g = GraphStore::new();
    for (label, name) in SPORTS_NODES {
        g.create_node([label], [("name", Value::from(name))]);
    }
    for (s, t, ty) in SPORTS_RELS {
        g.create_rel(super::NodeId(s), super::NodeId(t), ty, [("since", Value::Integer(1990))])
            .expect("fixture endpoints exist");
    }
    g
}
