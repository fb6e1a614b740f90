//! Property graph storage.
//!
//! Nodes and relationships carry labels, a relationship type and key/value
//! properties. Adjacency is index-free: each node holds its own incoming and
//! outgoing relationship lists.

mod snapshot;
mod store;
mod value;

pub mod fixture;

pub use snapshot::{read_snapshot, write_snapshot, SnapshotContents, SNAPSHOT_MAGIC, SNAPSHOT_VERSION};
pub use store::{
    Direction, Entity, Expand, GraphStats, GraphStore, Interner, Node, NodeId, RelId, Relationship, Sym,
};
pub use value::{IndexKey, Value};

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("unknown node {}", .0 .0)]
    UnknownNode(NodeId),
    #[error("unknown relationship {}", .0 .0)]
    UnknownRel(RelId),
    #[error("node id {} already in use", .0 .0)]
    DuplicateNode(NodeId),
    #[error("relationship id {} already in use", .0 .0)]
    DuplicateRel(RelId),
}
