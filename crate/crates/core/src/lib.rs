//! Embedded property-graph database with BLOB-valued properties, semantic
//! extraction over those BLOBs, and a cost-based query planner.

pub mod blob;
pub mod codec;
pub mod extraction;
pub mod graph;
pub mod index;
pub mod query;
pub mod planner;
pub mod exec;
pub mod engine;
pub mod replication;
