//! Pull-based execution of logical plans.
//!
//! Every operator is an iterator over [`Row`]s. Unstructured filters pull
//! their input in batches so extraction for a batch can run concurrently,
//! and report measured per-row time back to the speed registry when they
//! are exhausted.

mod clock;
mod eval;
mod ops;
mod paths;
mod row;

pub use clock::{Clock, SimClock, SimulatedLatency, SystemClock};
pub use eval::literal;
pub use ops::{build, BoxOp, Operator};
pub use paths::shortest_path;
pub use row::{Binding, Path, Row};

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use parking_lot::Mutex;
use thiserror::Error;

use crate::blob::{BlobError, BlobId};
use crate::extraction::{ExtractionError, ExtractionService};
use crate::graph::{GraphError, GraphStore, Value};
use crate::planner::{LogicalOp, PlanError, PlanNode, SpeedRegistry};
use crate::query::{BlobSource, NamedPath};

pub const DEFAULT_BATCH_SIZE: usize = 1024;
pub const DEFAULT_IN_FLIGHT: usize = 8;

#[derive(Debug, Error)]
pub enum ExecError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Extraction(#[from] ExtractionError),
    #[error(transparent)]
    Blob(#[from] BlobError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error("unknown parameter ${0}")]
    UnknownParam(String),
    #[error("variable {0} is not bound")]
    Unbound(String),
    #[error("type error: {0}")]
    Type(String),
    #[error("source unavailable: {0}")]
    SourceUnavailable(String),
    #[error("in {op}: {source}")]
    At { op: String, source: Box<ExecError> },
}

impl ExecError {
    /// Attaches the failing operator, keeping the innermost position.
    pub fn at(self, op: &str) -> ExecError {
        match self {
            e @ ExecError::At { .. } => e,
            e => ExecError::At { op: op.to_string(), source: Box::new(e) },
        }
    }

    /// The error without operator position.
    pub fn root(&self) -> &ExecError {
        match self {
            ExecError::At { source, .. } => source.root(),
            e => e,
        }
    }
}

/// Resolves `fromURL` arguments to bytes.
pub trait BlobFetcher: Send + Sync {
    fn fetch(&self, url: &str) -> Result<Vec<u8>, String>;
}

/// Serves `file://` URLs and bare paths, optionally relative to a base
/// directory. Network schemes are rejected.
#[derive(Debug, Default, Clone)]
pub struct FileFetcher {
    pub base: Option<PathBuf>,
}

impl FileFetcher {
    pub fn resolve(&self, arg: &str) -> Result<PathBuf, String> {
        let path = match arg.split_once("://") {
            Some(("file", rest)) => rest,
            Some((scheme, _)) => return Err(format!("unsupported scheme {scheme}:// in {arg}")),
            None => arg,
        };
        let p = PathBuf::from(path);
        Ok(match &self.base {
            Some(b) if p.is_relative() => b.join(p),
            _ => p,
        })
    }
}

impl BlobFetcher for FileFetcher {
    fn fetch(&self, url: &str) -> Result<Vec<u8>, String> {
        let p = self.resolve(url)?;
        std::fs::read(&p).map_err(|e| format!("{}: {e}", p.display()))
    }
}

/// Instrumentation shared by the operators of one execution.
#[derive(Debug, Default)]
pub struct ExecCounters {
    pub index_probes: AtomicU64,
    work: Mutex<Vec<FilterWork>>,
}

/// Time spent in one timed filter over one execution.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterWork {
    pub filter_id: String,
    pub secs: f64,
    pub rows: u64,
}

impl ExecCounters {
    pub fn record_work(&self, filter_id: &str, secs: f64, rows: u64) {
        self.work.lock().push(FilterWork { filter_id: filter_id.to_string(), secs, rows });
    }

    pub fn work(&self) -> Vec<FilterWork> {
        self.work.lock().clone()
    }

    pub fn index_probes(&self) -> u64 {
        self.index_probes.load(Ordering::Relaxed)
    }
}

/// Everything a plan needs at run time. The graph is read-only here; writes
/// are applied by the caller after the matching rows are materialized.
pub struct ExecContext<'a> {
    pub graph: &'a GraphStore,
    pub extraction: &'a ExtractionService,
    pub speeds: &'a SpeedRegistry,
    pub params: &'a HashMap<String, Value>,
    pub clock: &'a dyn Clock,
    pub fetcher: &'a dyn BlobFetcher,
    pub named_paths: Vec<NamedPath>,
    pub in_flight: usize,
    pub batch_size: usize,
    pub counters: ExecCounters,
    pub(crate) literal_blobs: Mutex<HashMap<(BlobSource, String), BlobId>>,
}

impl<'a> ExecContext<'a> {
    pub fn new(
        graph: &'a GraphStore,
        extraction: &'a ExtractionService,
        speeds: &'a SpeedRegistry,
        params: &'a HashMap<String, Value>,
        clock: &'a dyn Clock,
        fetcher: &'a dyn BlobFetcher,
    ) -> Self {
        ExecContext {
            graph,
            extraction,
            speeds,
            params,
            clock,
            fetcher,
            named_paths: Vec::new(),
            in_flight: DEFAULT_IN_FLIGHT,
            batch_size: DEFAULT_BATCH_SIZE,
            counters: ExecCounters::default(),
            literal_blobs: Mutex::new(HashMap::new()),
        }
    }

    /// Blobs ingested by `fromFile`/`fromURL`/`fromBytes` during this execution.
    pub fn ingested_blobs(&self) -> Vec<BlobId> {
        let mut v: Vec<BlobId> = self.literal_blobs.lock().values().copied().collect();
        v.sort();
        v
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct QueryResult {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Binding>>,
}

impl QueryResult {
    /// Rows as sorted display strings, for order-insensitive comparison.
    pub fn multiset(&self) -> Vec<String> {
        let mut v: Vec<String> =
            self.rows.iter().map(|r| r.iter().map(|b| b.to_string()).collect::<Vec<_>>().join("\t")).collect();
        v.sort();
        v
    }
}

/// Runs `plan` to completion. A projection root defines the columns; any
/// other root yields its bound variables.
pub fn execute(plan: &PlanNode, ctx: &ExecContext<'_>) -> Result<QueryResult, ExecError> {
    let columns: Vec<String> = match &plan.op {
        LogicalOp::Projection { items, .. } => items.iter().map(|i| i.column()).collect(),
        _ => {
            let mut v: Vec<String> = plan.bound.iter().cloned().collect();
            v.sort();
            v
        }
    };
    let rows = ops::drain(build(plan, ctx)?)?;
    let rows = rows
        .into_iter()
        .map(|r| columns.iter().map(|c| r.get(c).cloned().unwrap_or(Binding::Null)).collect())
        .collect();
    Ok(QueryResult { columns, rows })
}

/// Rows produced below the projection, with all pattern variables bound.
pub fn matches(plan: &PlanNode, ctx: &ExecContext<'_>) -> Result<Vec<Row>, ExecError> {
    let below = match &plan.op {
        LogicalOp::Projection { .. } => plan.inputs[0].clone(),
        _ => Arc::new(plan.clone()),
    };
    ops::drain(build(&below, ctx)?)
}

/// Applies the projection at the root of `plan` to rows computed elsewhere.
pub fn project_rows(plan: &PlanNode, rows: Vec<Row>, ctx: &ExecContext<'_>) -> Result<QueryResult, ExecError> {
    let LogicalOp::Projection { items, .. } = &plan.op else {
        return Ok(QueryResult::default());
    };
    let columns: Vec<String> = items.iter().map(|i| i.column()).collect();
    let op = ops::project_over(plan, rows, ctx)?;
    let rows = ops::drain(op)?
        .into_iter()
        .map(|r| columns.iter().map(|c| r.get(c).cloned().unwrap_or(Binding::Null)).collect())
        .collect();
    Ok(QueryResult { columns, rows })
}
