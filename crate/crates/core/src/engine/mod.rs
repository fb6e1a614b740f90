//! The embedded database: one graph, its blob store, the extraction service
//! and the planner's speed statistics, optionally persisted in a data
//! directory.
//!
//! ```text
//! <data dir>/config          key = value settings written by init
//! <data dir>/graph.snap      graph snapshot with inline blob payloads
//! <data dir>/blobs/          external blob rows and metadata
//! <data dir>/semantic.cache  extracted values
//! <data dir>/speed.stats     per-filter speed estimates
//! <data dir>/manifest        content hashes of loaded inputs
//! ```
//!
//! Reads run concurrently under a shared lock; a write statement holds the
//! exclusive lock from matching through applying its effects.

mod config;
mod digest;
pub mod ingest;
mod write;

pub use config::{Config, ConfigError};
pub use digest::state_digest;
pub use write::{Mutation, WriteSummary};

use std::collections::HashMap;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use parking_lot::{RwLock, RwLockReadGuard, RwLockWriteGuard};
use thiserror::Error;

use crate::blob::{BlobError, BlobStore};
use crate::codec::write_atomic;
use crate::exec::{
    self, BlobFetcher, Clock, ExecContext, ExecError, FileFetcher, FilterWork, QueryResult, SystemClock,
};
use crate::extraction::{builtin, DefaultComparator, ExtractionError, ExtractionService, SubKey};
use crate::graph::{read_snapshot, write_snapshot, GraphError, GraphStore, Value};
use crate::planner::{CostModel, Optimizer, PlanContext, PlanError, PlanNode, SpeedRegistry};
use crate::query::{parse, to_query_graph, Query, QueryError, QueryGraph};

pub const CONFIG_FILE: &str = "config";
pub const SNAPSHOT_FILE: &str = "graph.snap";
pub const BLOB_DIR: &str = "blobs";
pub const CACHE_FILE: &str = "semantic.cache";
pub const SPEED_FILE: &str = "speed.stats";
pub const MANIFEST_FILE: &str = "manifest";

#[derive(Debug, Error)]
pub enum DbError {
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Exec(#[from] ExecError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Blob(#[from] BlobError),
    #[error(transparent)]
    Extraction(#[from] ExtractionError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
    #[error("{0}")]
    Data(String),
}

impl DbError {
    /// Whether the failure lies in user-supplied input rather than the engine.
    pub fn is_data_error(&self) -> bool {
        match self {
            DbError::Query(_) | DbError::Config(_) | DbError::Data(_) => true,
            DbError::Exec(e) => matches!(
                e.root(),
                ExecError::UnknownParam(_) | ExecError::Type(_) | ExecError::SourceUnavailable(_) | ExecError::Unbound(_)
            ),
            _ => false,
        }
    }
}

/// Which planner produces the executed plan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PlanChoice {
    #[default]
    Greedy,
    Naive,
    Exhaustive,
}

#[derive(Debug, Clone, Default)]
pub struct QueryOptions {
    pub plan: PlanChoice,
    pub batch_size: Option<usize>,
    pub in_flight: Option<usize>,
}

/// A result together with what it took to produce.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub result: QueryResult,
    pub plan: Arc<PlanNode>,
    pub work: Vec<FilterWork>,
    pub index_probes: u64,
    pub write: Option<WriteSummary>,
}

pub struct Database {
    config: Config,
    dir: Option<PathBuf>,
    graph: RwLock<GraphStore>,
    extraction: Arc<ExtractionService>,
    speeds: SpeedRegistry,
    clock: Arc<dyn Clock>,
    fetcher: Arc<dyn BlobFetcher>,
    model: CostModel,
    autocheckpoint: bool,
}

impl Database {
    pub fn in_memory(config: Config) -> Result<Self, DbError> {
        let blobs = Arc::new(BlobStore::in_memory(config.blob_config())?);
        Self::assemble(config, None, GraphStore::new(), blobs)
    }

    /// Creates the directory layout (keeping an existing config file) and opens it.
    pub fn init(dir: &Path, config: Config) -> Result<Self, DbError> {
        std::fs::create_dir_all(dir)?;
        let cfg_path = dir.join(CONFIG_FILE);
        if !cfg_path.exists() {
            write_atomic(&cfg_path, config.to_text().as_bytes())?;
        }
        let db = Self::open(dir, config)?;
        db.checkpoint()?;
        Ok(db)
    }

    /// Opens an existing data directory. Settings stored in its config file
    /// take precedence over `config`.
    pub fn open(dir: &Path, config: Config) -> Result<Self, DbError> {
        if !dir.is_dir() {
            return Err(DbError::Data(format!("{} is not a database directory", dir.display())));
        }
        let cfg_path = dir.join(CONFIG_FILE);
        let config = if cfg_path.exists() { Config::load(&cfg_path)? } else { config };
        let blobs = Arc::new(BlobStore::open(dir.join(BLOB_DIR), config.blob_config())?);
        let snap = dir.join(SNAPSHOT_FILE);
        let graph = if snap.exists() {
            let bytes = std::fs::read(&snap)?;
            let contents = read_snapshot(&mut bytes.as_slice())?;
            for (id, payload) in contents.inline_blobs {
                blobs.restore_inline(id, payload)?;
            }
            contents.graph
        } else {
            GraphStore::new()
        };
        let db = Self::assemble(config, Some(dir.to_path_buf()), graph, blobs)?;
        let cache = dir.join(CACHE_FILE);
        if cache.exists() {
            db.extraction.load_cache(&cache)?;
        }
        Ok(db)
    }

    fn assemble(config: Config, dir: Option<PathBuf>, graph: GraphStore, blobs: Arc<BlobStore>) -> Result<Self, DbError> {
        let extraction = Arc::new(ExtractionService::new(blobs));
        builtin::register_defaults(&extraction)?;
        for (sub, t) in &config.thresholds {
            extraction.register_comparator(SubKey::new(sub), Arc::new(DefaultComparator { threshold: *t }));
        }
        let speeds = match &dir {
            Some(d) => SpeedRegistry::load(&d.join(SPEED_FILE), config.ema_k)?,
            None => SpeedRegistry::new(config.ema_k),
        };
        let fetcher = Arc::new(FileFetcher { base: dir.clone() });
        Ok(Database {
            config,
            dir,
            graph: RwLock::new(graph),
            extraction,
            speeds,
            clock: Arc::new(SystemClock::default()),
            fetcher,
            model: CostModel::default(),
            autocheckpoint: true,
        })
    }

    pub fn with_clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    pub fn with_fetcher(mut self, fetcher: Arc<dyn BlobFetcher>) -> Self {
        self.fetcher = fetcher;
        self
    }

    pub fn with_cost_model(mut self, model: CostModel) -> Self {
        self.model = model;
        self
    }

    /// Whether file-backed databases persist after every write statement.
    pub fn set_autocheckpoint(&mut self, on: bool) {
        self.autocheckpoint = on;
    }

    pub fn config(&self) -> &Config {
        &self.config
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    pub fn graph(&self) -> RwLockReadGuard<'_, GraphStore> {
        self.graph.read()
    }

    /// Direct mutable access for loaders and administrative changes.
    pub fn graph_mut(&self) -> RwLockWriteGuard<'_, GraphStore> {
        self.graph.write()
    }

    pub fn extraction(&self) -> &Arc<ExtractionService> {
        &self.extraction
    }

    pub fn blobs(&self) -> &Arc<BlobStore> {
        self.extraction.blobs()
    }

    pub fn speeds(&self) -> &SpeedRegistry {
        &self.speeds
    }

    pub fn clock(&self) -> &Arc<dyn Clock> {
        &self.clock
    }

    pub fn create_index(&self, label: Option<&str>, key: &str) -> Result<(), DbError> {
        self.graph.write().create_index(label, key);
        self.persist()
    }

    pub fn query(&self, text: &str, params: &HashMap<String, Value>) -> Result<QueryResult, DbError> {
        Ok(self.run(text, params, &QueryOptions::default())?.result)
    }

    /// Plans and executes one statement.
    pub fn run(&self, text: &str, params: &HashMap<String, Value>, opts: &QueryOptions) -> Result<Outcome, DbError> {
        let q = parse(text)?;
        let qg = to_query_graph(&q)?;
        if q.is_write() {
            return self.run_write(&q, &qg, params, opts);
        }
        let g = self.graph.read();
        let plan = self.plan_for(&g, &qg, opts.plan)?;
        let ctx = self.context(&g, &qg, params, opts);
        let result = exec::execute(&plan, &ctx)?;
        Ok(Outcome {
            result,
            plan,
            work: ctx.counters.work(),
            index_probes: ctx.counters.index_probes(),
            write: None,
        })
    }

    fn run_write(
        &self,
        q: &Query,
        qg: &QueryGraph,
        params: &HashMap<String, Value>,
        opts: &QueryOptions,
    ) -> Result<Outcome, DbError> {
        let mut g = self.graph.write();
        let plan = self.plan_for(&g, qg, opts.plan)?;
        let (planner, work, probes) = {
            let ctx = self.context(&g, qg, params, opts);
            let mut rows = exec::matches(&plan, &ctx)?;
            // effects such as id allocation follow row order, which must not
            // depend on the plan (replicas may plan differently)
            rows.sort_by_cached_key(|r| {
                let mut k: Vec<String> = r.iter().map(|(v, b)| format!("{v}\u{0}{}", b.join_key())).collect();
                k.sort();
                k
            });
            let mut w = write::WritePlanner::new(&g);
            for row in rows {
                w.row(&ctx, q, row)?;
            }
            w.validate(&g)?;
            (w, ctx.counters.work(), ctx.counters.index_probes())
        };
        let summary = write::apply(&mut g, &planner.mutations)?;
        let g = RwLockWriteGuard::downgrade(g);
        let ctx = self.context(&g, qg, params, opts);
        let result = exec::project_rows(&plan, planner.rows, &ctx)?;
        let mut work_all = work;
        work_all.extend(ctx.counters.work());
        drop(ctx);
        drop(g);
        self.persist()?;
        Ok(Outcome { result, plan, work: work_all, index_probes: probes, write: Some(summary) })
    }

    fn context<'a>(
        &'a self,
        g: &'a GraphStore,
        qg: &QueryGraph,
        params: &'a HashMap<String, Value>,
        opts: &QueryOptions,
    ) -> ExecContext<'a> {
        let mut ctx = ExecContext::new(g, &self.extraction, &self.speeds, params, &*self.clock, &*self.fetcher);
        ctx.named_paths = qg.paths.clone();
        ctx.batch_size = opts.batch_size.unwrap_or(self.config.batch_size);
        ctx.in_flight = opts.in_flight.unwrap_or(self.config.in_flight);
        ctx
    }

    fn plan_for(&self, g: &GraphStore, qg: &QueryGraph, choice: PlanChoice) -> Result<Arc<PlanNode>, PlanError> {
        let pctx = PlanContext::capture(g, &self.speeds);
        let o = Optimizer::new(qg, &pctx, &self.model);
        match choice {
            PlanChoice::Greedy => Ok(o.optimize()?.plan),
            PlanChoice::Naive => o.naive(),
            PlanChoice::Exhaustive => o.exhaustive(),
        }
    }

    /// The plan the optimizer would choose now.
    pub fn plan(&self, text: &str, choice: PlanChoice) -> Result<Arc<PlanNode>, DbError> {
        let qg = to_query_graph(&parse(text)?)?;
        Ok(self.plan_for(&self.graph.read(), &qg, choice)?)
    }

    pub fn explain(&self, text: &str) -> Result<String, DbError> {
        Ok(self.plan(text, PlanChoice::Greedy)?.explain())
    }

    fn persist(&self) -> Result<(), DbError> {
        if self.autocheckpoint && self.dir.is_some() {
            self.checkpoint()?;
        }
        Ok(())
    }

    /// Writes the graph snapshot, semantic cache and speed statistics.
    pub fn checkpoint(&self) -> Result<(), DbError> {
        let Some(dir) = &self.dir else { return Ok(()) };
        let mut buf = Vec::new();
        {
            let g = self.graph.read();
            write_snapshot(&mut buf, &g, &self.blobs().inline_payloads())?;
        }
        write_atomic(&dir.join(SNAPSHOT_FILE), &buf)?;
        self.extraction.save_cache(&dir.join(CACHE_FILE))?;
        self.speeds.save(&dir.join(SPEED_FILE))?;
        Ok(())
    }

    /// Order-independent hash of the logical state.
    pub fn digest(&self) -> u64 {
        state_digest(&self.graph.read(), self.blobs())
    }
}
