mod bench;
mod output;
mod repl;

use std::collections::HashMap;
use std::fmt;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use blobgraph::engine::ingest::{load, parse_cell, IngestSpec};
use blobgraph::engine::{Config, ConfigError, Database, DbError, PlanChoice, QueryOptions};
use blobgraph::graph::Value;
use blobgraph::replication::{convergence_scenario, ReplError, SimConfig};
use clap::{Args, Parser, Subcommand, ValueEnum};

use output::Format;

#[derive(Parser, Debug)]
#[command(name = "blobgraph", version, about = "Property-graph database with BLOB properties")]
struct Cli {
    /// Config file (`key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Data directory; overrides `data_dir` from the config.
    #[arg(long, global = true)]
    data: Option<PathBuf>,
    /// Seed for randomized commands.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, value_enum, default_value = "tsv")]
    format: Format,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Create the data directory layout.
    Init,
    /// Load nodes and relationships from CSV files.
    Load {
        #[arg(long, required = true)]
        nodes: Vec<PathBuf>,
        #[arg(long)]
        rels: Vec<PathBuf>,
        /// Base directory for `blob_path` cells; defaults to each CSV's directory.
        #[arg(long)]
        blob_dir: Option<PathBuf>,
        #[arg(long, default_value = "photo")]
        blob_property: String,
    },
    /// Run a statement, or every `;`-terminated statement of a file.
    Query(QueryArgs),
    /// Print the optimized plan.
    Explain {
        text: String,
        #[arg(long, value_enum, default_value = "greedy")]
        plan: PlanArg,
    },
    /// Interactive session reading statements from stdin.
    Repl,
    /// Vector index recall and latency against brute force.
    BenchIndex(BenchArgs),
    /// Simulated replicated cluster under random writes.
    ClusterSim(SimArgs),
}

#[derive(Args, Debug)]
struct QueryArgs {
    text: Option<String>,
    #[arg(long, conflicts_with = "text")]
    file: Option<PathBuf>,
    /// Parameters as `k=v,...`; values are typed like CSV cells.
    #[arg(long)]
    params: Option<String>,
    #[arg(long, value_enum, default_value = "greedy")]
    plan: PlanArg,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long, default_value_t = 10_000)]
    vectors: usize,
    #[arg(long, default_value_t = 64)]
    dim: usize,
    /// Gaussian clusters; 0 draws uniform vectors.
    #[arg(long, default_value_t = 0)]
    clusters: usize,
    /// Bucket count; defaults to the config's divisor rule.
    #[arg(long)]
    buckets: Option<u64>,
    /// Buckets probed per query, or `all`.
    #[arg(long, default_value = "all")]
    nprobe: String,
    #[arg(long, default_value_t = 500)]
    repeats: usize,
    #[arg(long, value_delimiter = ',', default_values_t = [1usize, 10, 100, 500])]
    k: Vec<usize>,
}

#[derive(Args, Debug)]
struct SimArgs {
    /// Replicas present from the start; defaults to the config.
    #[arg(long)]
    replicas: Option<usize>,
    #[arg(long, default_value_t = 1000)]
    writes: usize,
    /// The late joiner starts this many versions behind the leader.
    #[arg(long, default_value_t = 100)]
    lag: u64,
    #[arg(long)]
    drop_rate: Option<f64>,
    #[arg(long)]
    max_delay: Option<u64>,
    /// Print the full event trace.
    #[arg(long)]
    trace: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PlanArg {
    Greedy,
    Naive,
    Exhaustive,
}

impl From<PlanArg> for PlanChoice {
    fn from(p: PlanArg) -> Self {
        match p {
            PlanArg::Greedy => PlanChoice::Greedy,
            PlanArg::Naive => PlanChoice::Naive,
            PlanArg::Exhaustive => PlanChoice::Exhaustive,
        }
    }
}

/// Failure classes map to exit codes 1 (usage), 2 (data) and 3 (engine).
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Engine(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Engine(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Engine(m) => write!(f, "engine error: {m}"),
        }
    }
}

impl From<DbError> for CliError {
    fn from(e: DbError) -> Self {
        let msg = e.to_string().replace('\n', " ");
        if e.is_data_error() {
            CliError::Data(msg)
        } else {
            CliError::Engine(msg)
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<ReplError> for CliError {
    fn from(e: ReplError) -> Self {
        match e {
            ReplError::Engine(e) => e.into(),
            other => CliError::Engine(other.to_string()),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Engine(e.to_string())
    }
}

fn parse_params(s: Option<&str>) -> Result<HashMap<String, Value>, CliError> {
    let mut out = HashMap::new();
    for pair in s.unwrap_or("").split(',').filter(|p| !p.trim().is_empty()) {
        let (k, v) = pair.split_once('=').ok_or_else(|| CliError::Usage(format!("parameter `{pair}` is not k=v")))?;
        let v = parse_cell(v).unwrap_or_else(|| Value::from(""));
        out.insert(k.trim().to_string(), v);
    }
    Ok(out)
}

/// Splits a script on `;` outside single- or double-quoted strings.
pub fn split_statements(script: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut quote: Option<char> = None;
    let mut escaped = false;
    for c in script.chars() {
        cur.push(c);
        match quote {
            Some(_) if escaped => escaped = false,
            Some(_) if c == '\\' => escaped = true,
            Some(q) if c == q => quote = None,
            Some(_) => {}
            None if c == '\'' || c == '"' => quote = Some(c),
            None if c == ';' => {
                cur.pop();
                if !cur.trim().is_empty() {
                    out.push(cur.trim().to_string());
                }
                cur.clear();
            }
            None => {}
        }
    }
    if !cur.trim().is_empty() {
        out.push(cur.trim().to_string());
    }
    out
}

struct Env {
    config: Config,
    data: Option<PathBuf>,
}

impl Env {
    fn new(cli: &Cli) -> Result<Self, CliError> {
        let config = match &cli.config {
            Some(p) => Config::load(p)?,
            None => Config::default(),
        };
        let data = cli.data.clone().or_else(|| config.data_dir.clone());
        Ok(Env { config, data })
    }

    fn dir(&self) -> Result<&Path, CliError> {
        self.data.as_deref().ok_or_else(|| CliError::Usage("no data directory: pass --data or set data_dir".into()))
    }

    fn open(&self) -> Result<Database, CliError> {
        Ok(Database::open(self.dir()?, self.config.clone())?)
    }
}

fn run_statement(
    db: &Database,
    text: &str,
    params: &HashMap<String, Value>,
    plan: PlanChoice,
    format: Format,
    out: &mut impl Write,
) -> Result<(), CliError> {
    let outcome = db.run(text, params, &QueryOptions { plan, ..Default::default() })?;
    output::write_result(out, &outcome.result, db.blobs(), format)?;
    if let Some(w) = outcome.write {
        eprintln!(
            "nodes created {}, relationships created {}, properties set {}, nodes deleted {}, relationships deleted {}",
            w.nodes_created, w.rels_created, w.properties_set, w.nodes_deleted, w.rels_deleted
        );
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    let env = Env::new(&cli)?;
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match cli.cmd {
        Cmd::Init => {
            let dir = env.dir()?;
            Database::init(dir, env.config.clone())?;
            writeln!(out, "initialized {}", dir.display())?;
        }
        Cmd::Load { nodes, rels, blob_dir, blob_property } => {
            let db = env.open()?;
            let report = load(&db, &IngestSpec { nodes, rels, blob_dir, blob_property })?;
            if report.already_loaded {
                writeln!(out, "already loaded; nothing to do")?;
            } else {
                writeln!(
                    out,
                    "rows {}\tnodes {}\trelationships {}\tblobs {}\trejected {}",
                    report.rows,
                    report.nodes_created,
                    report.rels_created,
                    report.blobs_created,
                    report.rejected.len()
                )?;
                for r in &report.rejected {
                    eprintln!("rejected {}:{}: {}", r.file.display(), r.line, r.reason);
                }
            }
        }
        Cmd::Query(q) => {
            let db = env.open()?;
            let params = parse_params(q.params.as_deref())?;
            let statements = match (&q.text, &q.file) {
                (Some(t), None) => vec![t.clone()],
                (None, Some(f)) => split_statements(
                    &std::fs::read_to_string(f).map_err(|e| CliError::Data(format!("{}: {e}", f.display())))?,
                ),
                _ => return Err(CliError::Usage("give a statement or --file".into())),
            };
            for s in statements {
                run_statement(&db, &s, &params, q.plan.into(), cli.format, &mut out)?;
            }
        }
        Cmd::Explain { text, plan } => {
            let db = env.open()?;
            let p = db.plan(&text, plan.into())?;
            write!(out, "{}", p.explain())?;
        }
        Cmd::Repl => {
            let db = env.open()?;
            let stdin = io::stdin();
            repl::run(&db, stdin.lock(), &mut out, cli.format)?;
        }
        Cmd::BenchIndex(b) => {
            let nprobe = match b.nprobe.as_str() {
                "all" => None,
                n => Some(n.parse().map_err(|_| CliError::Usage(format!("--nprobe: `{n}` is not a number or `all`")))?),
            };
            let spec = bench::BenchSpec {
                vectors: b.vectors,
                dim: b.dim,
                clusters: b.clusters,
                buckets: b.buckets,
                bucket_divisor: env.config.bucket_divisor,
                min_buckets: env.config.min_buckets,
                nprobe,
                repeats: b.repeats,
                ks: b.k,
                seed: cli.seed,
            };
            let (rows, buckets) = bench::run(&spec).map_err(|e| CliError::Engine(e.to_string()))?;
            writeln!(out, "# {} vectors, dim {}, {buckets} buckets, {} repeats", spec.vectors, spec.dim, spec.repeats)?;
            writeln!(out, "k\tnprobe\tmin_recall\tmax_recall\tavg_recall\tavg_query_us")?;
            for r in rows {
                writeln!(out, "{}\t{}\t{:.3}\t{:.3}\t{:.3}\t{:.1}", r.k, r.nprobe, r.min, r.max, r.avg, r.avg_micros)?;
            }
        }
        Cmd::ClusterSim(s) => {
            let cfg = SimConfig {
                replicas: s.replicas.unwrap_or(env.config.cluster_replicas),
                drop_rate: s.drop_rate.unwrap_or(env.config.cluster_drop_rate),
                max_delay: s.max_delay.unwrap_or(env.config.cluster_max_delay),
                seed: cli.seed,
                ..SimConfig::default()
            };
            if !(0.0..1.0).contains(&cfg.drop_rate) {
                return Err(CliError::Usage("--drop-rate must be in [0, 1)".into()));
            }
            let report = convergence_scenario(cfg, s.writes, s.lag)?;
            if s.trace {
                write!(out, "{}", report.trace)?;
            }
            writeln!(out, "replica\tversion\tdigest")?;
            for (i, (v, d)) in report.versions.iter().zip(&report.digests).enumerate() {
                writeln!(out, "{i}\t{v}\t{d:016x}")?;
            }
            writeln!(
                out,
                "# converged {}, gapless {}, late joiner replayed {}, {} ticks, {} sent, {} dropped",
                report.converged(),
                report.gapless,
                report.joined_replayed,
                report.ticks,
                report.stats.sent,
                report.stats.dropped
            )?;
            if !report.converged() || !report.gapless {
                return Err(CliError::Engine("replicas did not converge".into()));
            }
        }
    }
    out.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.code())
        }
    }
}
