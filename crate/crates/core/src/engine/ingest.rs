//! CSV loading.
//!
//! Nodes: `id,labels,<prop>...` with labels separated by `;` and an optional
//! `blob_path` column naming a file whose bytes become a BLOB property.
//! Relationships: `src,tgt,type,<prop>...`. Node ids in the file become the
//! store's node ids. Values are typed by shape: integer, float, `true` /
//! `false`, else text; empty cells are absent properties.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::{Database, DbError, MANIFEST_FILE};
use crate::codec::write_atomic;
use crate::graph::{GraphStore, NodeId, Value};

pub const BLOB_COLUMN: &str = "blob_path";

#[derive(Debug, Clone)]
pub struct IngestSpec {
    pub nodes: Vec<PathBuf>,
    pub rels: Vec<PathBuf>,
    /// Base for relative `blob_path` cells; defaults to the CSV's directory.
    pub blob_dir: Option<PathBuf>,
    /// Property that receives the blob from `blob_path`.
    pub blob_property: String,
}

impl Default for IngestSpec {
    fn default() -> Self {
        IngestSpec { nodes: Vec::new(), rels: Vec::new(), blob_dir: None, blob_property: "photo".into() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rejected {
    pub file: PathBuf,
    /// 1-based line of the record, counting the header as line 1.
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IngestReport {
    /// The same inputs were loaded before; nothing was applied.
    pub already_loaded: bool,
    pub rows: u64,
    pub nodes_created: u64,
    pub rels_created: u64,
    pub blobs_created: u64,
    pub rejected: Vec<Rejected>,
}

pub fn parse_cell(s: &str) -> Option<Value> {
    let s = s.trim();
    if s.is_empty() {
        return None;
    }
    Some(if let Ok(i) = s.parse::<i64>() {
        Value::Integer(i)
    } else if let Ok(f) = s.parse::<f64>().map_err(|_| ()).and_then(|f| if f.is_finite() { Ok(f) } else { Err(()) }) {
        Value::Float(f)
    } else if s == "true" || s == "false" {
        Value::Boolean(s == "true")
    } else {
        Value::Text(s.to_string())
    })
}

struct Table {
    path: PathBuf,
    header: Vec<String>,
    records: Vec<(u64, csv::StringRecord)>,
}

fn read_table(path: &Path, required: &[&str]) -> Result<Table, DbError> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(path)
        .map_err(|e| DbError::Data(format!("{}: {e}", path.display())))?;
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| DbError::Data(format!("{}: {e}", path.display())))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if header.len() < required.len() || header[..required.len()] != *required {
        return Err(DbError::Data(format!(
            "{}: header must start with {}, found {}",
            path.display(),
            required.join(","),
            header.join(",")
        )));
    }
    let mut seen = HashSet::new();
    for h in &header {
        if h.is_empty() || !seen.insert(h) {
            return Err(DbError::Data(format!("{}: empty or repeated column `{h}`", path.display())));
        }
    }
    let mut records = Vec::new();
    for r in rdr.records() {
        let r = r.map_err(|e| DbError::Data(format!("{}: {e}", path.display())))?;
        let line = r.position().map(|p| p.line()).unwrap_or(0);
        records.push((line, r));
    }
    Ok(Table { path: path.to_path_buf(), header, records })
}

fn fingerprint(spec: &IngestSpec) -> Result<String, DbError> {
    let mut h = Sha256::new();
    for (tag, files) in [("nodes", &spec.nodes), ("rels", &spec.rels)] {
        for f in files {
            h.update(tag.as_bytes());
            let bytes = std::fs::read(f).map_err(|e| DbError::Data(format!("{}: {e}", f.display())))?;
            h.update((bytes.len() as u64).to_le_bytes());
            h.update(&bytes);
        }
    }
    h.update(spec.blob_property.as_bytes());
    let mut s = String::new();
    for b in h.finalize() {
        let _ = write!(s, "{b:02x}");
    }
    Ok(s)
}

/// Loads the inputs unless the manifest shows an identical earlier load.
/// Every header is checked before any row is applied.
pub fn load(db: &Database, spec: &IngestSpec) -> Result<IngestReport, DbError> {
    let fp = fingerprint(spec)?;
    let manifest = db.dir().map(|d| d.join(MANIFEST_FILE));
    let previous = match &manifest {
        Some(m) if m.exists() => std::fs::read_to_string(m)?,
        _ => String::new(),
    };
    if previous.lines().any(|l| l.split_whitespace().next() == Some(fp.as_str())) {
        return Ok(IngestReport { already_loaded: true, ..Default::default() });
    }
    let node_tables: Vec<Table> = spec.nodes.iter().map(|p| read_table(p, &["id", "labels"])).collect::<Result<_, _>>()?;
    let rel_tables: Vec<Table> = spec.rels.iter().map(|p| read_table(p, &["src", "tgt", "type"])).collect::<Result<_, _>>()?;

    let mut report = IngestReport::default();
    {
        let mut g = db.graph_mut();
        for t in &node_tables {
            load_nodes(db, &mut g, t, spec, &mut report);
        }
        for t in &rel_tables {
            load_rels(&mut g, t, &mut report);
        }
    }
    db.checkpoint()?;
    if let Some(m) = manifest {
        let mut text = previous;
        let names: Vec<String> = spec.nodes.iter().chain(&spec.rels).map(|p| p.display().to_string()).collect();
        let _ = writeln!(text, "{fp} {}", names.join(" "));
        write_atomic(&m, text.as_bytes())?;
    }
    Ok(report)
}

fn load_nodes(db: &Database, g: &mut GraphStore, t: &Table, spec: &IngestSpec, report: &mut IngestReport) {
    let base = spec.blob_dir.clone().unwrap_or_else(|| t.path.parent().map(Path::to_path_buf).unwrap_or_default());
    let reject = |line: u64, reason: String, report: &mut IngestReport| {
        report.rejected.push(Rejected { file: t.path.clone(), line, reason });
    };
    for (line, r) in &t.records {
        report.rows += 1;
        if r.len() != t.header.len() {
            reject(*line, format!("expected {} fields, found {}", t.header.len(), r.len()), report);
            continue;
        }
        let id = match r[0].trim().parse::<u64>() {
            Ok(0) | Err(_) => {
                reject(*line, format!("invalid node id `{}`", &r[0]), report);
                continue;
            }
            Ok(i) => NodeId(i),
        };
        if g.contains_node(id) {
            reject(*line, format!("duplicate node id {}", id.0), report);
            continue;
        }
        let labels: Vec<&str> = r[1].split(';').map(str::trim).filter(|l| !l.is_empty()).collect();
        let mut props = Vec::new();
        let mut failed = None;
        for (h, cell) in t.header.iter().zip(r.iter()).skip(2) {
            if h == BLOB_COLUMN {
                if cell.trim().is_empty() {
                    continue;
                }
                let p = base.join(cell.trim());
                match std::fs::read(&p).map_err(|e| e.to_string()).and_then(|bytes| {
                    db.blobs().put_bytes(&bytes, "application/octet-stream").map_err(|e| e.to_string())
                }) {
                    Ok(b) => {
                        report.blobs_created += 1;
                        props.push((spec.blob_property.clone(), Value::Blob(b)));
                    }
                    Err(e) => {
                        failed = Some(format!("blob {}: {e}", p.display()));
                        break;
                    }
                }
            } else if let Some(v) = parse_cell(cell) {
                props.push((h.clone(), v));
            }
        }
        if let Some(reason) = failed {
            reject(*line, reason, report);
            continue;
        }
        g.insert_node_with_id(id, labels, props).expect("id checked unused");
        report.nodes_created += 1;
    }
}

fn load_rels(g: &mut GraphStore, t: &Table, report: &mut IngestReport) {
    for (line, r) in &t.records {
        report.rows += 1;
        let mut reject = |reason: String| report.rejected.push(Rejected { file: t.path.clone(), line: *line, reason });
        if r.len() != t.header.len() {
            reject(format!("expected {} fields, found {}", t.header.len(), r.len()));
            continue;
        }
        let ends: Vec<Option<NodeId>> = [&r[0], &r[1]]
            .iter()
            .map(|s| s.trim().parse::<u64>().ok().map(NodeId).filter(|n| g.contains_node(*n)))
            .collect();
        let (Some(src), Some(tgt)) = (ends[0], ends[1]) else {
            reject(format!("unknown endpoint in `{},{}`", &r[0], &r[1]));
            continue;
        };
        let ty = r[2].trim();
        if ty.is_empty() {
            reject("empty relationship type".into());
            continue;
        }
        let props: Vec<(String, Value)> =
            t.header.iter().zip(r.iter()).skip(3).filter_map(|(h, c)| parse_cell(c).map(|v| (h.clone(), v))).collect();
        g.create_rel(src, tgt, ty, props).expect("endpoints checked");
        report.rels_created += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_typing() {
        assert_eq!(parse_cell(" 42 "), Some(Value::Integer(42)));
        assert_eq!(parse_cell("2.5"), Some(Value::Float(2.5)));
        assert_eq!(parse_cell("true"), Some(Value::Boolean(true)));
        assert_eq!(parse_cell("NaN"), Some(Value::from("NaN")));
        assert_eq!(parse_cell("Michael Jordan"), Some(Value::from("Michael Jordan")));
        assert_eq!(parse_cell(""), None);
    }
}
