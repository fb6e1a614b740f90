use std::io::{self, Write};

use blobgraph::blob::BlobStore;
use blobgraph::exec::{Binding, QueryResult};
use blobgraph::extraction::SemanticValue;
use blobgraph::graph::Value;
use serde_json::{json, Map, Value as Json};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Tsv,
    JsonLines,
}

/// `blob:<id>:<mime>:<length>`; unknown blobs keep only the id.
fn blob_text(id: blobgraph::blob::BlobId, blobs: &BlobStore) -> String {
    match blobs.blob_meta(id) {
        Ok(m) => format!("blob:{}:{}:{}", id.0, m.mime, m.length),
        Err(_) => format!("blob:{}", id.0),
    }
}

fn escape_tsv(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\\' => out.push_str("\\\\"),
            c => out.push(c),
        }
    }
    out
}

pub fn cell(b: &Binding, blobs: &BlobStore) -> String {
    match b {
        Binding::Value(Value::Blob(id)) => blob_text(*id, blobs),
        Binding::Value(Value::Text(s)) => escape_tsv(s),
        other => escape_tsv(&other.to_string()),
    }
}

pub fn json_value(b: &Binding, blobs: &BlobStore) -> Json {
    match b {
        Binding::Null => Json::Null,
        Binding::Node(n) => json!({ "node": n.0 }),
        Binding::Rel(r) => json!({ "rel": r.0 }),
        Binding::Path(p) => json!({
            "nodes": p.nodes.iter().map(|n| n.0).collect::<Vec<_>>(),
            "rels": p.rels.iter().map(|r| r.0).collect::<Vec<_>>(),
        }),
        Binding::Value(v) => match v {
            Value::Integer(i) => json!(i),
            Value::Float(f) => serde_json::Number::from_f64(*f).map_or_else(|| json!(f.to_string()), Json::Number),
            Value::Text(s) => json!(s),
            Value::Boolean(x) => json!(x),
            Value::Blob(id) => json!(blob_text(*id, blobs)),
        },
        Binding::Semantic(s) => match s {
            SemanticValue::Vector(v) => json!(v),
            SemanticValue::Number(x) => json!(x),
            SemanticValue::Text(t) | SemanticValue::Categorical(t) => json!(t),
        },
    }
}

pub fn write_result(out: &mut impl Write, r: &QueryResult, blobs: &BlobStore, format: Format) -> io::Result<()> {
    if r.columns.is_empty() {
        return Ok(());
    }
    match format {
        Format::Tsv => {
            writeln!(out, "{}", r.columns.iter().map(|c| escape_tsv(c)).collect::<Vec<_>>().join("\t"))?;
            for row in &r.rows {
                writeln!(out, "{}", row.iter().map(|b| cell(b, blobs)).collect::<Vec<_>>().join("\t"))?;
            }
        }
        Format::JsonLines => {
            for row in &r.rows {
                let obj: Map<String, Json> =
                    r.columns.iter().cloned().zip(row.iter().map(|b| json_value(b, blobs))).collect();
                writeln!(out, "{}", Json::Object(obj))?;
            }
        }
    }
    Ok(())
}
