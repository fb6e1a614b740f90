use sha2::{Digest, Sha256};

use crate::blob::BlobStore;
use crate::graph::{GraphStore, Value};

fn h(bytes: &[u8]) -> u64 {
    let d = Sha256::digest(bytes);
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

fn value_bytes(out: &mut Vec<u8>, v: &Value) {
    match v {
        Value::Integer(i) => {
            out.push(0);
            out.extend_from_slice(&i.to_le_bytes());
        }
        Value::Float(f) => {
            out.push(1);
            out.extend_from_slice(&f.to_bits().to_le_bytes());
        }
        Value::Text(s) => {
            out.push(2);
            out.extend_from_slice(&(s.len() as u64).to_le_bytes());
            out.extend_from_slice(s.as_bytes());
        }
        Value::Boolean(b) => out.extend_from_slice(&[3, *b as u8]),
        Value::Blob(id) => {
            out.push(4);
            out.extend_from_slice(&id.0.to_le_bytes());
        }
    }
}

fn str_bytes(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u64).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

/// Sum of per-element hashes over nodes, relationships and blob metadata,
/// so the result does not depend on insertion or iteration order.
pub fn state_digest(g: &GraphStore, blobs: &BlobStore) -> u64 {
    let mut acc = 0u64;
    let mut buf = Vec::new();
    for id in g.scan(None) {
        let n = g.node(id).expect("scanned node exists");
        buf.clear();
        buf.push(b'N');
        buf.extend_from_slice(&id.0.to_le_bytes());
        for l in &n.labels {
            str_bytes(&mut buf, l);
        }
        buf.push(0xff);
        for (k, v) in &n.properties {
            str_bytes(&mut buf, k);
            value_bytes(&mut buf, v);
        }
        acc = acc.wrapping_add(h(&buf));
    }
    for id in g.rel_ids() {
        let r = g.rel(id).expect("listed relationship exists");
        buf.clear();
        buf.push(b'R');
        for x in [id.0, r.src.0, r.tgt.0] {
            buf.extend_from_slice(&x.to_le_bytes());
        }
        str_bytes(&mut buf, &r.rel_type);
        for (k, v) in &r.properties {
            str_bytes(&mut buf, k);
            value_bytes(&mut buf, v);
        }
        acc = acc.wrapping_add(h(&buf));
    }
    for m in blobs.metas() {
        buf.clear();
        buf.push(b'B');
        buf.extend_from_slice(&m.id.0.to_le_bytes());
        buf.extend_from_slice(&m.length.to_le_bytes());
        str_bytes(&mut buf, &m.mime);
        acc = acc.wrapping_add(h(&buf));
    }
    acc
}
