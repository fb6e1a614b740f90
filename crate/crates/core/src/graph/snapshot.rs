//! Binary snapshot of a [`GraphStore`].
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "PGRF" | version u16 | section*
//! section := tag [u8; 4] | body_len u64 | body
//! NODE  := next_id u64 | count u64 | (id u64 | n_labels u32 | str*)*
//! RELS  := next_id u64 | count u64 | (id u64 | src u64 | tgt u64 | type str)*
//! PROP  := count u64 | entry*
//!          entry := 0 | node u64 | key str | value
//!                 | 1 | rel u64  | key str | value
//!                 | 2 | blob u64 | len u64 | bytes      (inline BLOB payload)
//! IDXS  := count u64 | (has_label u8 | label str? | key str)*
//! str   := len u32 | utf8
//! value := 0 i64 | 1 f64 | 2 str | 3 u8 | 4 blob_id u64
//! ```
//!
//! Unknown section tags are skipped on read.

use std::io::{self, Read, Write};

use crate::blob::BlobId;
use crate::codec::{read_bytes, read_str, read_u16, read_u32, read_u64, read_u8, write_bytes, write_str};

use super::{GraphStore, NodeId, RelId, Value};

pub const SNAPSHOT_MAGIC: &[u8; 4] = b"PGRF";
pub const SNAPSHOT_VERSION: u16 = 1;

/// What a snapshot restores: the graph plus inline BLOB payloads.
pub struct SnapshotContents {
    pub graph: GraphStore,
    pub inline_blobs: Vec<(BlobId, Vec<u8>)>,
}

pub fn write_snapshot<W: Write>(w: &mut W, g: &GraphStore, inline_blobs: &[(BlobId, Vec<u8>)]) -> io::Result<()> {
    w.write_all(SNAPSHOT_MAGIC)?;
    w.write_all(&SNAPSHOT_VERSION.to_le_bytes())?;

    let (next_node, next_rel) = g.next_ids();
    let nodes: Vec<NodeId> = g.scan(None).collect();
    let mut body = Vec::new();
    body.extend_from_slice(&next_node.to_le_bytes());
    body.extend_from_slice(&(nodes.len() as u64).to_le_bytes());
    for n in &nodes {
        body.extend_from_slice(&n.0.to_le_bytes());
        let labels = g.labels(*n).expect("scanned");
        body.extend_from_slice(&(labels.len() as u32).to_le_bytes());
        for l in labels {
            write_str(&mut body, l)?;
        }
    }
    write_section(w, b"NODE", &body)?;

    body.clear();
    let rels: Vec<RelId> = g.rel_ids().collect();
    body.extend_from_slice(&next_rel.to_le_bytes());
    body.extend_from_slice(&(rels.len() as u64).to_le_bytes());
    for r in &rels {
        let (s, t, ty) = g.rel_endpoints(*r).expect("listed");
        for x in [r.0, s.0, t.0] {
            body.extend_from_slice(&x.to_le_bytes());
        }
        write_str(&mut body, ty)?;
    }
    write_section(w, b"RELS", &body)?;

    body.clear();
    let mut entries = Vec::new();
    let mut count = 0u64;
    for n in &nodes {
        for (k, v) in g.properties(*n).expect("scanned") {
            entries.push(0u8);
            entries.extend_from_slice(&n.0.to_le_bytes());
            write_str(&mut entries, k)?;
            write_value(&mut entries, v)?;
            count += 1;
        }
    }
    for r in &rels {
        for (k, v) in g.properties(*r).expect("listed") {
            entries.push(1u8);
            entries.extend_from_slice(&r.0.to_le_bytes());
            write_str(&mut entries, k)?;
            write_value(&mut entries, v)?;
            count += 1;
        }
    }
    for (id, bytes) in inline_blobs {
        entries.push(2u8);
        entries.extend_from_slice(&id.0.to_le_bytes());
        write_bytes(&mut entries, bytes)?;
        count += 1;
    }
    body.extend_from_slice(&count.to_le_bytes());
    body.extend_from_slice(&entries);
    write_section(w, b"PROP", &body)?;

    body.clear();
    let defs = g.index_definitions();
    body.extend_from_slice(&(defs.len() as u64).to_le_bytes());
    for (label, key) in defs {
        match label {
            Some(l) => {
                body.push(1);
                write_str(&mut body, &l)?;
            }
            None => body.push(0),
        }
        write_str(&mut body, &key)?;
    }
    write_section(w, b"IDXS", &body)?;
    Ok(())
}

fn write_section<W: Write>(w: &mut W, tag: &[u8; 4], body: &[u8]) -> io::Result<()> {
    w.write_all(tag)?;
    w.write_all(&(body.len() as u64).to_le_bytes())?;
    w.write_all(body)
}

fn write_value(w: &mut Vec<u8>, v: &Value) -> io::Result<()> {
    match v {
        Value::Integer(i) => {
            w.push(0);
            w.extend_from_slice(&i.to_le_bytes());
        }
        Value::Float(f) => {
            w.push(1);
            w.extend_from_slice(&f.to_le_bytes());
        }
        Value::Text(s) => {
            w.push(2);
            write_str(w, s)?;
        }
        Value::Boolean(b) => {
            w.push(3);
            w.push(*b as u8);
        }
        Value::Blob(id) => {
            w.push(4);
            w.extend_from_slice(&id.0.to_le_bytes());
        }
    }
    Ok(())
}

fn read_value<R: Read>(r: &mut R) -> io::Result<Value> {
    Ok(match read_u8(r)? {
        0 => Value::Integer(read_u64(r)? as i64),
        1 => Value::Float(f64::from_bits(read_u64(r)?)),
        2 => Value::Text(read_str(r)?),
        3 => Value::Boolean(read_u8(r)? != 0),
        4 => Value::Blob(BlobId(read_u64(r)?)),
        t => return Err(invalid(format!("unknown value tag {t}"))),
    })
}

fn invalid(msg: impl Into<String>) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg.into())
}

pub fn read_snapshot<R: Read>(r: &mut R) -> io::Result<SnapshotContents> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != SNAPSHOT_MAGIC {
        return Err(invalid("not a graph snapshot"));
    }
    let version = read_u16(r)?;
    if version != SNAPSHOT_VERSION {
        return Err(invalid(format!("unsupported snapshot version {version}")));
    }
    let mut g = GraphStore::new();
    let mut inline_blobs = Vec::new();
    let mut next_ids = (1, 1);
    let mut props: Vec<(u8, u64, String, Value)> = Vec::new();
    loop {
        let mut tag = [0u8; 4];
        match r.read_exact(&mut tag) {
            Ok(()) => {}
            Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => break,
            Err(e) => return Err(e),
        }
        let len = read_u64(r)?;
        let body = read_bytes_exact(r, len)?;
        let mut b = body.as_slice();
        match &tag {
            b"NODE" => {
                next_ids.0 = read_u64(&mut b)?;
                for _ in 0..read_u64(&mut b)? {
                    let id = NodeId(read_u64(&mut b)?);
                    let n = read_u32(&mut b)?;
                    let labels = (0..n).map(|_| read_str(&mut b)).collect::<io::Result<Vec<_>>>()?;
                    g.insert_node_with_id(id, labels, Vec::<(String, Value)>::new())
                        .map_err(|e| invalid(e.to_string()))?;
                }
            }
            b"RELS" => {
                next_ids.1 = read_u64(&mut b)?;
                for _ in 0..read_u64(&mut b)? {
                    let id = RelId(read_u64(&mut b)?);
                    let s = NodeId(read_u64(&mut b)?);
                    let t = NodeId(read_u64(&mut b)?);
                    let ty = read_str(&mut b)?;
                    g.insert_rel_with_id(id, s, t, &ty, Vec::<(String, Value)>::new())
                        .map_err(|e| invalid(e.to_string()))?;
                }
            }
            b"PROP" => {
                for _ in 0..read_u64(&mut b)? {
                    let kind = read_u8(&mut b)?;
                    let id = read_u64(&mut b)?;
                    match kind {
                        0 | 1 => {
                            let key = read_str(&mut b)?;
                            props.push((kind, id, key, read_value(&mut b)?));
                        }
                        2 => inline_blobs.push((BlobId(id), read_bytes(&mut b)?)),
                        k => return Err(invalid(format!("unknown property owner kind {k}"))),
                    }
                }
            }
            b"IDXS" => {
                for _ in 0..read_u64(&mut b)? {
                    let label = match read_u8(&mut b)? {
                        0 => None,
                        _ => Some(read_str(&mut b)?),
                    };
                    let key = read_str(&mut b)?;
                    g.create_index(label.as_deref(), &key);
                }
            }
            _ => {}
        }
    }
    for (kind, id, key, value) in props {
        let res = if kind == 0 {
            g.set_property(NodeId(id), &key, value)
        } else {
            g.set_property(RelId(id), &key, value)
        };
        res.map_err(|e| invalid(e.to_string()))?;
    }
    g.set_next_ids(next_ids.0, next_ids.1);
    Ok(SnapshotContents { graph: g, inline_blobs })
}

fn read_bytes_exact<R: Read>(r: &mut R, len: u64) -> io::Result<Vec<u8>> {
    let mut buf = Vec::new();
    r.take(len).read_to_end(&mut buf)?;
    if buf.len() as u64 != len {
        return Err(invalid("truncated section"));
    }
    Ok(buf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{fixture, Direction};

    #[test]
    fn snapshot_round_trip_preserves_everything() {
        let mut g = fixture::sports_graph();
        g.create_index(Some("Person"), "name");
        g.set_property(NodeId(4), "photo", Value::Blob(BlobId(3))).unwrap();
        g.set_property(NodeId(4), "score", Value::Float(0.25)).unwrap();
        let doomed = g.create_node(["Tmp"], [("x", Value::Boolean(false))]);
        g.delete_node(doomed).unwrap();
        let inline = vec![(BlobId(3), vec![1, 2, 3])];

        let mut buf = Vec::new();
        write_snapshot(&mut buf, &g, &inline).unwrap();
        assert_eq!(&buf[..4], b"PGRF");
        assert_eq!(u16::from_le_bytes([buf[4], buf[5]]), 1);

        let back = read_snapshot(&mut buf.as_slice()).unwrap();
        let h = back.graph;
        assert_eq!(back.inline_blobs, inline);
        assert_eq!(h.stats(), g.stats());
        for n in g.scan(None) {
            assert_eq!(h.node(n), g.node(n));
            let a: Vec<_> = g.expand(n, Direction::Both, None).unwrap().collect();
            let b: Vec<_> = h.expand(n, Direction::Both, None).unwrap().collect();
            assert_eq!(a, b);
        }
        for r in g.rel_ids() {
            assert_eq!(h.rel(r), g.rel(r));
        }
        assert_eq!(h.next_ids(), g.next_ids());
        assert!(h.has_index(Some("Person"), "name"));
    }

    #[test]
    fn rejects_bad_magic() {
        let err = read_snapshot(&mut &b"XXXX\x01\x00"[..]).err().unwrap();
        assert_eq!(err.kind(), io::ErrorKind::InvalidData);
    }
}
