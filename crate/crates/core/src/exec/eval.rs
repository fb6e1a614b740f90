use std::cmp::Ordering;

use crate::blob::BlobId;
use crate::extraction::{SemanticKind, SemanticValue, SubKey, DEFAULT_SUB_KEY};
use crate::graph::{Entity, Value};
use crate::query::{BlobSource, CmpOp, Expr, Literal};

use super::row::{Binding, Path, Row};
use super::{paths, ExecContext, ExecError};

impl ExecContext<'_> {
    /// Evaluates `e` against `row` with three-valued logic: a comparison
    /// involving `null` is `null`, and filters keep only `true`.
    pub fn eval(&self, e: &Expr, row: &Row) -> Result<Binding, ExecError> {
        Ok(match e {
            Expr::Lit(l) => Binding::Value(literal(l)),
            Expr::Param(p) => {
                Binding::Value(self.params.get(p).cloned().ok_or_else(|| ExecError::UnknownParam(p.clone()))?)
            }
            Expr::Var(v) => self.lookup(v, row)?,
            Expr::Prop(base, key) => match self.eval(base, row)? {
                Binding::Null => Binding::Null,
                Binding::Node(n) => self.property(Entity::Node(n), key)?,
                Binding::Rel(r) => self.property(Entity::Rel(r), key)?,
                other => return Err(ExecError::Type(format!("cannot read property `{key}` of {other}"))),
            },
            Expr::SubProp(base, key) => match self.eval(base, row)? {
                Binding::Null => Binding::Null,
                Binding::Value(Value::Blob(id)) => Binding::Semantic(self.extraction.extract(id, &SubKey::new(key))?),
                other => return Err(ExecError::Type(format!("`->{key}` needs a BLOB, got {other}"))),
            },
            Expr::HasLabel(v, l) => match self.lookup(v, row)? {
                Binding::Null => Binding::Null,
                Binding::Node(n) => Binding::Value(Value::Boolean(self.graph.has_label(n, l))),
                other => return Err(ExecError::Type(format!("{other} has no labels"))),
            },
            Expr::BlobFn(src, arg) => match self.eval(arg, row)? {
                Binding::Value(Value::Text(s)) => Binding::Value(Value::Blob(self.create_from_source(*src, &s)?)),
                other => return Err(ExecError::Type(format!("Blob.{} needs a text argument, got {other}", src.name()))),
            },
            Expr::Cmp(op, a, b) => self.compare(*op, a, b, row)?,
            Expr::And(a, b) => {
                let l = truth(self.eval(a, row)?)?;
                if l == Some(false) {
                    return Ok(Binding::Value(Value::Boolean(false)));
                }
                let r = truth(self.eval(b, row)?)?;
                match (l, r) {
                    (_, Some(false)) => Binding::Value(Value::Boolean(false)),
                    (Some(true), Some(true)) => Binding::Value(Value::Boolean(true)),
                    _ => Binding::Null,
                }
            }
            Expr::Or(a, b) => {
                let l = truth(self.eval(a, row)?)?;
                if l == Some(true) {
                    return Ok(Binding::Value(Value::Boolean(true)));
                }
                let r = truth(self.eval(b, row)?)?;
                match (l, r) {
                    (_, Some(true)) => Binding::Value(Value::Boolean(true)),
                    (Some(false), Some(false)) => Binding::Value(Value::Boolean(false)),
                    _ => Binding::Null,
                }
            }
            Expr::Not(x) => match truth(self.eval(x, row)?)? {
                Some(b) => Binding::Value(Value::Boolean(!b)),
                None => Binding::Null,
            },
            Expr::ShortestPath(sp) => match (self.lookup(&sp.from, row)?, self.lookup(&sp.to, row)?) {
                (Binding::Node(a), Binding::Node(b)) => {
                    match paths::shortest_path(self.graph, a, b, sp.rel_type.as_deref(), sp.min_hops, sp.max_hops)? {
                        Some(p) => Binding::Path(p),
                        None => Binding::Null,
                    }
                }
                _ => Binding::Null,
            },
        })
    }

    /// Whether `e` holds for `row`; `null` counts as false.
    pub fn holds(&self, e: &Expr, row: &Row) -> Result<bool, ExecError> {
        Ok(truth(self.eval(e, row)?)? == Some(true))
    }

    fn lookup(&self, var: &str, row: &Row) -> Result<Binding, ExecError> {
        if let Some(b) = row.get(var) {
            return Ok(b.clone());
        }
        let Some(np) = self.named_paths.iter().find(|p| p.var == var) else {
            return Err(ExecError::Unbound(var.to_string()));
        };
        let mut path = Path { nodes: Vec::new(), rels: Vec::new() };
        for n in &np.nodes {
            match row.get(n) {
                Some(Binding::Node(id)) => path.nodes.push(*id),
                _ => return Err(ExecError::Unbound(n.clone())),
            }
        }
        for r in &np.rels {
            match row.get(r) {
                Some(Binding::Rel(id)) => path.rels.push(*id),
                _ => return Err(ExecError::Unbound(r.clone())),
            }
        }
        Ok(Binding::Path(path))
    }

    fn property(&self, e: Entity, key: &str) -> Result<Binding, ExecError> {
        Ok(match self.graph.get_property(e, key)? {
            Some(v) => Binding::Value(v.clone()),
            None => Binding::Null,
        })
    }

    /// Ingests a BLOB literal once per query; the same source text yields the
    /// same id for the rest of the execution.
    pub fn create_from_source(&self, src: BlobSource, arg: &str) -> Result<BlobId, ExecError> {
        let key = (src, arg.to_string());
        if let Some(id) = self.literal_blobs.lock().get(&key) {
            return Ok(*id);
        }
        let id = self.ingest_source(src, arg)?;
        self.literal_blobs.lock().insert(key, id);
        Ok(id)
    }

    /// Ingests a BLOB from its source; every call stores a new BLOB.
    pub fn ingest_source(&self, src: BlobSource, arg: &str) -> Result<BlobId, ExecError> {
        let bytes = match src {
            BlobSource::Url => self.fetcher.fetch(arg).map_err(ExecError::SourceUnavailable)?,
            BlobSource::File => {
                std::fs::read(arg).map_err(|e| ExecError::SourceUnavailable(format!("{arg}: {e}")))?
            }
            BlobSource::Bytes => decode_hex(arg)
                .ok_or_else(|| ExecError::SourceUnavailable(format!("`{arg}` is not a hex byte string")))?,
        };
        Ok(self.extraction.blobs().put_bytes(&bytes, "application/octet-stream")?)
    }

    fn compare(&self, op: CmpOp, a: &Expr, b: &Expr, row: &Row) -> Result<Binding, ExecError> {
        let (va, vb) = (self.eval(a, row)?, self.eval(b, row)?);
        if va.is_null() || vb.is_null() {
            return Ok(Binding::Null);
        }
        let CmpOp::Sem(symbol) = op else { return structured_compare(op, va, vb) };
        let sub = SubKey::new(&comparison_sub_key(a, b));
        let (sa, sb) = (self.semantic(va, &sub)?, self.semantic(vb, &sub)?);
        let (sa, sb) = align_kinds(sa, sb);
        Ok(Binding::Value(self.extraction.compare(Some(&sub), symbol, &sa, &sb)?))
    }

    fn semantic(&self, b: Binding, sub: &SubKey) -> Result<SemanticValue, ExecError> {
        Ok(match b {
            Binding::Semantic(s) => s,
            Binding::Value(Value::Blob(id)) => self.extraction.extract(id, sub)?,
            Binding::Value(Value::Text(t)) => SemanticValue::Text(t),
            Binding::Value(v) if v.as_f64().is_some() => SemanticValue::Number(v.as_f64().unwrap()),
            other => return Err(ExecError::Type(format!("{other} has no semantic value"))),
        })
    }

    /// BLOBs whose extraction evaluating `e` on `row` will need.
    pub fn pending_extractions(&self, e: &Expr, row: &Row, out: &mut Vec<(BlobId, SubKey)>) {
        match e {
            Expr::SubProp(base, key) => {
                if let Ok(Binding::Value(Value::Blob(id))) = self.eval(base, row) {
                    out.push((id, SubKey::new(key)));
                }
            }
            Expr::Cmp(CmpOp::Sem(_), a, b) => {
                let sub = SubKey::new(&comparison_sub_key(a, b));
                for side in [a, b] {
                    match side.as_ref() {
                        Expr::SubProp(..) => self.pending_extractions(side, row, out),
                        other => {
                            if let Ok(Binding::Value(Value::Blob(id))) = self.eval(other, row) {
                                out.push((id, sub.clone()));
                            }
                        }
                    }
                }
            }
            Expr::Cmp(_, a, b) | Expr::And(a, b) | Expr::Or(a, b) => {
                self.pending_extractions(a, row, out);
                self.pending_extractions(b, row, out);
            }
            Expr::Not(x) | Expr::Prop(x, _) => self.pending_extractions(x, row, out),
            _ => {}
        }
    }
}

/// Sub-property governing a semantic comparison: the one named by `->` on
/// either side, else the default.
fn comparison_sub_key(a: &Expr, b: &Expr) -> String {
    for side in [a, b] {
        if let Expr::SubProp(_, k) = side {
            return k.clone();
        }
    }
    DEFAULT_SUB_KEY.to_string()
}

/// Text literals compared with categorical values are categories.
fn align_kinds(a: SemanticValue, b: SemanticValue) -> (SemanticValue, SemanticValue) {
    match (a, b) {
        (SemanticValue::Text(t), b) if b.kind() == SemanticKind::Categorical => (SemanticValue::Categorical(t), b),
        (a, SemanticValue::Text(t)) if a.kind() == SemanticKind::Categorical => (a, SemanticValue::Categorical(t)),
        pair => pair,
    }
}

fn structured_compare(op: CmpOp, a: Binding, b: Binding) -> Result<Binding, ExecError> {
    let a = plain(a)?;
    let b = plain(b)?;
    let r = match (&a, &b) {
        (Plain::Value(x), Plain::Value(y)) => match op {
            CmpOp::Eq => Some(x.loose_eq(y)),
            CmpOp::Neq => Some(!x.loose_eq(y)),
            _ => x.loose_cmp(y).map(|o| ordered(op, o)),
        },
        (Plain::Id(x), Plain::Id(y)) => match op {
            CmpOp::Eq => Some(x == y),
            CmpOp::Neq => Some(x != y),
            _ => None,
        },
        _ => match op {
            CmpOp::Eq => Some(false),
            CmpOp::Neq => Some(true),
            _ => None,
        },
    };
    Ok(r.map(|b| Binding::Value(Value::Boolean(b))).unwrap_or(Binding::Null))
}

enum Plain {
    Value(Value),
    Id(String),
}

/// Semantic values compare as ordinary values: numbers as floats, texts and
/// categories as text.
fn plain(b: Binding) -> Result<Plain, ExecError> {
    Ok(match b {
        Binding::Value(v) => Plain::Value(v),
        Binding::Semantic(SemanticValue::Number(x)) => Plain::Value(Value::Float(x)),
        Binding::Semantic(SemanticValue::Text(t) | SemanticValue::Categorical(t)) => Plain::Value(Value::Text(t)),
        Binding::Semantic(SemanticValue::Vector(_)) => {
            return Err(ExecError::Type("vectors only support semantic comparison symbols".into()))
        }
        b @ (Binding::Node(_) | Binding::Rel(_) | Binding::Path(_)) => Plain::Id(b.join_key()),
        Binding::Null => unreachable!("nulls handled by the caller"),
    })
}

fn ordered(op: CmpOp, o: Ordering) -> bool {
    match op {
        CmpOp::Lt => o == Ordering::Less,
        CmpOp::Gt => o == Ordering::Greater,
        CmpOp::Le => o != Ordering::Greater,
        CmpOp::Ge => o != Ordering::Less,
        _ => unreachable!("equality handled separately"),
    }
}

fn truth(b: Binding) -> Result<Option<bool>, ExecError> {
    match b {
        Binding::Null => Ok(None),
        Binding::Value(Value::Boolean(x)) => Ok(Some(x)),
        other => Err(ExecError::Type(format!("expected a boolean, got {other}"))),
    }
}

pub fn literal(l: &Literal) -> Value {
    match l {
        Literal::Int(i) => Value::Integer(*i),
        Literal::Float(x) => Value::Float(*x),
        Literal::Str(s) => Value::Text(s.clone()),
        Literal::Bool(b) => Value::Boolean(*b),
    }
}

fn decode_hex(s: &str) -> Option<Vec<u8>> {
    let s = s.strip_prefix("0x").unwrap_or(s);
    if s.len() % 2 != 0 {
        return None;
    }
    (0..s.len()).step_by(2).map(|i| u8::from_str_radix(s.get(i..i + 2)?, 16).ok()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hex_decoding() {
        assert_eq!(decode_hex("0a0B"), Some(vec![10, 11]));
        assert_eq!(decode_hex("0xff"), Some(vec![255]));
        assert_eq!(decode_hex(""), Some(vec![]));
        assert_eq!(decode_hex("abc"), None);
        assert_eq!(decode_hex("zz"), None);
    }

    #[test]
    fn null_propagation() {
        let n = || Binding::Null;
        let t = Binding::Value(Value::Integer(1));
        assert!(structured_compare(CmpOp::Lt, t.clone(), Binding::Value(Value::Text("a".into()))).unwrap().is_null());
        assert_eq!(truth(n()).unwrap(), None);
        assert_eq!(
            structured_compare(CmpOp::Eq, t, Binding::Value(Value::Float(1.0))).unwrap(),
            Binding::Value(Value::Boolean(true))
        );
    }
}
