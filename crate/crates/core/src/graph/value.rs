use std::fmt;

use ordered_float::OrderedFloat;
use serde::{Deserialize, Serialize};

use crate::blob::BlobId;

/// A property value stored on a node or relationship.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Value {
    Integer(i64),
    Float(f64),
    Text(String),
    Boolean(bool),
    Blob(BlobId),
}

impl Value {
    pub fn type_name(&self) -> &'static str {
        match self {
            Value::Integer(_) => "integer",
            Value::Float(_) => "float",
            Value::Text(_) => "text",
            Value::Boolean(_) => "boolean",
            Value::Blob(_) => "blob",
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Integer(i) => Some(*i as f64),
            Value::Float(f) => Some(*f),
            _ => None,
        }
    }

    pub fn as_blob(&self) -> Option<BlobId> {
        match self {
            Value::Blob(b) => Some(*b),
            _ => None,
        }
    }

    /// Equality with numeric coercion between integers and floats.
    pub fn loose_eq(&self, other: &Value) -> bool {
        match (self.as_f64(), other.as_f64()) {
            (Some(a), Some(b)) => a == b,
            _ => self == other,
        }
    }

    /// Ordering for `<`, `>` and friends. Only numbers and texts are ordered.
    pub fn loose_cmp(&self, other: &Value) -> Option<std::cmp::Ordering> {
        match (self, other) {
            (Value::Text(a), Value::Text(b)) => Some(a.cmp(b)),
            _ => match (self.as_f64(), other.as_f64()) {
                (Some(a), Some(b)) => a.partial_cmp(&b),
                _ => None,
            },
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Integer(i) => write!(f, "{i}"),
            Value::Float(x) => {
                if x.is_finite() && x.fract() == 0.0 && x.abs() < 1e15 {
                    write!(f, "{x:.1}")
                } else {
                    write!(f, "{x}")
                }
            }
            Value::Text(s) => f.write_str(s),
            Value::Boolean(b) => write!(f, "{b}"),
            Value::Blob(id) => write!(f, "blob:{}", id.0),
        }
    }
}

impl From<i64> for Value {
    fn from(v: i64) -> Self {
        Value::Integer(v)
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Float(v)
    }
}

impl From<bool> for Value {
    fn from(v: bool) -> Self {
        Value::Boolean(v)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Text(v.to_string())
    }
}

impl From<String> for Value {
    fn from(v: String) -> Self {
        Value::Text(v)
    }
}

impl From<BlobId> for Value {
    fn from(v: BlobId) -> Self {
        Value::Blob(v)
    }
}

/// Totally ordered projection of a [`Value`] used as a property-index key.
///
/// Integers and floats share the numeric domain so that `x = 1` and `x = 1.0`
/// probe the same posting list. BLOB references are not indexable.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum IndexKey {
    Bool(bool),
    Num(OrderedFloat<f64>),
    Text(String),
}

impl IndexKey {
    pub fn from_value(v: &Value) -> Option<IndexKey> {
        match v {
            Value::Boolean(b) => Some(IndexKey::Bool(*b)),
            Value::Integer(i) => Some(IndexKey::Num(OrderedFloat(*i as f64))),
            Value::Float(f) if !f.is_nan() => Some(IndexKey::Num(OrderedFloat(*f))),
            Value::Text(s) => Some(IndexKey::Text(s.clone())),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numeric_coercion() {
        assert!(Value::Integer(3).loose_eq(&Value::Float(3.0)));
        assert!(!Value::Integer(3).loose_eq(&Value::Text("3".into())));
        assert_eq!(
            Value::Integer(2).loose_cmp(&Value::Float(2.5)),
            Some(std::cmp::Ordering::Less)
        );
        assert_eq!(Value::Boolean(true).loose_cmp(&Value::Integer(1)), None);
    }

    #[test]
    fn index_keys_share_numeric_domain() {
        assert_eq!(
            IndexKey::from_value(&Value::Integer(7)),
            IndexKey::from_value(&Value::Float(7.0))
        );
        assert_eq!(IndexKey::from_value(&Value::Blob(BlobId(1))), None);
    }
}
