use std::fmt;
use std::io::{self, Read};
use std::sync::Arc;

use serde::Serialize;

use crate::codec::{read_f32, read_str, read_u32, read_u64, read_u8, write_str};

/// Name of a sub-property such as `face` or `animal`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SubKey(pub Arc<str>);

impl SubKey {
    pub fn new(s: &str) -> Self {
        SubKey(Arc::from(s))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl From<&str> for SubKey {
    fn from(s: &str) -> Self {
        SubKey::new(s)
    }
}

impl fmt::Display for SubKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct ModelSerial(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum SemanticKind {
    Vector(usize),
    Number,
    Text,
    Categorical,
}

impl fmt::Display for SemanticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SemanticKind::Vector(d) => write!(f, "vector({d})"),
            SemanticKind::Number => f.write_str("number"),
            SemanticKind::Text => f.write_str("text"),
            SemanticKind::Categorical => f.write_str("categorical"),
        }
    }
}

/// A sub-property value. Never contains NaN.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum SemanticValue {
    Vector(Vec<f32>),
    Number(f64),
    Text(String),
    Categorical(String),
}

impl SemanticValue {
    pub fn kind(&self) -> SemanticKind {
        match self {
            SemanticValue::Vector(v) => SemanticKind::Vector(v.len()),
            SemanticValue::Number(_) => SemanticKind::Number,
            SemanticValue::Text(_) => SemanticKind::Text,
            SemanticValue::Categorical(_) => SemanticKind::Categorical,
        }
    }

    pub fn has_nan(&self) -> bool {
        match self {
            SemanticValue::Vector(v) => v.iter().any(|x| x.is_nan()),
            SemanticValue::Number(x) => x.is_nan(),
            _ => false,
        }
    }

    pub fn encode(&self, w: &mut Vec<u8>) {
        match self {
            SemanticValue::Vector(v) => {
                w.push(0);
                w.extend_from_slice(&(v.len() as u32).to_le_bytes());
                for x in v {
                    w.extend_from_slice(&x.to_le_bytes());
                }
            }
            SemanticValue::Number(x) => {
                w.push(1);
                w.extend_from_slice(&x.to_le_bytes());
            }
            SemanticValue::Text(s) => {
                w.push(2);
                write_str(w, s).expect("vec write");
            }
            SemanticValue::Categorical(s) => {
                w.push(3);
                write_str(w, s).expect("vec write");
            }
        }
    }

    pub fn decode<R: Read>(r: &mut R) -> io::Result<Self> {
        Ok(match read_u8(r)? {
            0 => {
                let n = read_u32(r)?;
                SemanticValue::Vector((0..n).map(|_| read_f32(r)).collect::<io::Result<_>>()?)
            }
            1 => SemanticValue::Number(f64::from_bits(read_u64(r)?)),
            2 => SemanticValue::Text(read_str(r)?),
            3 => SemanticValue::Categorical(read_str(r)?),
            t => return Err(io::Error::new(io::ErrorKind::InvalidData, format!("unknown semantic tag {t}"))),
        })
    }
}

impl fmt::Display for SemanticValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SemanticValue::Vector(v) => {
                f.write_str("[")?;
                for (i, x) in v.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{x}")?;
                }
                f.write_str("]")
            }
            SemanticValue::Number(x) => write!(f, "{x}"),
            SemanticValue::Text(s) | SemanticValue::Categorical(s) => f.write_str(s),
        }
    }
}
