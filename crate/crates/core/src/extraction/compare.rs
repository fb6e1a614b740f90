//! The five comparison symbols and the per-space comparators behind them.

use std::collections::HashSet;
use std::fmt;

use crate::graph::Value;

use super::{ExtractionError, SemanticKind, SemanticValue};

pub const DEFAULT_THRESHOLD: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CompareSymbol {
    /// `::` similarity in [0, 1]
    Similarity,
    /// `~:`
    Similar,
    /// `!:`
    NotSimilar,
    /// `<:` left is contained in right
    In,
    /// `>:` left contains right
    Contains,
}

impl CompareSymbol {
    pub fn as_str(self) -> &'static str {
        match self {
            CompareSymbol::Similarity => "::",
            CompareSymbol::Similar => "~:",
            CompareSymbol::NotSimilar => "!:",
            CompareSymbol::In => "<:",
            CompareSymbol::Contains => ">:",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "::" => CompareSymbol::Similarity,
            "~:" => CompareSymbol::Similar,
            "!:" => CompareSymbol::NotSimilar,
            "<:" => CompareSymbol::In,
            ">:" => CompareSymbol::Contains,
            _ => return None,
        })
    }

    pub const ALL: [CompareSymbol; 5] = [
        CompareSymbol::Similarity,
        CompareSymbol::Similar,
        CompareSymbol::NotSimilar,
        CompareSymbol::In,
        CompareSymbol::Contains,
    ];
}

impl fmt::Display for CompareSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// User-definable comparison for one semantic space.
///
/// `similarity` must be symmetric, lie in [0, 1] and equal 1.0 on identical inputs.
pub trait Comparator: Send + Sync {
    fn similarity(&self, a: &SemanticValue, b: &SemanticValue) -> Result<f64, ExtractionError>;

    /// Whether `a` is contained in `b`.
    fn contained_in(&self, a: &SemanticValue, b: &SemanticValue) -> Result<bool, ExtractionError>;

    fn threshold(&self) -> f64 {
        DEFAULT_THRESHOLD
    }
}

/// Kind-dispatched defaults: clamped cosine, `1/(1+|a-b|)`, token Jaccard,
/// categorical equality.
#[derive(Debug, Clone, Copy)]
pub struct DefaultComparator {
    pub threshold: f64,
}

impl Default for DefaultComparator {
    fn default() -> Self {
        DefaultComparator { threshold: DEFAULT_THRESHOLD }
    }
}

fn check_kinds(a: &SemanticValue, b: &SemanticValue) -> Result<(), ExtractionError> {
    if a.kind() != b.kind() {
        return Err(ExtractionError::KindMismatch(a.kind(), b.kind()));
    }
    Ok(())
}

pub fn cosine_clamped(a: &[f32], b: &[f32]) -> f64 {
    if a == b {
        return 1.0;
    }
    let (mut dot, mut na, mut nb) = (0.0f64, 0.0f64, 0.0f64);
    for (x, y) in a.iter().zip(b) {
        let (x, y) = (*x as f64, *y as f64);
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na.sqrt() * nb.sqrt())).clamp(0.0, 1.0)
}

/// Lowercase tokens split on anything that is not alphanumeric.
pub fn tokenize(s: &str) -> impl Iterator<Item = String> + '_ {
    s.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()).map(str::to_lowercase)
}

fn jaccard(a: &str, b: &str) -> f64 {
    let ta: HashSet<String> = tokenize(a).collect();
    let tb: HashSet<String> = tokenize(b).collect();
    if ta.is_empty() && tb.is_empty() {
        return if a == b { 1.0 } else { 0.0 };
    }
    ta.intersection(&tb).count() as f64 / ta.union(&tb).count() as f64
}

impl Comparator for DefaultComparator {
    fn similarity(&self, a: &SemanticValue, b: &SemanticValue) -> Result<f64, ExtractionError> {
        check_kinds(a, b)?;
        Ok(match (a, b) {
            (SemanticValue::Vector(x), SemanticValue::Vector(y)) => cosine_clamped(x, y),
            (SemanticValue::Number(x), SemanticValue::Number(y)) => 1.0 / (1.0 + (x - y).abs()),
            (SemanticValue::Text(x), SemanticValue::Text(y)) => jaccard(x, y),
            (SemanticValue::Categorical(x), SemanticValue::Categorical(y)) => (x == y) as u8 as f64,
            _ => unreachable!("kinds checked"),
        })
    }

    fn contained_in(&self, a: &SemanticValue, b: &SemanticValue) -> Result<bool, ExtractionError> {
        check_kinds(a, b)?;
        match (a, b) {
            (SemanticValue::Text(x), SemanticValue::Text(y)) => Ok(y.contains(x.as_str())),
            (SemanticValue::Categorical(x), SemanticValue::Categorical(y)) => Ok(x == y),
            _ => Err(ExtractionError::UnsupportedSymbol { symbol: CompareSymbol::In, kind: a.kind() }),
        }
    }

    fn threshold(&self) -> f64 {
        self.threshold
    }
}

/// Applies `symbol` through `cmp`.
pub fn compare_with(
    cmp: &dyn Comparator,
    symbol: CompareSymbol,
    a: &SemanticValue,
    b: &SemanticValue,
) -> Result<Value, ExtractionError> {
    let unsupported = |kind: SemanticKind| ExtractionError::UnsupportedSymbol { symbol, kind };
    Ok(match symbol {
        CompareSymbol::Similarity => Value::Float(cmp.similarity(a, b)?),
        CompareSymbol::Similar => Value::Boolean(cmp.similarity(a, b)? >= cmp.threshold()),
        CompareSymbol::NotSimilar => Value::Boolean(cmp.similarity(a, b)? < cmp.threshold()),
        CompareSymbol::In => Value::Boolean(cmp.contained_in(a, b).map_err(|e| match e {
            ExtractionError::UnsupportedSymbol { kind, .. } => unsupported(kind),
            e => e,
        })?),
        CompareSymbol::Contains => Value::Boolean(cmp.contained_in(b, a).map_err(|e| match e {
            ExtractionError::UnsupportedSymbol { kind, .. } => unsupported(kind),
            e => e,
        })?),
    })
}

pub fn compare(symbol: CompareSymbol, a: &SemanticValue, b: &SemanticValue) -> Result<Value, ExtractionError> {
    compare_with(&DefaultComparator::default(), symbol, a, b)
}

/// Set comparison: `::` is the max pairwise similarity, `~:` holds iff any
/// pair is similar, `<:`/`>:` hold iff any pair satisfies them.
pub fn compare_as_set_with(
    cmp: &dyn Comparator,
    symbol: CompareSymbol,
    a: &[SemanticValue],
    b: &[SemanticValue],
) -> Result<Value, ExtractionError> {
    if a.is_empty() || b.is_empty() {
        return Err(ExtractionError::EmptySet);
    }
    match symbol {
        CompareSymbol::Similarity | CompareSymbol::Similar | CompareSymbol::NotSimilar => {
            let mut best = 0.0f64;
            for x in a {
                for y in b {
                    best = best.max(cmp.similarity(x, y)?);
                }
            }
            Ok(match symbol {
                CompareSymbol::Similarity => Value::Float(best),
                CompareSymbol::Similar => Value::Boolean(best >= cmp.threshold()),
                _ => Value::Boolean(best < cmp.threshold()),
            })
        }
        CompareSymbol::In | CompareSymbol::Contains => {
            let mut any = false;
            for x in a {
                for y in b {
                    any |= compare_with(cmp, symbol, x, y)? == Value::Boolean(true);
                }
            }
            Ok(Value::Boolean(any))
        }
    }
}

pub fn compare_as_set(symbol: CompareSymbol, a: &[SemanticValue], b: &[SemanticValue]) -> Result<Value, ExtractionError> {
    compare_as_set_with(&DefaultComparator::default(), symbol, a, b)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn vec_v(v: &[f32]) -> SemanticValue {
        SemanticValue::Vector(v.to_vec())
    }

    #[test]
    fn identical_vectors_are_fully_similar() {
        let v = vec_v(&[0.3, -0.2, 0.9]);
        assert_eq!(compare(CompareSymbol::Similarity, &v, &v).unwrap(), Value::Float(1.0));
    }

    #[test]
    fn similar_and_not_similar_at_085() {
        // cos = 0.85 with unit vectors (1, 0) and (0.85, sqrt(1 - 0.85^2))
        let a = vec_v(&[1.0, 0.0]);
        let b = vec_v(&[0.85, (1.0f32 - 0.85 * 0.85).sqrt()]);
        let sim = compare(CompareSymbol::Similarity, &a, &b).unwrap().as_f64().unwrap();
        assert!((sim - 0.85).abs() < 1e-6);
        assert_eq!(compare(CompareSymbol::Similar, &a, &b).unwrap(), Value::Boolean(true));
        assert_eq!(compare(CompareSymbol::NotSimilar, &a, &b).unwrap(), Value::Boolean(false));
    }

    #[test]
    fn text_containment() {
        let cat = SemanticValue::Text("cat".into());
        let catalog = SemanticValue::Text("catalog".into());
        assert_eq!(compare(CompareSymbol::In, &cat, &catalog).unwrap(), Value::Boolean(true));
        assert_eq!(compare(CompareSymbol::Contains, &cat, &catalog).unwrap(), Value::Boolean(false));
        assert_eq!(compare(CompareSymbol::Contains, &catalog, &cat).unwrap(), Value::Boolean(true));
    }

    #[test]
    fn vector_containment_is_unsupported() {
        let v = vec_v(&[1.0]);
        for sym in [CompareSymbol::In, CompareSymbol::Contains] {
            match compare(sym, &v, &v) {
                Err(ExtractionError::UnsupportedSymbol { symbol, .. }) => assert_eq!(symbol, sym),
                other => panic!("{other:?}"),
            }
        }
    }

    #[test]
    fn kind_mismatch() {
        let r = compare(CompareSymbol::Similarity, &SemanticValue::Number(1.0), &SemanticValue::Text("1".into()));
        assert!(matches!(r, Err(ExtractionError::KindMismatch(..))));
        let r = compare(CompareSymbol::Similarity, &vec_v(&[1.0]), &vec_v(&[1.0, 2.0]));
        assert!(matches!(r, Err(ExtractionError::KindMismatch(..))));
    }

    #[test]
    fn set_comparisons() {
        let v = vec_v(&[0.0, 1.0]);
        let neg = vec_v(&[0.0, -1.0]);
        assert_eq!(compare_as_set(CompareSymbol::Similarity, &[v.clone()], &[v.clone()]).unwrap(), Value::Float(1.0));
        assert_eq!(compare_as_set(CompareSymbol::Similar, &[v.clone()], &[v.clone()]).unwrap(), Value::Boolean(true));
        assert_eq!(compare_as_set(CompareSymbol::Similarity, &[v.clone()], &[neg]).unwrap(), Value::Float(0.0));
        assert!(matches!(compare_as_set(CompareSymbol::Similar, &[], &[v]), Err(ExtractionError::EmptySet)));
    }

    fn arb_value() -> impl Strategy<Value = SemanticValue> {
        prop_oneof![
            prop::collection::vec(-10.0f32..10.0, 3).prop_map(SemanticValue::Vector),
            (-100.0f64..100.0).prop_map(SemanticValue::Number),
            "[a-c ]{0,8}".prop_map(SemanticValue::Text),
            "[a-c]{1,2}".prop_map(SemanticValue::Categorical),
        ]
    }

    fn same_kind_pair() -> impl Strategy<Value = (SemanticValue, SemanticValue)> {
        prop_oneof![
            (prop::collection::vec(-10.0f32..10.0, 3), prop::collection::vec(-10.0f32..10.0, 3))
                .prop_map(|(a, b)| (SemanticValue::Vector(a), SemanticValue::Vector(b))),
            (-100.0f64..100.0, -100.0f64..100.0).prop_map(|(a, b)| (SemanticValue::Number(a), SemanticValue::Number(b))),
            ("[a-c ]{0,8}", "[a-c ]{0,8}").prop_map(|(a, b)| (SemanticValue::Text(a), SemanticValue::Text(b))),
            ("[a-c]{1,2}", "[a-c]{1,2}").prop_map(|(a, b)| (SemanticValue::Categorical(a), SemanticValue::Categorical(b))),
        ]
    }

    proptest! {
        #[test]
        fn similarity_symmetric_bounded_reflexive((a, b) in same_kind_pair()) {
            let ab = compare(CompareSymbol::Similarity, &a, &b).unwrap().as_f64().unwrap();
            let ba = compare(CompareSymbol::Similarity, &b, &a).unwrap().as_f64().unwrap();
            prop_assert!((ab - ba).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&ab));
            prop_assert_eq!(compare(CompareSymbol::Similarity, &a, &a).unwrap(), Value::Float(1.0));
        }

        #[test]
        fn not_similar_is_complement(a in arb_value(), b in arb_value()) {
            let s = compare(CompareSymbol::Similar, &a, &b);
            let n = compare(CompareSymbol::NotSimilar, &a, &b);
            match (s, n) {
                (Ok(Value::Boolean(x)), Ok(Value::Boolean(y))) => prop_assert_eq!(x, !y),
                (Err(_), Err(_)) => {}
                other => prop_assert!(false, "{:?}", other),
            }
        }

        #[test]
        fn set_similarity_is_max_pairwise(
            a in prop::collection::vec(prop::collection::vec(-1.0f32..1.0, 4), 5),
            b in prop::collection::vec(prop::collection::vec(-1.0f32..1.0, 4), 5),
        ) {
            let av: Vec<_> = a.iter().cloned().map(SemanticValue::Vector).collect();
            let bv: Vec<_> = b.iter().cloned().map(SemanticValue::Vector).collect();
            let got = compare_as_set(CompareSymbol::Similarity, &av, &bv).unwrap().as_f64().unwrap();
            let mut best = f64::MIN;
            for x in &a {
                for y in &b {
                    let dot: f64 = x.iter().zip(y).map(|(p, q)| *p as f64 * *q as f64).sum();
                    let nx: f64 = x.iter().map(|p| (*p as f64).powi(2)).sum::<f64>().sqrt();
                    let ny: f64 = y.iter().map(|p| (*p as f64).powi(2)).sum::<f64>().sqrt();
                    let c = if x == y { 1.0 } else if nx == 0.0 || ny == 0.0 { 0.0 } else { (dot / (nx * ny)).clamp(0.0, 1.0) };
                    best = best.max(c);
                }
            }
            prop_assert!((got - best).abs() < 1e-9);
        }
    }
}
