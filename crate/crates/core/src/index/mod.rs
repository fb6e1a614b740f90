//! Indexes over semantic spaces.
//!
//! [`VectorIndex`] partitions a vector space into buckets around sampled core
//! vectors; a query probes the `nprobe` buckets with the nearest cores and
//! scans them linearly. With `nprobe` at least the bucket count the result is
//! exact. Distances are Euclidean, computed in f64; ties order by item id.

mod text;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::{self, Read, Write};
use std::ops::Bound;

use ordered_float::OrderedFloat;
use parking_lot::{Mutex, RwLock};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use text::TextIndex;

use crate::codec::{read_f32, read_u32, read_u64};
use crate::extraction::{ModelSerial, SemanticKind, SemanticValue, SubKey};

pub const DEFAULT_BUCKET_DIVISOR: u64 = 100_000;
pub const PIVF_MAGIC: &[u8; 4] = b"PIVF";

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("cannot index an empty space")]
    EmptySpace,
    #[error("expected dimension {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("item {0} is already indexed")]
    DuplicateId(u64),
    #[error("space holds {expected} values, got {got}")]
    KindMismatch { expected: SemanticKind, got: SemanticKind },
    #[error("index built for serial {} but space is at serial {}", index.0, space.0)]
    StaleIndex { index: ModelSerial, space: ModelSerial },
    #[error("{0}")]
    InvalidArgument(String),
    #[error("index i/o: {0}")]
    Io(#[from] io::Error),
}

/// The extracted values of one sub-property under one model serial.
#[derive(Debug, Clone)]
pub struct SemanticSpace {
    pub sub_key: SubKey,
    pub serial: ModelSerial,
    pub kind: SemanticKind,
    members: BTreeMap<u64, SemanticValue>,
}

impl SemanticSpace {
    pub fn new(sub_key: SubKey, serial: ModelSerial, kind: SemanticKind) -> Self {
        SemanticSpace { sub_key, serial, kind, members: BTreeMap::new() }
    }

    /// Vector space over `(id, vector)` pairs, for tests and benchmarks.
    pub fn from_vectors(dim: usize, items: impl IntoIterator<Item = (u64, Vec<f32>)>) -> Result<Self, IndexError> {
        let mut s = SemanticSpace::new(SubKey::new("vector"), ModelSerial(1), SemanticKind::Vector(dim));
        for (id, v) in items {
            s.insert(id, SemanticValue::Vector(v))?;
        }
        Ok(s)
    }

    pub fn insert(&mut self, id: u64, value: SemanticValue) -> Result<(), IndexError> {
        match (self.kind, value.kind()) {
            (SemanticKind::Vector(expected), SemanticKind::Vector(got)) if expected != got => {
                return Err(IndexError::DimMismatch { expected, got })
            }
            (a, b) if a != b => return Err(IndexError::KindMismatch { expected: a, got: b }),
            _ => {}
        }
        if value.has_nan() {
            return Err(IndexError::InvalidArgument("NaN in semantic value".into()));
        }
        if self.members.contains_key(&id) {
            return Err(IndexError::DuplicateId(id));
        }
        self.members.insert(id, value);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn get(&self, id: u64) -> Option<&SemanticValue> {
        self.members.get(&id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, &SemanticValue)> {
        self.members.iter().map(|(k, v)| (*k, v))
    }

    fn vectors(&self) -> Result<(usize, Vec<(u64, &[f32])>), IndexError> {
        let SemanticKind::Vector(dim) = self.kind else {
            return Err(IndexError::KindMismatch { expected: SemanticKind::Vector(0), got: self.kind });
        };
        let v = self
            .members
            .iter()
            .map(|(id, v)| match v {
                SemanticValue::Vector(x) => (*id, x.as_slice()),
                _ => unreachable!("kind checked on insert"),
            })
            .collect();
        Ok((dim, v))
    }
}

pub fn euclidean(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (*x as f64 - *y as f64).powi(2)).sum::<f64>().sqrt()
}

/// `(item id, distance)` pairs, ascending by distance then id.
pub type KnnResult = Vec<(u64, f64)>;

fn by_distance_then_id(a: &(u64, f64), b: &(u64, f64)) -> std::cmp::Ordering {
    a.1.total_cmp(&b.1).then(a.0.cmp(&b.0))
}

/// Exact k nearest neighbours by linear scan.
pub fn brute_knn(space: &SemanticSpace, q: &[f32], k: usize) -> Result<KnnResult, IndexError> {
    let (dim, vs) = space.vectors()?;
    if q.len() != dim {
        return Err(IndexError::DimMismatch { expected: dim, got: q.len() });
    }
    let mut all: Vec<(u64, f64)> = vs.iter().map(|(id, v)| (*id, euclidean(q, v))).collect();
    all.sort_by(by_distance_then_id);
    all.truncate(k);
    Ok(all)
}

/// Bucket count for a space of `n` items; never more than `n`.
pub fn bucket_count(n: u64, divisor: u64, min_buckets: u64, override_count: Option<u64>) -> u64 {
    let c = override_count.unwrap_or_else(|| min_buckets.max(n / divisor.max(1)));
    c.clamp(1, n.max(1))
}

#[derive(Debug, Clone, Copy)]
pub struct BuildParams {
    pub bucket_divisor: u64,
    pub min_buckets: u64,
    pub buckets: Option<u64>,
    pub seed: u64,
}

impl Default for BuildParams {
    fn default() -> Self {
        BuildParams { bucket_divisor: DEFAULT_BUCKET_DIVISOR, min_buckets: 1, buckets: None, seed: 0 }
    }
}

impl BuildParams {
    pub fn with_buckets(buckets: u64, seed: u64) -> Self {
        BuildParams { buckets: Some(buckets), seed, ..Default::default() }
    }
}

#[derive(Debug)]
pub struct Bucket {
    pub core: Vec<f32>,
    members: RwLock<Vec<(u64, Vec<f32>)>>,
}

impl Bucket {
    pub fn len(&self) -> usize {
        self.members.read().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn member_ids(&self) -> Vec<u64> {
        self.members.read().iter().map(|(id, _)| *id).collect()
    }
}

#[derive(Debug)]
pub struct VectorIndex {
    dim: usize,
    buckets: Vec<Bucket>,
    built_for_serial: ModelSerial,
    ids: Mutex<HashSet<u64>>,
}

impl VectorIndex {
    /// Samples cores without replacement with `params.seed` and assigns
    /// every member to its nearest core.
    pub fn batch_build(space: &SemanticSpace, params: BuildParams) -> Result<Self, IndexError> {
        let (dim, vs) = space.vectors()?;
        if vs.is_empty() {
            return Err(IndexError::EmptySpace);
        }
        let m = bucket_count(vs.len() as u64, params.bucket_divisor, params.min_buckets, params.buckets) as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let mut picks = rand::seq::index::sample(&mut rng, vs.len(), m).into_vec();
        picks.sort_unstable();
        let buckets: Vec<Bucket> =
            picks.iter().map(|i| Bucket { core: vs[*i].1.to_vec(), members: RwLock::new(Vec::new()) }).collect();
        let index = VectorIndex { dim, buckets, built_for_serial: space.serial, ids: Mutex::new(HashSet::new()) };
        for (id, v) in vs {
            index.dynamic_insert(id, v.to_vec())?;
        }
        Ok(index)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn built_for_serial(&self) -> ModelSerial {
        self.built_for_serial
    }

    pub fn buckets(&self) -> &[Bucket] {
        &self.buckets
    }

    pub fn len(&self) -> usize {
        self.ids.lock().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn check_dim(&self, got: usize) -> Result<(), IndexError> {
        if got != self.dim {
            return Err(IndexError::DimMismatch { expected: self.dim, got });
        }
        Ok(())
    }

    /// Bucket with the nearest core; ties go to the lowest bucket id.
    pub fn pick_bucket(&self, v: &[f32]) -> Result<usize, IndexError> {
        self.check_dim(v.len())?;
        let mut best = (0usize, f64::INFINITY);
        for (i, b) in self.buckets.iter().enumerate() {
            let d = euclidean(v, &b.core);
            if d < best.1 {
                best = (i, d);
            }
        }
        Ok(best.0)
    }

    /// Adds an item to its nearest bucket. Cores do not move.
    pub fn dynamic_insert(&self, id: u64, v: Vec<f32>) -> Result<(), IndexError> {
        let b = self.pick_bucket(&v)?;
        if !self.ids.lock().insert(id) {
            return Err(IndexError::DuplicateId(id));
        }
        self.buckets[b].members.write().push((id, v));
        Ok(())
    }

    pub fn knn(&self, q: &[f32], k: usize, nprobe: usize) -> Result<KnnResult, IndexError> {
        self.check_dim(q.len())?;
        if k == 0 || nprobe == 0 {
            return Err(IndexError::InvalidArgument("k and nprobe must be at least 1".into()));
        }
        let mut order: Vec<(u64, f64)> =
            self.buckets.iter().enumerate().map(|(i, b)| (i as u64, euclidean(q, &b.core))).collect();
        order.sort_by(by_distance_then_id);
        let mut hits = Vec::new();
        for (b, _) in order.into_iter().take(nprobe) {
            for (id, v) in self.buckets[b as usize].members.read().iter() {
                hits.push((*id, euclidean(q, v)));
            }
        }
        hits.sort_by(by_distance_then_id);
        hits.truncate(k);
        Ok(hits)
    }

    /// [`knn`](Self::knn) that refuses to answer for a space at another serial.
    pub fn knn_checked(&self, space_serial: ModelSerial, q: &[f32], k: usize, nprobe: usize) -> Result<KnnResult, IndexError> {
        if space_serial != self.built_for_serial {
            return Err(IndexError::StaleIndex { index: self.built_for_serial, space: space_serial });
        }
        self.knn(q, k, nprobe)
    }

    /// `"PIVF" | dim u32 | buckets u32 | (core f32* | n u64 | (id u64 | f32*)*)*`
    pub fn write_to<W: Write>(&self, w: &mut W) -> io::Result<()> {
        w.write_all(PIVF_MAGIC)?;
        w.write_all(&(self.dim as u32).to_le_bytes())?;
        w.write_all(&(self.buckets.len() as u32).to_le_bytes())?;
        for b in &self.buckets {
            for x in &b.core {
                w.write_all(&x.to_le_bytes())?;
            }
            let members = b.members.read();
            w.write_all(&(members.len() as u64).to_le_bytes())?;
            for (id, v) in members.iter() {
                w.write_all(&id.to_le_bytes())?;
                for x in v {
                    w.write_all(&x.to_le_bytes())?;
                }
            }
        }
        Ok(())
    }

    /// Reads an index written by [`write_to`](Self::write_to). The file does
    /// not record the serial, so the caller supplies it.
    pub fn read_from<R: Read>(r: &mut R, serial: ModelSerial) -> Result<Self, IndexError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != PIVF_MAGIC {
            return Err(io::Error::new(io::ErrorKind::InvalidData, "not a vector index file").into());
        }
        let dim = read_u32(r)? as usize;
        let n = read_u32(r)? as usize;
        if n == 0 {
            return Err(IndexError::EmptySpace);
        }
        let read_vec = |r: &mut R| (0..dim).map(|_| read_f32(r)).collect::<io::Result<Vec<f32>>>();
        let mut buckets = Vec::with_capacity(n);
        let mut ids = HashSet::new();
        for _ in 0..n {
            let core = read_vec(r)?;
            let count = read_u64(r)?;
            let mut members = Vec::new();
            for _ in 0..count {
                let id = read_u64(r)?;
                if !ids.insert(id) {
                    return Err(IndexError::DuplicateId(id));
                }
                members.push((id, read_vec(r)?));
            }
            buckets.push(Bucket { core, members: RwLock::new(members) });
        }
        Ok(VectorIndex { dim, buckets, built_for_serial: serial, ids: Mutex::new(ids) })
    }
}

/// Ordered index over a numeric space.
#[derive(Debug, Default, Clone)]
pub struct NumericIndex {
    tree: BTreeMap<OrderedFloat<f64>, BTreeSet<u64>>,
}

impl NumericIndex {
    pub fn build(space: &SemanticSpace) -> Result<Self, IndexError> {
        if space.kind != SemanticKind::Number {
            return Err(IndexError::KindMismatch { expected: SemanticKind::Number, got: space.kind });
        }
        let mut idx = NumericIndex::default();
        for (id, v) in space.iter() {
            if let SemanticValue::Number(x) = v {
                idx.insert(id, *x);
            }
        }
        Ok(idx)
    }

    pub fn insert(&mut self, id: u64, x: f64) {
        self.tree.entry(OrderedFloat(x)).or_default().insert(id);
    }

    /// Ids with `lo <= value <= hi`, ascending.
    pub fn range(&self, lo: f64, hi: f64) -> Vec<u64> {
        if lo > hi || lo.is_nan() || hi.is_nan() {
            return Vec::new();
        }
        let mut out: Vec<u64> = self
            .tree
            .range((Bound::Included(OrderedFloat(lo)), Bound::Included(OrderedFloat(hi))))
            .flat_map(|(_, ids)| ids.iter().copied())
            .collect();
        out.sort_unstable();
        out
    }
}
