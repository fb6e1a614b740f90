//! Sub-property extraction: the extractor registry, a serial-validated
//! semantic cache, the AIPM protocol and the comparison symbols.
//!
//! A cache entry for `(blob, sub_key)` is valid only while its serial equals
//! the latest registered serial for `sub_key`. Registering a newer model
//! invalidates every older entry in O(1); stale entries are dropped when
//! next looked up.

pub mod aipm;
pub mod builtin;
mod compare;
mod value;

use std::collections::{HashMap, HashSet};
use std::io::{self, Read};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use parking_lot::{Condvar, Mutex, RwLock};
use thiserror::Error;

pub use compare::{
    compare, compare_as_set, compare_as_set_with, compare_with, cosine_clamped, tokenize, CompareSymbol, Comparator,
    DefaultComparator, DEFAULT_THRESHOLD,
};
pub use value::{ModelSerial, SemanticKind, SemanticValue, SubKey};

use crate::blob::{BlobError, BlobId, BlobStore};
use crate::codec::{read_str, read_u16, read_u32, read_u64, write_atomic, write_str};
use aipm::{AipmClient, AipmStatus, AipmTransport, InProcessTransport, ModelHost};

/// Sub-property used when a bare BLOB is compared with `::`, `~:` and friends.
pub const DEFAULT_SUB_KEY: &str = "face";

#[derive(Debug, Error)]
pub enum ExtractionError {
    #[error("unknown blob {}", .0 .0)]
    UnknownBlob(BlobId),
    #[error("no extractor registered for sub-property {0}")]
    NoExtractor(String),
    #[error("extractor failed: {0}")]
    ExtractorFailed(String),
    #[error("sub-property {sub_key} already has serial {}", serial.0)]
    DuplicateSerial { sub_key: String, serial: ModelSerial },
    #[error("cannot compare {0} with {1}")]
    KindMismatch(SemanticKind, SemanticKind),
    #[error("symbol {symbol} is not supported for {kind} values")]
    UnsupportedSymbol { symbol: CompareSymbol, kind: SemanticKind },
    #[error("set comparison needs non-empty sets")]
    EmptySet,
    #[error("model request timed out")]
    Timeout,
    #[error("model transport closed")]
    TransportClosed,
    #[error(transparent)]
    Blob(BlobError),
    #[error("semantic cache i/o: {0}")]
    Io(#[from] io::Error),
}

impl From<BlobError> for ExtractionError {
    fn from(e: BlobError) -> Self {
        match e {
            BlobError::UnknownBlob(id) => ExtractionError::UnknownBlob(id),
            e => ExtractionError::Blob(e),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ExtractorSpec {
    pub sub_key: SubKey,
    pub serial: ModelSerial,
    pub kind: SemanticKind,
}

impl ExtractorSpec {
    pub fn model_id(&self) -> String {
        format!("{}#{}", self.sub_key, self.serial.0)
    }
}

/// Maps BLOB bytes to a semantic value. Must be deterministic for a fixed serial.
pub trait Extractor: Send + Sync {
    fn spec(&self) -> ExtractorSpec;

    fn extract(&self, bytes: &[u8]) -> Result<SemanticValue, String>;
}

type CacheKey = (BlobId, SubKey);

/// Extraction with a serial-validated, single-flight cache in front of the
/// model transport.
pub struct ExtractionService {
    blobs: Arc<BlobStore>,
    latest: RwLock<HashMap<SubKey, ExtractorSpec>>,
    registered: Mutex<HashSet<(SubKey, ModelSerial)>>,
    comparators: RwLock<HashMap<SubKey, Arc<dyn Comparator>>>,
    host: Arc<ModelHost>,
    client: AipmClient,
    entries: Mutex<HashMap<CacheKey, (ModelSerial, SemanticValue)>>,
    inflight: Mutex<HashSet<CacheKey>>,
    finished: Condvar,
    calls: AtomicU64,
}

impl ExtractionService {
    /// Service whose models run in-process.
    pub fn new(blobs: Arc<BlobStore>) -> Self {
        let host = Arc::new(ModelHost::default());
        let transport = Arc::new(InProcessTransport::new(host.clone()));
        Self::with_transport(blobs, host, transport)
    }

    /// Service talking to models through `transport`. Extractors registered
    /// here are also published on `host`.
    pub fn with_transport(blobs: Arc<BlobStore>, host: Arc<ModelHost>, transport: Arc<dyn AipmTransport>) -> Self {
        ExtractionService {
            blobs,
            latest: RwLock::new(HashMap::new()),
            registered: Mutex::new(HashSet::new()),
            comparators: RwLock::new(HashMap::new()),
            host,
            client: AipmClient::new(transport),
            entries: Mutex::new(HashMap::new()),
            inflight: Mutex::new(HashSet::new()),
            finished: Condvar::new(),
            calls: AtomicU64::new(0),
        }
    }

    pub fn blobs(&self) -> &Arc<BlobStore> {
        &self.blobs
    }

    pub fn register_extractor(&self, e: Arc<dyn Extractor>) -> Result<(), ExtractionError> {
        let spec = e.spec();
        if !self.registered.lock().insert((spec.sub_key.clone(), spec.serial)) {
            return Err(ExtractionError::DuplicateSerial { sub_key: spec.sub_key.to_string(), serial: spec.serial });
        }
        self.host.register(spec.model_id(), e);
        let mut latest = self.latest.write();
        match latest.get(&spec.sub_key) {
            Some(cur) if cur.serial > spec.serial => {}
            _ => {
                latest.insert(spec.sub_key.clone(), spec);
            }
        }
        Ok(())
    }

    pub fn register_comparator(&self, sub_key: SubKey, c: Arc<dyn Comparator>) {
        self.comparators.write().insert(sub_key, c);
    }

    pub fn latest_serial(&self, sub_key: &SubKey) -> Option<ModelSerial> {
        self.latest.read().get(sub_key).map(|s| s.serial)
    }

    pub fn spec(&self, sub_key: &SubKey) -> Option<ExtractorSpec> {
        self.latest.read().get(sub_key).cloned()
    }

    pub fn sub_keys(&self) -> Vec<SubKey> {
        let mut v: Vec<_> = self.latest.read().keys().cloned().collect();
        v.sort();
        v
    }

    /// Number of model invocations made on cache misses.
    pub fn extractor_calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn cache_len(&self) -> usize {
        self.entries.lock().len()
    }

    pub fn clear_cache(&self) {
        self.entries.lock().clear();
    }

    /// Cached value for `(blob, sub_key)` if one is valid, without extracting.
    pub fn cached(&self, blob: BlobId, sub_key: &SubKey) -> Option<SemanticValue> {
        let serial = self.latest_serial(sub_key)?;
        self.entries.lock().get(&(blob, sub_key.clone())).filter(|(s, _)| *s == serial).map(|(_, v)| v.clone())
    }

    pub fn extract(&self, blob: BlobId, sub_key: &SubKey) -> Result<SemanticValue, ExtractionError> {
        let key = (blob, sub_key.clone());
        let spec = loop {
            let spec = self.spec(sub_key).ok_or_else(|| ExtractionError::NoExtractor(sub_key.to_string()))?;
            {
                let mut entries = self.entries.lock();
                match entries.get(&key) {
                    Some((s, v)) if *s == spec.serial => return Ok(v.clone()),
                    Some(_) => {
                        entries.remove(&key);
                    }
                    None => {}
                }
            }
            let mut inflight = self.inflight.lock();
            if inflight.contains(&key) {
                self.finished.wait(&mut inflight);
                continue;
            }
            inflight.insert(key.clone());
            break spec;
        };

        let result = self.blobs.read_all(blob).map_err(ExtractionError::from).and_then(|b| self.invoke(&spec, b));
        if let Ok(v) = &result {
            let latest = self.latest.read();
            if latest.get(sub_key).map(|s| s.serial) == Some(spec.serial) {
                self.entries.lock().insert(key.clone(), (spec.serial, v.clone()));
            }
        }
        self.inflight.lock().remove(&key);
        self.finished.notify_all();
        result
    }

    /// Extracts from bytes that are not stored, bypassing the cache.
    pub fn extract_bytes(&self, bytes: &[u8], sub_key: &SubKey) -> Result<SemanticValue, ExtractionError> {
        let spec = self.spec(sub_key).ok_or_else(|| ExtractionError::NoExtractor(sub_key.to_string()))?;
        self.invoke(&spec, bytes.to_vec())
    }

    /// Warms the cache for `blobs` using up to `in_flight` concurrent model calls.
    pub fn prefetch(&self, blobs: &[BlobId], sub_key: &SubKey, in_flight: usize) -> Result<(), ExtractionError> {
        let next = AtomicU64::new(0);
        let first_err = Mutex::new(None);
        std::thread::scope(|s| {
            for _ in 0..in_flight.max(1).min(blobs.len()) {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed) as usize;
                    let Some(b) = blobs.get(i) else { break };
                    if let Err(e) = self.extract(*b, sub_key) {
                        first_err.lock().get_or_insert(e);
                        break;
                    }
                });
            }
        });
        match first_err.into_inner() {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }

    fn invoke(&self, spec: &ExtractorSpec, bytes: Vec<u8>) -> Result<SemanticValue, ExtractionError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        let resp = self.client.call(&spec.model_id(), bytes)?;
        match resp.status {
            AipmStatus::Ok(v) if v.has_nan() => Err(ExtractionError::ExtractorFailed("model returned NaN".into())),
            AipmStatus::Ok(v) if v.kind() != spec.kind => Err(ExtractionError::ExtractorFailed(format!(
                "model returned {} but {} was declared",
                v.kind(),
                spec.kind
            ))),
            AipmStatus::Ok(v) => Ok(v),
            AipmStatus::ModelError(m) => Err(ExtractionError::ExtractorFailed(m)),
            AipmStatus::Timeout => Err(ExtractionError::Timeout),
        }
    }

    fn comparator(&self, sub_key: Option<&SubKey>) -> Arc<dyn Comparator> {
        sub_key
            .and_then(|k| self.comparators.read().get(k).cloned())
            .unwrap_or_else(|| Arc::new(DefaultComparator::default()))
    }

    /// Compares two values of the space `sub_key` (default comparator if none registered).
    pub fn compare(
        &self,
        sub_key: Option<&SubKey>,
        symbol: CompareSymbol,
        a: &SemanticValue,
        b: &SemanticValue,
    ) -> Result<crate::graph::Value, ExtractionError> {
        compare_with(self.comparator(sub_key).as_ref(), symbol, a, b)
    }

    pub fn compare_as_set(
        &self,
        sub_key: Option<&SubKey>,
        symbol: CompareSymbol,
        a: &[SemanticValue],
        b: &[SemanticValue],
    ) -> Result<crate::graph::Value, ExtractionError> {
        compare_as_set_with(self.comparator(sub_key).as_ref(), symbol, a, b)
    }

    /// Writes all cache entries: `"PSEM" | u16 1 | u64 n | (blob u64 | sub str | serial u32 | value)*`.
    pub fn save_cache(&self, path: &Path) -> Result<(), ExtractionError> {
        let entries = self.entries.lock();
        let mut sorted: Vec<_> = entries.iter().collect();
        sorted.sort_by(|a, b| a.0.cmp(b.0));
        let mut buf = Vec::new();
        buf.extend_from_slice(b"PSEM");
        buf.extend_from_slice(&1u16.to_le_bytes());
        buf.extend_from_slice(&(sorted.len() as u64).to_le_bytes());
        for ((blob, sub), (serial, v)) in sorted {
            buf.extend_from_slice(&blob.0.to_le_bytes());
            write_str(&mut buf, sub.as_str())?;
            buf.extend_from_slice(&serial.0.to_le_bytes());
            v.encode(&mut buf);
        }
        write_atomic(path, &buf)?;
        Ok(())
    }

    /// Merges entries from a file written by [`save_cache`](Self::save_cache).
    pub fn load_cache(&self, path: &Path) -> Result<usize, ExtractionError> {
        let bytes = std::fs::read(path)?;
        let mut r = bytes.as_slice();
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != b"PSEM" {
            return Err(io::Error::new(io::ErrorKind::InvalidData, "not a semantic cache file").into());
        }
        let _version = read_u16(&mut r)?;
        let n = read_u64(&mut r)?;
        let mut entries = self.entries.lock();
        for _ in 0..n {
            let blob = BlobId(read_u64(&mut r)?);
            let sub = SubKey::new(&read_str(&mut r)?);
            let serial = ModelSerial(read_u32(&mut r)?);
            let v = SemanticValue::decode(&mut r)?;
            entries.insert((blob, sub), (serial, v));
        }
        Ok(n as usize)
    }
}
