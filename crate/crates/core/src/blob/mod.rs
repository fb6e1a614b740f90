//! BLOB storage.
//!
//! Payloads shorter than the inline threshold stay in memory and are written
//! into the graph snapshot. Larger payloads go to an external row store: BLOB
//! `id` lives in row `id / num_columns`, column `id % num_columns`, as a run of
//! `[u32 chunk_len | payload]` records. Range reads fetch only the chunks they
//! overlap.

mod backend;

use std::collections::BTreeMap;
use std::fs::OpenOptions;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use backend::{FileRows, MemoryRows, RowBackend, ROW_HEADER_LEN, ROW_MAGIC, ROW_VERSION};

use crate::codec::{read_str, read_u16, read_u32, read_u64, write_atomic, write_str};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BlobId(pub u64);

pub const DEFAULT_INLINE_THRESHOLD: u64 = 10 * 1024;
pub const DEFAULT_CHUNK_SIZE: u32 = 64 * 1024;
pub const DEFAULT_NUM_COLUMNS: u64 = 1024;
pub const META_RECORD_LEN: usize = 24;

const HEADER_MAGIC: &[u8; 4] = b"PBHD";
const FLAG_EXTERNAL: u32 = 1;

#[derive(Debug, Error)]
pub enum BlobError {
    #[error("blob store i/o: {0}")]
    Io(#[from] io::Error),
    #[error("unknown blob {}", .0 .0)]
    UnknownBlob(BlobId),
    #[error("range {offset}+{len} outside blob of length {length}")]
    RangeOutOfBounds { offset: u64, len: u64, length: u64 },
    #[error("invalid blob store configuration: {0}")]
    InvalidConfig(String),
    #[error("payload of inline blob {} was not restored", .0 .0)]
    MissingPayload(BlobId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlobConfig {
    pub inline_threshold: u64,
    pub chunk_size: u32,
    pub num_columns: u64,
}

impl Default for BlobConfig {
    fn default() -> Self {
        BlobConfig {
            inline_threshold: DEFAULT_INLINE_THRESHOLD,
            chunk_size: DEFAULT_CHUNK_SIZE,
            num_columns: DEFAULT_NUM_COLUMNS,
        }
    }
}

impl BlobConfig {
    fn validate(&self) -> Result<(), BlobError> {
        if self.chunk_size == 0 {
            return Err(BlobError::InvalidConfig("chunk_size must be positive".into()));
        }
        if self.num_columns == 0 {
            return Err(BlobError::InvalidConfig("num_columns must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BlobMeta {
    pub id: BlobId,
    pub length: u64,
    pub mime: String,
}

impl BlobMeta {
    /// Fixed-size record: `length u64 | id u64 | mime_code u32 | flags u32`.
    pub fn encode_record(&self, mime_code: u32, flags: u32) -> [u8; META_RECORD_LEN] {
        let mut rec = [0u8; META_RECORD_LEN];
        rec[0..8].copy_from_slice(&self.length.to_le_bytes());
        rec[8..16].copy_from_slice(&self.id.0.to_le_bytes());
        rec[16..20].copy_from_slice(&mime_code.to_le_bytes());
        rec[20..24].copy_from_slice(&flags.to_le_bytes());
        rec
    }

    /// Inverse of [`encode_record`](Self::encode_record): `(length, id, mime_code, flags)`.
    pub fn decode_record(rec: &[u8; META_RECORD_LEN]) -> (u64, BlobId, u32, u32) {
        let u64_at = |i: usize| u64::from_le_bytes(rec[i..i + 8].try_into().expect("8 bytes"));
        let u32_at = |i: usize| u32::from_le_bytes(rec[i..i + 4].try_into().expect("4 bytes"));
        (u64_at(0), BlobId(u64_at(8)), u32_at(16), u32_at(20))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BlobPlacement {
    Inline(Arc<[u8]>),
    External { row_key: u64, column_key: u64 },
}

/// Row and column of a BLOB in the external table.
pub fn locate(id: BlobId, num_columns: u64) -> Result<(u64, u64), BlobError> {
    if num_columns == 0 {
        return Err(BlobError::InvalidConfig("num_columns must be at least 1".into()));
    }
    Ok((id.0 / num_columns, id.0 % num_columns))
}

/// Whether a payload of `length` bytes is stored inline.
pub fn is_inline(length: u64, threshold: u64) -> bool {
    length < threshold
}

/// Open BLOB with a read cursor. Counts backing-store bytes it caused to be
/// fetched, which may exceed bytes returned because fetches are chunk-sized.
#[derive(Debug, Clone)]
pub struct BlobHandle {
    pub id: BlobId,
    pub meta: BlobMeta,
    pub cursor: u64,
    bytes_fetched: u64,
}

impl BlobHandle {
    pub fn bytes_read_counter(&self) -> u64 {
        self.bytes_fetched
    }
}

#[derive(Debug, Clone)]
struct Entry {
    meta: BlobMeta,
    payload: Stored,
}

#[derive(Debug, Clone)]
enum Stored {
    Inline(Option<Arc<[u8]>>),
    External { row: u64, first_record: u64 },
}

#[derive(Debug, Default)]
struct State {
    entries: BTreeMap<BlobId, Entry>,
    mimes: Vec<String>,
    next_id: u64,
}

impl State {
    fn mime_code(&mut self, mime: &str) -> (u32, bool) {
        match self.mimes.iter().position(|m| m == mime) {
            Some(i) => (i as u32, false),
            None => {
                self.mimes.push(mime.to_string());
                ((self.mimes.len() - 1) as u32, true)
            }
        }
    }
}

pub struct BlobStore {
    config: BlobConfig,
    rows: Box<dyn RowBackend>,
    state: RwLock<State>,
    writer: Mutex<()>,
    fetched: AtomicU64,
    dir: Option<PathBuf>,
}

impl std::fmt::Debug for BlobStore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BlobStore").field("config", &self.config).field("dir", &self.dir).finish()
    }
}

impl BlobStore {
    pub fn in_memory(config: BlobConfig) -> Result<Self, BlobError> {
        config.validate()?;
        Ok(BlobStore {
            config,
            rows: Box::new(MemoryRows::default()),
            state: RwLock::new(State { next_id: 1, ..Default::default() }),
            writer: Mutex::new(()),
            fetched: AtomicU64::new(0),
            dir: None,
        })
    }

    /// Opens (or creates) a file-backed store in `dir`. An existing store keeps
    /// the chunk size and column count it was created with.
    pub fn open(dir: impl AsRef<Path>, config: BlobConfig) -> Result<Self, BlobError> {
        let dir = dir.as_ref().to_path_buf();
        std::fs::create_dir_all(&dir)?;
        let header = dir.join("store.hdr");
        let (config, mimes) = if header.exists() {
            read_header(&header)?
        } else {
            config.validate()?;
            write_header(&header, &config, &[])?;
            (config, Vec::new())
        };
        config.validate()?;
        let mut state = State { next_id: 1, mimes, ..Default::default() };
        let meta_path = dir.join("blobs.meta");
        if meta_path.exists() {
            let bytes = std::fs::read(&meta_path)?;
            let mut row_cursor: BTreeMap<u64, u64> = BTreeMap::new();
            for rec in bytes.chunks_exact(META_RECORD_LEN) {
                let (length, id, code, flags) = BlobMeta::decode_record(rec.try_into().expect("24 bytes"));
                let mime = state
                    .mimes
                    .get(code as usize)
                    .cloned()
                    .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidData, "unknown mime code"))?;
                let payload = if flags & FLAG_EXTERNAL != 0 {
                    let (row, _) = locate(id, config.num_columns)?;
                    let at = row_cursor.entry(row).or_insert(ROW_HEADER_LEN);
                    let first_record = *at;
                    *at += record_span(length, config.chunk_size);
                    Stored::External { row, first_record }
                } else {
                    Stored::Inline(None)
                };
                state.next_id = state.next_id.max(id.0 + 1);
                state.entries.insert(id, Entry { meta: BlobMeta { id, length, mime }, payload });
            }
        }
        Ok(BlobStore {
            config,
            rows: Box::new(FileRows::new(dir.join("rows"))?),
            state: RwLock::new(state),
            writer: Mutex::new(()),
            fetched: AtomicU64::new(0),
            dir: Some(dir),
        })
    }

    pub fn config(&self) -> BlobConfig {
        self.config
    }

    pub fn put_bytes(&self, payload: &[u8], mime: &str) -> Result<BlobId, BlobError> {
        self.put_blob(payload, mime)
    }

    /// Streams `payload` into the store.
    pub fn put_blob<R: Read>(&self, mut payload: R, mime: &str) -> Result<BlobId, BlobError> {
        let _w = self.writer.lock();
        let threshold = self.config.inline_threshold;
        let chunk = self.config.chunk_size as usize;

        let mut head = Vec::new();
        (&mut payload).take(threshold).read_to_end(&mut head)?;
        let id = BlobId(self.state.read().next_id);

        let (length, stored) = if is_inline(head.len() as u64, threshold) {
            (head.len() as u64, Stored::Inline(Some(Arc::from(head))))
        } else {
            let (row, _) = locate(id, self.config.num_columns)?;
            let mut first_record = None;
            let mut length = 0u64;
            let mut buf = head;
            loop {
                if buf.len() < chunk {
                    let want = (chunk - buf.len()) as u64;
                    (&mut payload).take(want).read_to_end(&mut buf)?;
                }
                if buf.is_empty() {
                    break;
                }
                let take = buf.len().min(chunk);
                let mut rec = Vec::with_capacity(4 + take);
                rec.extend_from_slice(&(take as u32).to_le_bytes());
                rec.extend_from_slice(&buf[..take]);
                let at = self.rows.append(row, &rec)?;
                first_record.get_or_insert(at);
                length += take as u64;
                buf.drain(..take);
            }
            let first_record = first_record.expect("payload at least threshold bytes");
            (length, Stored::External { row, first_record })
        };

        let mut state = self.state.write();
        let (code, new_mime) = state.mime_code(mime);
        let meta = BlobMeta { id, length, mime: mime.to_string() };
        if let Some(dir) = &self.dir {
            if new_mime {
                write_header(&dir.join("store.hdr"), &self.config, &state.mimes)?;
            }
            let flags = if matches!(stored, Stored::External { .. }) { FLAG_EXTERNAL } else { 0 };
            let mut f = OpenOptions::new().create(true).append(true).open(dir.join("blobs.meta"))?;
            f.write_all(&meta.encode_record(code, flags))?;
        }
        state.next_id = id.0 + 1;
        state.entries.insert(id, Entry { meta, payload: stored });
        Ok(id)
    }

    pub fn blob_meta(&self, id: BlobId) -> Result<BlobMeta, BlobError> {
        self.state.read().entries.get(&id).map(|e| e.meta.clone()).ok_or(BlobError::UnknownBlob(id))
    }

    pub fn contains(&self, id: BlobId) -> bool {
        self.state.read().entries.contains_key(&id)
    }

    pub fn ids(&self) -> Vec<BlobId> {
        self.state.read().entries.keys().copied().collect()
    }

    pub fn metas(&self) -> Vec<BlobMeta> {
        self.state.read().entries.values().map(|e| e.meta.clone()).collect()
    }

    pub fn placement(&self, id: BlobId) -> Result<BlobPlacement, BlobError> {
        let state = self.state.read();
        let e = state.entries.get(&id).ok_or(BlobError::UnknownBlob(id))?;
        match &e.payload {
            Stored::Inline(Some(p)) => Ok(BlobPlacement::Inline(p.clone())),
            Stored::Inline(None) => Err(BlobError::MissingPayload(id)),
            Stored::External { .. } => {
                let (row_key, column_key) = locate(id, self.config.num_columns)?;
                Ok(BlobPlacement::External { row_key, column_key })
            }
        }
    }

    pub fn open_blob(&self, id: BlobId) -> Result<BlobHandle, BlobError> {
        let meta = self.blob_meta(id)?;
        Ok(BlobHandle { id, meta, cursor: 0, bytes_fetched: 0 })
    }

    /// Reads `len` bytes at `offset`, fetching only the overlapping chunks.
    pub fn read_range(&self, h: &mut BlobHandle, offset: u64, len: u64) -> Result<Vec<u8>, BlobError> {
        let length = h.meta.length;
        if offset.checked_add(len).is_none_or(|end| end > length) {
            return Err(BlobError::RangeOutOfBounds { offset, len, length });
        }
        if len == 0 {
            return Ok(Vec::new());
        }
        let payload = {
            let state = self.state.read();
            state.entries.get(&h.id).ok_or(BlobError::UnknownBlob(h.id))?.payload.clone()
        };
        let out = match payload {
            Stored::Inline(None) => return Err(BlobError::MissingPayload(h.id)),
            Stored::Inline(Some(p)) => {
                h.bytes_fetched += len;
                self.fetched.fetch_add(len, Ordering::Relaxed);
                p[offset as usize..(offset + len) as usize].to_vec()
            }
            Stored::External { row, first_record } => {
                let chunk = self.config.chunk_size as u64;
                let first = offset / chunk;
                let last = (offset + len - 1) / chunk;
                let mut out = Vec::with_capacity(len as usize);
                for c in first..=last {
                    let chunk_start = c * chunk;
                    let chunk_len = chunk.min(length - chunk_start);
                    let mut buf = vec![0u8; chunk_len as usize];
                    self.rows.read_at(row, first_record + c * (4 + chunk) + 4, &mut buf)?;
                    h.bytes_fetched += chunk_len;
                    self.fetched.fetch_add(chunk_len, Ordering::Relaxed);
                    let lo = offset.max(chunk_start) - chunk_start;
                    let hi = (offset + len).min(chunk_start + chunk_len) - chunk_start;
                    out.extend_from_slice(&buf[lo as usize..hi as usize]);
                }
                out
            }
        };
        h.cursor = offset + len;
        Ok(out)
    }

    /// Baseline reader that materializes the whole payload.
    pub fn read_all(&self, id: BlobId) -> Result<Vec<u8>, BlobError> {
        let mut h = self.open_blob(id)?;
        let len = h.meta.length;
        self.read_range(&mut h, 0, len)
    }

    /// Streaming reader over a handle, advancing its cursor.
    pub fn reader<'a>(&'a self, handle: &'a mut BlobHandle) -> BlobReader<'a> {
        BlobReader { store: self, handle }
    }

    /// Total payload bytes fetched from the backing store by all reads.
    pub fn bytes_fetched(&self) -> u64 {
        self.fetched.load(Ordering::Relaxed)
    }

    /// Inline payloads, for inclusion in the graph snapshot.
    pub fn inline_payloads(&self) -> Vec<(BlobId, Vec<u8>)> {
        self.state
            .read()
            .entries
            .iter()
            .filter_map(|(id, e)| match &e.payload {
                Stored::Inline(Some(p)) => Some((*id, p.to_vec())),
                _ => None,
            })
            .collect()
    }

    /// Reattaches an inline payload read back from a snapshot.
    pub fn restore_inline(&self, id: BlobId, bytes: Vec<u8>) -> Result<(), BlobError> {
        let mut state = self.state.write();
        let e = state.entries.get_mut(&id).ok_or(BlobError::UnknownBlob(id))?;
        if e.meta.length != bytes.len() as u64 {
            return Err(io::Error::new(io::ErrorKind::InvalidData, "inline payload length mismatch").into());
        }
        e.payload = Stored::Inline(Some(Arc::from(bytes)));
        Ok(())
    }
}

/// `std::io::Read` adapter over [`BlobStore::read_range`].
pub struct BlobReader<'a> {
    store: &'a BlobStore,
    handle: &'a mut BlobHandle,
}

impl Read for BlobReader<'_> {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        let remaining = self.handle.meta.length - self.handle.cursor;
        let n = (buf.len() as u64).min(remaining).min(self.store.config.chunk_size as u64);
        if n == 0 {
            return Ok(0);
        }
        let at = self.handle.cursor;
        let bytes = self
            .store
            .read_range(self.handle, at, n)
            .map_err(|e| io::Error::other(e.to_string()))?;
        buf[..bytes.len()].copy_from_slice(&bytes);
        Ok(bytes.len())
    }
}

/// Bytes a BLOB of `length` occupies in its row file.
fn record_span(length: u64, chunk_size: u32) -> u64 {
    let chunks = length.div_ceil(chunk_size as u64);
    chunks * 4 + length
}

fn write_header(path: &Path, config: &BlobConfig, mimes: &[String]) -> io::Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(HEADER_MAGIC);
    buf.extend_from_slice(&1u16.to_le_bytes());
    buf.extend_from_slice(&config.chunk_size.to_le_bytes());
    buf.extend_from_slice(&config.num_columns.to_le_bytes());
    buf.extend_from_slice(&config.inline_threshold.to_le_bytes());
    buf.extend_from_slice(&(mimes.len() as u32).to_le_bytes());
    for m in mimes {
        write_str(&mut buf, m)?;
    }
    write_atomic(path, &buf)
}

fn read_header(path: &Path) -> Result<(BlobConfig, Vec<String>), BlobError> {
    let bytes = std::fs::read(path)?;
    let mut r = bytes.as_slice();
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != HEADER_MAGIC {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "not a blob store header").into());
    }
    let _version = read_u16(&mut r)?;
    let chunk_size = read_u32(&mut r)?;
    let num_columns = read_u64(&mut r)?;
    let inline_threshold = read_u64(&mut r)?;
    let n = read_u32(&mut r)?;
    let mimes = (0..n).map(|_| read_str(&mut r)).collect::<io::Result<Vec<_>>>()?;
    Ok((BlobConfig { inline_threshold, chunk_size, num_columns }, mimes))
}
