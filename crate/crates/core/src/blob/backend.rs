use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{self, Read, Seek, SeekFrom, Write};
use std::path::PathBuf;

use parking_lot::Mutex;

pub const ROW_MAGIC: &[u8; 4] = b"PBLB";
pub const ROW_VERSION: u16 = 1;
/// Bytes taken by the row-file header (magic + version).
pub const ROW_HEADER_LEN: u64 = 6;

/// Append-only byte rows addressed by row key. One row holds the chunk
/// records of up to `num_columns` external BLOBs.
pub trait RowBackend: Send + Sync {
    /// Appends `data` to `row`, creating the row (and its header) if needed.
    /// Returns the offset at which `data` starts.
    fn append(&self, row: u64, data: &[u8]) -> io::Result<u64>;

    fn read_at(&self, row: u64, offset: u64, buf: &mut [u8]) -> io::Result<()>;
}

fn row_header() -> [u8; 6] {
    let mut h = [0u8; 6];
    h[..4].copy_from_slice(ROW_MAGIC);
    h[4..].copy_from_slice(&ROW_VERSION.to_le_bytes());
    h
}

#[derive(Default)]
pub struct MemoryRows {
    rows: Mutex<HashMap<u64, Vec<u8>>>,
}

impl RowBackend for MemoryRows {
    fn append(&self, row: u64, data: &[u8]) -> io::Result<u64> {
        let mut rows = self.rows.lock();
        let buf = rows.entry(row).or_insert_with(|| row_header().to_vec());
        let at = buf.len() as u64;
        buf.extend_from_slice(data);
        Ok(at)
    }

    fn read_at(&self, row: u64, offset: u64, buf: &mut [u8]) -> io::Result<()> {
        let rows = self.rows.lock();
        let data = rows.get(&row).ok_or(io::ErrorKind::NotFound)?;
        let start = offset as usize;
        let end = start.checked_add(buf.len()).filter(|e| *e <= data.len()).ok_or(io::ErrorKind::UnexpectedEof)?;
        buf.copy_from_slice(&data[start..end]);
        Ok(())
    }
}

/// One file per row key under a directory.
pub struct FileRows {
    dir: PathBuf,
}

impl FileRows {
    pub fn new(dir: impl Into<PathBuf>) -> io::Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(FileRows { dir })
    }

    fn path(&self, row: u64) -> PathBuf {
        self.dir.join(format!("row-{row:016x}.pblb"))
    }
}

impl RowBackend for FileRows {
    fn append(&self, row: u64, data: &[u8]) -> io::Result<u64> {
        let path = self.path(row);
        let mut f = OpenOptions::new().create(true).append(true).open(&path)?;
        let mut at = f.metadata()?.len();
        if at == 0 {
            f.write_all(&row_header())?;
            at = ROW_HEADER_LEN;
        }
        f.write_all(data)?;
        Ok(at)
    }

    fn read_at(&self, row: u64, offset: u64, buf: &mut [u8]) -> io::Result<()> {
        let mut f = File::open(self.path(row))?;
        f.seek(SeekFrom::Start(offset))?;
        f.read_exact(buf)
    }
}
