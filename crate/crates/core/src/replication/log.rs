use std::fs::{File, OpenOptions};
use std::io::{self, Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::codec::{read_u32, read_u64};

/// One replicated write statement.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WriteLogEntry {
    pub version: u64,
    pub statement: String,
    pub checksum: u64,
}

pub fn checksum(version: u64, statement: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(version.to_le_bytes());
    h.update(statement.as_bytes());
    u64::from_le_bytes(h.finalize()[..8].try_into().expect("8 bytes"))
}

impl WriteLogEntry {
    pub fn new(version: u64, statement: impl Into<String>) -> Self {
        let statement = statement.into();
        WriteLogEntry { version, checksum: checksum(version, &statement), statement }
    }

    pub fn verify(&self) -> bool {
        self.checksum == checksum(self.version, &self.statement)
    }

    /// `version u64 | stmt_len u32 | stmt | checksum u64`, little-endian.
    pub fn encode(&self, w: &mut impl Write) -> io::Result<()> {
        w.write_all(&self.version.to_le_bytes())?;
        w.write_all(&(self.statement.len() as u32).to_le_bytes())?;
        w.write_all(self.statement.as_bytes())?;
        w.write_all(&self.checksum.to_le_bytes())
    }

    /// Decodes one record without verifying it; `Ok(None)` at a clean end.
    pub fn decode(r: &mut impl Read) -> io::Result<Option<Self>> {
        let mut first = [0u8; 8];
        match r.read(&mut first[..1])? {
            0 => return Ok(None),
            _ => r.read_exact(&mut first[1..])?,
        }
        let version = u64::from_le_bytes(first);
        let len = read_u32(r)? as usize;
        let mut stmt = vec![0u8; len];
        r.read_exact(&mut stmt)?;
        let statement = String::from_utf8(stmt).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
        let checksum = read_u64(r)?;
        Ok(Some(WriteLogEntry { version, statement, checksum }))
    }
}

/// Append-only log file; every append is fsynced before it returns.
pub struct LogFile {
    file: File,
}

impl LogFile {
    pub fn open(path: &Path) -> io::Result<Self> {
        Ok(LogFile { file: OpenOptions::new().create(true).append(true).open(path)? })
    }

    pub fn append(&mut self, e: &WriteLogEntry) -> io::Result<()> {
        let mut buf = Vec::with_capacity(20 + e.statement.len());
        e.encode(&mut buf)?;
        self.file.write_all(&buf)?;
        self.file.sync_data()
    }

    pub fn read_all(path: &Path) -> io::Result<Vec<WriteLogEntry>> {
        let bytes = std::fs::read(path)?;
        let mut r = bytes.as_slice();
        let mut out = Vec::new();
        while let Some(e) = WriteLogEntry::decode(&mut r)? {
            out.push(e);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn checksum_covers_version_and_text() {
        let e = WriteLogEntry::new(3, "CREATE (a)");
        assert!(e.verify());
        assert!(!WriteLogEntry { version: 4, ..e.clone() }.verify());
        assert!(!WriteLogEntry { statement: "CREATE (b)".into(), ..e }.verify());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("write.log");
        let entries: Vec<WriteLogEntry> = (1..=5).map(|v| WriteLogEntry::new(v, format!("CREATE (:N {{v: {v}}})"))).collect();
        let mut f = LogFile::open(&p).unwrap();
        for e in &entries {
            f.append(e).unwrap();
        }
        assert_eq!(LogFile::read_all(&p).unwrap(), entries);
        // truncated tail is an error, not silently dropped
        let bytes = std::fs::read(&p).unwrap();
        std::fs::write(&p, &bytes[..bytes.len() - 3]).unwrap();
        assert!(LogFile::read_all(&p).is_err());
    }

    proptest! {
        #[test]
        fn encode_decode(version in any::<u64>(), stmt in "\\PC{0,40}") {
            let e = WriteLogEntry::new(version, stmt);
            let mut buf = Vec::new();
            e.encode(&mut buf).unwrap();
            prop_assert_eq!(WriteLogEntry::decode(&mut buf.as_slice()).unwrap(), Some(e));
        }
    }
}
