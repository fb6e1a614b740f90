//! Leader/follower replication of write statements.
//!
//! The leader numbers each write statement with the next version, applies
//! it, appends it to its log and acknowledges it; followers receive log
//! entries asynchronously, verify them and replay the statements through
//! their own engine. A stale node joining the cluster first replays the
//! suffix of the leader's log it is missing. Everything runs inside a
//! deterministic discrete-event simulation; [`tcp`] carries the same
//! messages over real sockets for smoke tests.

mod log;
mod sim;
pub mod tcp;

pub use log::{checksum, LogFile, WriteLogEntry};
pub use sim::{convergence_scenario, BusStats, ClusterSim, ReplicaNode, Role, ScenarioReport, SimConfig, SubmitOutcome};

use std::io::{self, Read, Write};

use thiserror::Error;

use crate::codec::{read_u32, read_u64, read_u8};
use crate::engine::DbError;

pub type ReplicaId = usize;

#[derive(Debug, Error)]
pub enum ReplError {
    #[error("cluster has no leader")]
    NoLeader,
    #[error("no replica available to serve the read")]
    ReplicaUnavailable,
    #[error("replica {replica}: checksum mismatch at version {version}")]
    ChecksumMismatch { replica: ReplicaId, version: u64 },
    #[error("replica {replica}: local log diverges from the leader at version {version}")]
    DivergentLog { replica: ReplicaId, version: u64 },
    #[error("unknown replica {0}")]
    UnknownReplica(ReplicaId),
    #[error(transparent)]
    Engine(#[from] DbError),
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
}

/// What travels between replicas.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Message {
    /// Consecutive log entries, oldest first.
    Append(Vec<WriteLogEntry>),
    /// The sender's highest contiguously applied version.
    Ack(u64),
    Close,
}

impl Message {
    pub fn encode(&self, w: &mut impl Write) -> io::Result<()> {
        match self {
            Message::Append(entries) => {
                w.write_all(&[0])?;
                w.write_all(&(entries.len() as u32).to_le_bytes())?;
                for e in entries {
                    e.encode(w)?;
                }
            }
            Message::Ack(v) => {
                w.write_all(&[1])?;
                w.write_all(&v.to_le_bytes())?;
            }
            Message::Close => w.write_all(&[2])?,
        }
        Ok(())
    }

    pub fn decode(r: &mut impl Read) -> io::Result<Message> {
        Ok(match read_u8(r)? {
            0 => {
                let n = read_u32(r)?;
                let mut entries = Vec::with_capacity(n as usize);
                for _ in 0..n {
                    entries.push(
                        WriteLogEntry::decode(r)?.ok_or_else(|| io::Error::from(io::ErrorKind::UnexpectedEof))?,
                    );
                }
                Message::Append(entries)
            }
            1 => Message::Ack(read_u64(r)?),
            2 => Message::Close,
            t => return Err(io::Error::new(io::ErrorKind::InvalidData, format!("unknown message tag {t}"))),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn message_round_trip() {
        for m in [
            Message::Append(vec![WriteLogEntry::new(1, "CREATE (a)"), WriteLogEntry::new(2, "CREATE (b)")]),
            Message::Append(vec![]),
            Message::Ack(42),
            Message::Close,
        ] {
            let mut buf = Vec::new();
            m.encode(&mut buf).unwrap();
            assert_eq!(Message::decode(&mut buf.as_slice()).unwrap(), m);
        }
        assert!(Message::decode(&mut [9u8].as_slice()).is_err());
    }
}
