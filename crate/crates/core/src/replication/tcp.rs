//! Replication messages over a local TCP socket: a follower thread applies
//! `Append` frames in order and answers each with an `Ack`.

use std::io::{BufReader, BufWriter, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::thread::JoinHandle;

use super::{Message, ReplError, ReplicaNode, Role, WriteLogEntry};

/// Serves one leader connection until `Close`, then returns the replica.
pub fn spawn_follower(mut node: ReplicaNode) -> Result<(SocketAddr, JoinHandle<Result<ReplicaNode, ReplError>>), ReplError> {
    let listener = TcpListener::bind("127.0.0.1:0")?;
    let addr = listener.local_addr()?;
    let handle = std::thread::spawn(move || {
        let (stream, _) = listener.accept()?;
        let mut r = BufReader::new(stream.try_clone()?);
        let mut w = BufWriter::new(stream);
        loop {
            match Message::decode(&mut r)? {
                Message::Append(entries) => {
                    for e in &entries {
                        if e.version == node.applied_version + 1 {
                            node.apply(e)?;
                        }
                    }
                    Message::Ack(node.applied_version).encode(&mut w)?;
                    w.flush()?;
                }
                Message::Ack(_) => {}
                Message::Close => return Ok(node),
            }
        }
    });
    Ok((addr, handle))
}

/// Leader side of one link.
pub struct LeaderLink {
    reader: BufReader<TcpStream>,
    writer: BufWriter<TcpStream>,
}

impl LeaderLink {
    pub fn connect(addr: SocketAddr) -> Result<Self, ReplError> {
        let s = TcpStream::connect(addr)?;
        Ok(LeaderLink { reader: BufReader::new(s.try_clone()?), writer: BufWriter::new(s) })
    }

    /// Sends entries and waits for the follower's acknowledged version.
    pub fn append(&mut self, entries: Vec<WriteLogEntry>) -> Result<u64, ReplError> {
        Message::Append(entries).encode(&mut self.writer)?;
        self.writer.flush()?;
        loop {
            if let Message::Ack(v) = Message::decode(&mut self.reader)? {
                return Ok(v);
            }
        }
    }

    pub fn close(mut self) -> Result<(), ReplError> {
        Message::Close.encode(&mut self.writer)?;
        self.writer.flush()?;
        Ok(())
    }
}

/// Replicates `leader`'s whole log to a fresh follower over TCP in batches
/// and returns the follower.
pub fn replicate_over_tcp(leader: &ReplicaNode, batch: usize) -> Result<ReplicaNode, ReplError> {
    let follower = ReplicaNode::new(1, Role::Follower, &[])?;
    let (addr, handle) = spawn_follower(follower)?;
    let mut link = LeaderLink::connect(addr)?;
    for chunk in leader.log.chunks(batch.max(1)) {
        let acked = link.append(chunk.to_vec())?;
        debug_assert_eq!(acked, chunk.last().map_or(0, |e| e.version));
    }
    link.close()?;
    handle.join().expect("follower thread panicked")
}

#[cfg(test)]
mod tests {
    use std::collections::HashMap;

    use super::*;

    #[test]
    fn follower_over_socket_converges() {
        let mut leader = ReplicaNode::new(0, Role::Leader, &[]).unwrap();
        for i in 1..=20u64 {
            let e = WriteLogEntry::new(i, format!("CREATE (:N {{i: {i}}})"));
            leader.apply(&e).unwrap();
        }
        leader.apply(&WriteLogEntry::new(21, "MATCH (n:N) WHERE n.i < 5 DETACH DELETE n")).unwrap();
        let follower = replicate_over_tcp(&leader, 8).unwrap();
        assert_eq!(follower.applied_version, 21);
        assert_eq!(follower.engine.digest(), leader.engine.digest());
        let rows = follower.engine.query("MATCH (n:N) RETURN n.i", &HashMap::new()).unwrap().rows;
        assert_eq!(rows.len(), 16);
    }

    #[test]
    fn corrupt_frame_stops_follower() {
        let follower = ReplicaNode::new(1, Role::Follower, &[]).unwrap();
        let (addr, handle) = spawn_follower(follower).unwrap();
        let mut link = LeaderLink::connect(addr).unwrap();
        let mut bad = WriteLogEntry::new(1, "CREATE (a)");
        bad.checksum ^= 1;
        Message::Append(vec![bad]).encode(&mut link.writer).unwrap();
        link.writer.flush().unwrap();
        assert!(matches!(handle.join().unwrap(), Err(ReplError::ChecksumMismatch { version: 1, .. })));
    }
}
