use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};
use std::fmt::Write as _;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Message, ReplError, ReplicaId, WriteLogEntry};
use crate::engine::{Config, Database};
use crate::exec::{QueryResult, SimClock};
use crate::graph::Value;
use crate::query::{classify, StatementKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Leader,
    Follower,
}

pub struct ReplicaNode {
    pub id: ReplicaId,
    pub role: Role,
    pub log: Vec<WriteLogEntry>,
    /// Highest contiguously applied version; equals `log.len()`.
    pub applied_version: u64,
    pub engine: Database,
    /// Halted after a checksum mismatch or divergent log.
    pub flagged: bool,
    /// Reachable for reads; a down replica still receives replication traffic.
    pub up: bool,
    /// Has caught up with the leader and may serve reads.
    pub serving: bool,
    pub reads_served: u64,
}

impl ReplicaNode {
    /// Fresh replica with a simulated clock, so timing never makes two
    /// replicas plan differently.
    pub fn new(id: ReplicaId, role: Role, indexes: &[(Option<String>, String)]) -> Result<Self, ReplError> {
        let engine = Database::in_memory(Config::default())?.with_clock(Arc::new(SimClock::new()));
        for (l, k) in indexes {
            engine.create_index(l.as_deref(), k)?;
        }
        Ok(ReplicaNode {
            id,
            role,
            log: Vec::new(),
            applied_version: 0,
            engine,
            flagged: false,
            up: true,
            serving: role == Role::Leader,
            reads_served: 0,
        })
    }

    /// Verifies and applies the next entry.
    pub fn apply(&mut self, e: &WriteLogEntry) -> Result<(), ReplError> {
        debug_assert_eq!(e.version, self.applied_version + 1);
        if !e.verify() {
            self.flagged = true;
            return Err(ReplError::ChecksumMismatch { replica: self.id, version: e.version });
        }
        if let Err(err) = self.engine.query(&e.statement, &HashMap::new()) {
            self.flagged = true;
            return Err(err.into());
        }
        self.log.push(e.clone());
        self.applied_version = e.version;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub replicas: usize,
    pub drop_rate: f64,
    /// Per-message delay is uniform in `0..=max_delay` ticks.
    pub max_delay: u64,
    pub retransmit_every: u64,
    /// Most entries per append message.
    pub batch: usize,
    pub seed: u64,
    /// Property indexes created on every replica.
    pub indexes: Vec<(Option<String>, String)>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            replicas: 3,
            drop_rate: 0.0,
            max_delay: 10,
            retransmit_every: 10,
            batch: 64,
            seed: 0,
            indexes: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubmitOutcome {
    pub replica: ReplicaId,
    pub kind: StatementKind,
    pub result: QueryResult,
    /// Version assigned to a write.
    pub version: Option<u64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BusStats {
    pub sent: u64,
    pub dropped: u64,
    pub delivered: u64,
}

/// Single-threaded discrete-event cluster. One tick is one simulated
/// millisecond. Messages on one link arrive in send order or not at all.
pub struct ClusterSim {
    cfg: SimConfig,
    pub replicas: Vec<ReplicaNode>,
    leader: Option<ReplicaId>,
    now: u64,
    rng: ChaCha8Rng,
    queue: BinaryHeap<Reverse<(u64, u64)>>,
    in_flight: HashMap<u64, (ReplicaId, ReplicaId, Message)>,
    seq: u64,
    link_clear: HashMap<(ReplicaId, ReplicaId), u64>,
    /// Leader's view of each replica's applied version.
    acked: Vec<u64>,
    sent_upto: Vec<u64>,
    pub stats: BusStats,
    trace: String,
}

impl ClusterSim {
    /// Replica 0 leads; the rest follow from version 0.
    pub fn new(cfg: SimConfig) -> Result<Self, ReplError> {
        let mut replicas = Vec::with_capacity(cfg.replicas);
        for i in 0..cfg.replicas {
            let mut r = ReplicaNode::new(i, if i == 0 { Role::Leader } else { Role::Follower }, &cfg.indexes)?;
            r.serving = true;
            replicas.push(r);
        }
        let n = replicas.len();
        Ok(ClusterSim {
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            leader: (n > 0).then_some(0),
            cfg,
            replicas,
            now: 0,
            queue: BinaryHeap::new(),
            in_flight: HashMap::new(),
            seq: 0,
            link_clear: HashMap::new(),
            acked: vec![0; n],
            sent_upto: vec![0; n],
            stats: BusStats::default(),
            trace: String::new(),
        })
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn leader(&self) -> Option<ReplicaId> {
        self.leader
    }

    pub fn leader_node(&self) -> Result<&ReplicaNode, ReplError> {
        self.leader.map(|l| &self.replicas[l]).ok_or(ReplError::NoLeader)
    }

    pub fn trace(&self) -> &str {
        &self.trace
    }

    fn log_event(&mut self, args: String) {
        let _ = writeln!(self.trace, "{} {}", self.now, args);
    }

    fn send(&mut self, from: ReplicaId, to: ReplicaId, msg: Message) {
        self.stats.sent += 1;
        let what = match &msg {
            Message::Append(e) => format!("append {}..{}", e.first().map_or(0, |e| e.version), e.last().map_or(0, |e| e.version)),
            Message::Ack(v) => format!("ack {v}"),
            Message::Close => "close".into(),
        };
        if self.rng.random_bool(self.cfg.drop_rate) {
            self.stats.dropped += 1;
            self.log_event(format!("drop {from}->{to} {what}"));
            return;
        }
        let delay = self.rng.random_range(0..=self.cfg.max_delay);
        let clear = self.link_clear.entry((from, to)).or_insert(0);
        let at = (self.now + delay).max(*clear);
        *clear = at;
        self.seq += 1;
        self.queue.push(Reverse((at, self.seq)));
        self.in_flight.insert(self.seq, (from, to, msg));
        self.log_event(format!("send {from}->{to} {what} @{at}"));
    }

    fn followers(&self) -> Vec<ReplicaId> {
        self.replicas
            .iter()
            .filter(|r| r.role == Role::Follower && r.serving && !r.flagged)
            .map(|r| r.id)
            .collect()
    }

    fn send_append(&mut self, leader: ReplicaId, f: ReplicaId, from_version: u64) {
        let log = &self.replicas[leader].log;
        let start = from_version.saturating_sub(1) as usize;
        if start >= log.len() {
            return;
        }
        let end = (start + self.cfg.batch).min(log.len());
        let entries = log[start..end].to_vec();
        self.sent_upto[f] = self.sent_upto[f].max(end as u64);
        self.send(leader, f, Message::Append(entries));
    }

    /// Routes a statement: writes go to the leader, reads to a random
    /// available replica, retrying elsewhere when the pick is unavailable.
    pub fn submit(&mut self, text: &str) -> Result<SubmitOutcome, ReplError> {
        match classify(text).map_err(|e| ReplError::Engine(e.into()))? {
            StatementKind::Write => self.write(text),
            StatementKind::Read => self.read(text),
        }
    }

    fn write(&mut self, text: &str) -> Result<SubmitOutcome, ReplError> {
        let l = self.leader.ok_or(ReplError::NoLeader)?;
        let result = self.replicas[l].engine.query(text, &HashMap::new())?;
        let version = self.replicas[l].applied_version + 1;
        let entry = WriteLogEntry::new(version, text);
        let leader = &mut self.replicas[l];
        leader.log.push(entry);
        leader.applied_version = version;
        self.acked[l] = version;
        self.log_event(format!("commit v{version}"));
        for f in self.followers() {
            let from = self.sent_upto[f] + 1;
            self.send_append(l, f, from);
        }
        Ok(SubmitOutcome { replica: l, kind: StatementKind::Write, result, version: Some(version) })
    }

    fn read(&mut self, text: &str) -> Result<SubmitOutcome, ReplError> {
        let mut candidates: Vec<ReplicaId> = (0..self.replicas.len()).collect();
        while !candidates.is_empty() {
            let pick = candidates.swap_remove(self.rng.random_range(0..candidates.len()));
            let r = &self.replicas[pick];
            if !(r.up && r.serving && !r.flagged) {
                self.log_event(format!("read retry: {pick} unavailable"));
                continue;
            }
            return self.read_on(pick, text);
        }
        Err(ReplError::ReplicaUnavailable)
    }

    /// Executes a read on one replica.
    pub fn read_on(&mut self, id: ReplicaId, text: &str) -> Result<SubmitOutcome, ReplError> {
        let r = self.replicas.get_mut(id).ok_or(ReplError::UnknownReplica(id))?;
        let result = r.engine.query(text, &HashMap::<String, Value>::new())?;
        r.reads_served += 1;
        self.log_event(format!("read on {id}"));
        Ok(SubmitOutcome { replica: id, kind: StatementKind::Read, result, version: None })
    }

    /// Advances time by one tick, delivering everything due.
    pub fn tick(&mut self) {
        self.now += 1;
        while let Some(&Reverse((at, seq))) = self.queue.peek() {
            if at > self.now {
                break;
            }
            self.queue.pop();
            let (from, to, msg) = self.in_flight.remove(&seq).expect("queued message");
            self.stats.delivered += 1;
            self.deliver(from, to, msg);
        }
        if self.now % self.cfg.retransmit_every.max(1) == 0 {
            if let Some(l) = self.leader {
                let latest = self.replicas[l].applied_version;
                for f in self.followers() {
                    if self.acked[f] < latest {
                        let from = self.acked[f] + 1;
                        self.send_append(l, f, from);
                    }
                }
            }
        }
    }

    fn deliver(&mut self, from: ReplicaId, to: ReplicaId, msg: Message) {
        match msg {
            Message::Append(entries) => {
                if self.replicas[to].flagged {
                    return;
                }
                for e in &entries {
                    let r = &mut self.replicas[to];
                    if e.version <= r.applied_version {
                        continue;
                    }
                    if e.version != r.applied_version + 1 {
                        break;
                    }
                    let v = e.version;
                    match r.apply(e) {
                        Ok(()) => self.log_event(format!("apply {to} v{v}")),
                        Err(err) => {
                            self.log_event(format!("flag {to}: {err}"));
                            return;
                        }
                    }
                }
                let applied = self.replicas[to].applied_version;
                self.send(to, from, Message::Ack(applied));
            }
            Message::Ack(v) => {
                self.acked[from] = self.acked[from].max(v);
                self.log_event(format!("acked {from} v{}", self.acked[from]));
            }
            Message::Close => {}
        }
    }

    fn lagging(&self) -> bool {
        let Some(l) = self.leader else { return false };
        let latest = self.replicas[l].applied_version;
        self.followers().iter().any(|&f| self.replicas[f].applied_version < latest || self.acked[f] < latest)
    }

    /// Ticks until no message is in flight and every follower has caught
    /// up, or `max_ticks` pass. Returns the ticks used.
    pub fn run_until_quiescent(&mut self, max_ticks: u64) -> u64 {
        let start = self.now;
        while (!self.queue.is_empty() || self.lagging()) && self.now - start < max_ticks {
            self.tick();
        }
        self.now - start
    }

    /// Adds a follower that already holds `prefix` of the history (possibly
    /// tampered with); it serves nothing until it joins.
    pub fn add_stale_replica(&mut self, prefix: &[WriteLogEntry]) -> Result<ReplicaId, ReplError> {
        let id = self.replicas.len();
        let mut r = ReplicaNode::new(id, Role::Follower, &self.cfg.indexes)?;
        for e in prefix {
            if !e.verify() {
                // a corrupted local log is kept as is and caught by join
                r.log.push(e.clone());
                r.applied_version = e.version;
                continue;
            }
            r.apply(e)?;
        }
        self.replicas.push(r);
        self.acked.push(0);
        self.sent_upto.push(0);
        self.log_event(format!("new replica {id} at v{}", self.replicas[id].applied_version));
        Ok(id)
    }

    /// Brings a replica into the cluster: its log must be a prefix of the
    /// leader's; the missing suffix is replayed before it serves reads.
    /// Returns the number of entries transferred.
    pub fn join(&mut self, id: ReplicaId) -> Result<u64, ReplError> {
        let l = self.leader.ok_or(ReplError::NoLeader)?;
        if id >= self.replicas.len() {
            return Err(ReplError::UnknownReplica(id));
        }
        let leader_log = self.replicas[l].log.clone();
        let r = &mut self.replicas[id];
        if let Some(pos) = divergence(&r.log, &leader_log) {
            r.flagged = true;
            self.log_event(format!("join {id} refused: diverges at v{pos}"));
            return Err(ReplError::DivergentLog { replica: id, version: pos });
        }
        let from = r.applied_version as usize;
        let missing = &leader_log[from..];
        for e in missing {
            r.apply(e)?;
        }
        r.serving = true;
        let n = missing.len() as u64;
        self.acked[id] = self.replicas[id].applied_version;
        self.sent_upto[id] = self.acked[id];
        self.log_event(format!("join {id}: replayed {n}"));
        Ok(n)
    }

    pub fn digests(&self) -> Vec<u64> {
        self.replicas.iter().map(|r| r.engine.digest()).collect()
    }

    /// Whether every replica's log is the gapless prefix `1..=applied` of
    /// the leader's log.
    pub fn logs_gapless(&self) -> bool {
        let Some(l) = self.leader else { return true };
        let leader_log = &self.replicas[l].log;
        self.replicas.iter().filter(|r| !r.flagged).all(|r| {
            r.log.len() as u64 == r.applied_version
                && r.log.iter().enumerate().all(|(i, e)| e.version == i as u64 + 1)
                && r.log.iter().zip(leader_log).all(|(a, b)| a == b)
        })
    }
}

/// First version at which `local` departs from `leader`, if any.
fn divergence(local: &[WriteLogEntry], leader: &[WriteLogEntry]) -> Option<u64> {
    for (i, e) in local.iter().enumerate() {
        match leader.get(i) {
            Some(l) if l == e && e.verify() => {}
            _ => return Some(i as u64 + 1),
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioReport {
    pub leader_digest: u64,
    pub digests: Vec<u64>,
    pub versions: Vec<u64>,
    pub gapless: bool,
    pub joined_replayed: u64,
    pub ticks: u64,
    pub stats: BusStats,
    pub trace: String,
}

impl ScenarioReport {
    pub fn converged(&self) -> bool {
        self.digests.iter().all(|d| *d == self.leader_digest)
    }
}

/// Random write workload over a fixed set of keyed items.
fn random_write(rng: &mut ChaCha8Rng, i: usize) -> String {
    let k = rng.random_range(0..64);
    match rng.random_range(0..10) {
        0..=4 => format!("CREATE (:Item {{k: {k}, v: {i}}})"),
        5..=6 => format!("MATCH (n:Item) WHERE n.k = {k} SET n.v = {}", rng.random_range(0..1000)),
        7..=8 => format!(
            "MATCH (a:Item),(b:Item) WHERE a.k = {k} AND b.k = {} CREATE (a)-[:L {{w: {i}}}]->(b)",
            rng.random_range(0..64)
        ),
        _ => format!("MATCH (n:Item) WHERE n.k = {k} AND n.v < {} DETACH DELETE n", rng.random_range(0..500)),
    }
}

/// `initial` replicas take `writes` random writes interleaved with reads
/// and ticks; then a replica holding the history up to `writes - lag`
/// joins, and the bus runs to quiescence.
pub fn convergence_scenario(mut cfg: SimConfig, writes: usize, lag: u64) -> Result<ScenarioReport, ReplError> {
    cfg.indexes = vec![(Some("Item".into()), "k".into())];
    let seed = cfg.seed;
    let mut sim = ClusterSim::new(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    for i in 0..writes {
        sim.submit(&random_write(&mut rng, i))?;
        if rng.random_bool(0.2) {
            sim.submit(&format!("MATCH (n:Item) WHERE n.k = {} RETURN n.v", rng.random_range(0..64)))?;
        }
        for _ in 0..rng.random_range(0..3) {
            sim.tick();
        }
    }
    let leader_log = sim.leader_node()?.log.clone();
    let upto = (leader_log.len() as u64).saturating_sub(lag) as usize;
    let late = sim.add_stale_replica(&leader_log[..upto])?;
    let joined_replayed = sim.join(late)?;
    let ticks = sim.run_until_quiescent(1_000_000);
    let leader = sim.leader().ok_or(ReplError::NoLeader)?;
    let digests = sim.digests();
    Ok(ScenarioReport {
        leader_digest: digests[leader],
        versions: sim.replicas.iter().map(|r| r.applied_version).collect(),
        digests,
        gapless: sim.logs_gapless(),
        joined_replayed,
        ticks,
        stats: sim.stats,
        trace: sim.trace().to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(replicas: usize, drop_rate: f64, seed: u64) -> SimConfig {
        SimConfig { replicas, drop_rate, max_delay: 50, seed, ..SimConfig::default() }
    }

    #[test]
    fn reads_run_on_exactly_one_replica() {
        let mut sim = ClusterSim::new(cfg(3, 0.0, 1)).unwrap();
        let out = sim.submit("MATCH (n) RETURN n").unwrap();
        assert_eq!(out.kind, StatementKind::Read);
        let served: Vec<u64> = sim.replicas.iter().map(|r| r.reads_served).collect();
        assert_eq!(served.iter().sum::<u64>(), 1);
        assert_eq!(served[out.replica], 1);
    }

    #[test]
    fn writes_get_consecutive_versions() {
        let mut sim = ClusterSim::new(cfg(3, 0.0, 2)).unwrap();
        for v in 1..=5 {
            let out = sim.submit(&format!("CREATE (:N {{v: {v}}})")).unwrap();
            assert_eq!(out.version, Some(v));
            assert_eq!(out.replica, 0);
            assert_eq!(sim.leader_node().unwrap().log.len() as u64, v);
        }
        // replication is asynchronous: nothing has been delivered yet
        sim.run_until_quiescent(10_000);
        assert!(sim.replicas.iter().all(|r| r.applied_version == 5));
        let d = sim.digests();
        assert!(d.iter().all(|x| *x == d[0]));
    }

    #[test]
    fn leader_reads_reflect_acknowledged_writes() {
        let mut sim = ClusterSim::new(cfg(3, 0.1, 3)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut expected = 0usize;
        for i in 0..100 {
            sim.submit(&format!("CREATE (:N {{i: {i}}})")).unwrap();
            expected += 1;
            if rng.random_bool(0.5) {
                let r = sim.read_on(0, "MATCH (n:N) RETURN n.i").unwrap();
                assert_eq!(r.result.rows.len(), expected);
            }
            sim.tick();
        }
    }

    #[test]
    fn unavailable_replicas_are_skipped() {
        let mut sim = ClusterSim::new(cfg(3, 0.0, 4)).unwrap();
        sim.replicas[1].up = false;
        sim.replicas[2].up = false;
        for _ in 0..10 {
            assert_eq!(sim.submit("MATCH (n) RETURN n").unwrap().replica, 0);
        }
        sim.replicas[0].up = false;
        assert!(matches!(sim.submit("MATCH (n) RETURN n"), Err(ReplError::ReplicaUnavailable)));
    }

    #[test]
    fn no_leader_rejects_writes() {
        let mut sim = ClusterSim::new(SimConfig { replicas: 0, ..SimConfig::default() }).unwrap();
        assert!(matches!(sim.submit("CREATE (a)"), Err(ReplError::NoLeader)));
    }

    #[test]
    fn drops_are_retransmitted_without_gaps() {
        let mut sim = ClusterSim::new(cfg(3, 0.3, 5)).unwrap();
        for i in 0..50 {
            sim.submit(&format!("CREATE (:N {{i: {i}}})")).unwrap();
            sim.tick();
            assert!(sim.logs_gapless());
        }
        sim.run_until_quiescent(100_000);
        assert!(sim.stats.dropped > 0);
        assert!(sim.logs_gapless());
        let d = sim.digests();
        assert!(d.iter().all(|x| *x == d[0]));
    }

    #[test]
    fn join_at_same_version_transfers_nothing() {
        let mut sim = ClusterSim::new(cfg(2, 0.0, 6)).unwrap();
        for i in 0..5 {
            sim.submit(&format!("CREATE (:N {{i: {i}}})")).unwrap();
        }
        let log = sim.leader_node().unwrap().log.clone();
        let id = sim.add_stale_replica(&log).unwrap();
        assert_eq!(sim.join(id).unwrap(), 0);
        let id = sim.add_stale_replica(&log[..2]).unwrap();
        assert!(!sim.replicas[id].serving);
        assert_eq!(sim.join(id).unwrap(), 3);
        assert!(sim.replicas[id].serving);
        assert_eq!(sim.replicas[id].engine.digest(), sim.replicas[0].engine.digest());
    }

    #[test]
    fn corrupted_local_log_is_divergent() {
        let mut sim = ClusterSim::new(cfg(2, 0.0, 7)).unwrap();
        for i in 0..5 {
            sim.submit(&format!("CREATE (:N {{i: {i}}})")).unwrap();
        }
        let mut log = sim.leader_node().unwrap().log[..3].to_vec();
        log[1].statement = "CREATE (:Evil)".into();
        let id = sim.add_stale_replica(&log).unwrap();
        assert!(matches!(sim.join(id), Err(ReplError::DivergentLog { version: 2, .. })));
        assert!(sim.replicas[id].flagged);
        // a well-formed but different history diverges too
        let other = vec![WriteLogEntry::new(1, "CREATE (:Other)")];
        let id = sim.add_stale_replica(&other).unwrap();
        assert!(matches!(sim.join(id), Err(ReplError::DivergentLog { version: 1, .. })));
    }

    #[test]
    fn checksum_mismatch_flags_follower() {
        let mut sim = ClusterSim::new(cfg(2, 0.0, 8)).unwrap();
        let mut bad = WriteLogEntry::new(1, "CREATE (a)");
        bad.checksum ^= 1;
        sim.deliver(0, 1, Message::Append(vec![bad]));
        assert!(sim.replicas[1].flagged);
        assert_eq!(sim.replicas[1].applied_version, 0);
    }

    #[test]
    fn scenario_is_deterministic_and_converges() {
        let c = SimConfig { replicas: 4, drop_rate: 0.1, max_delay: 50, seed: 42, ..SimConfig::default() };
        let a = convergence_scenario(c.clone(), 150, 20).unwrap();
        let b = convergence_scenario(c, 150, 20).unwrap();
        assert_eq!(a.trace, b.trace);
        assert!(a.converged(), "{a:?}");
        assert!(a.gapless);
        assert_eq!(a.joined_replayed, 20);
        assert_eq!(a.digests.len(), 5);
    }
}
