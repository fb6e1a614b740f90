use std::collections::{BTreeMap, HashMap};
use std::io::{self, BufRead, Write};
use std::path::Path;
use std::sync::Arc;

use parking_lot::RwLock;

use super::PlanError;

pub const DEFAULT_K: f64 = 4.0;

/// Per-row time estimate of one unstructured filter.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterSpeedStats {
    pub filter_id: String,
    /// Seconds per input row; meaningless while `invocations == 0`.
    pub v: f64,
    pub invocations: u64,
    pub k: f64,
}

impl FilterSpeedStats {
    pub fn new(filter_id: impl Into<String>, k: f64) -> Self {
        FilterSpeedStats { filter_id: filter_id.into(), v: 0.0, invocations: 0, k }
    }

    /// `v1 = cost/rows`, then `v_i = (v_{i-1} + k*cost/rows) / (k+1)`.
    pub fn record_invocation(&self, cost_secs: f64, rows: u64) -> Result<FilterSpeedStats, PlanError> {
        if rows == 0 {
            return Err(PlanError::ZeroRows);
        }
        if !(cost_secs >= 0.0) {
            return Err(PlanError::InvalidCost(cost_secs));
        }
        let sample = cost_secs / rows as f64;
        let v = if self.invocations == 0 { sample } else { (self.v + self.k * sample) / (self.k + 1.0) };
        Ok(FilterSpeedStats { filter_id: self.filter_id.clone(), v, invocations: self.invocations + 1, k: self.k })
    }

    /// Expected cost of the next invocation over `expected_rows` rows.
    pub fn expected_cost(&self, expected_rows: f64, default_v: f64) -> f64 {
        let v = if self.invocations == 0 { default_v } else { self.v };
        v * expected_rows
    }
}

/// Shared registry of filter speeds. Each record swaps in a new immutable
/// value, so readers always see a complete stats record.
#[derive(Debug)]
pub struct SpeedRegistry {
    k: f64,
    cells: RwLock<HashMap<String, Arc<FilterSpeedStats>>>,
}

impl Default for SpeedRegistry {
    fn default() -> Self {
        SpeedRegistry::new(DEFAULT_K)
    }
}

impl SpeedRegistry {
    pub fn new(k: f64) -> Self {
        SpeedRegistry { k, cells: RwLock::new(HashMap::new()) }
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn get(&self, filter_id: &str) -> Option<Arc<FilterSpeedStats>> {
        self.cells.read().get(filter_id).cloned()
    }

    pub fn record(&self, filter_id: &str, cost_secs: f64, rows: u64) -> Result<Arc<FilterSpeedStats>, PlanError> {
        let mut cells = self.cells.write();
        let next = match cells.get(filter_id) {
            Some(s) => s.record_invocation(cost_secs, rows)?,
            None => FilterSpeedStats::new(filter_id, self.k).record_invocation(cost_secs, rows)?,
        };
        let next = Arc::new(next);
        cells.insert(filter_id.to_string(), next.clone());
        Ok(next)
    }

    /// Replaces one filter's record, e.g. to seed a measured speed.
    pub fn set(&self, stats: FilterSpeedStats) {
        self.cells.write().insert(stats.filter_id.clone(), Arc::new(stats));
    }

    /// Speeds of every filter invoked at least once.
    pub fn snapshot(&self) -> BTreeMap<String, f64> {
        self.cells.read().values().filter(|s| s.invocations > 0).map(|s| (s.filter_id.clone(), s.v)).collect()
    }

    pub fn all(&self) -> Vec<FilterSpeedStats> {
        let mut v: Vec<_> = self.cells.read().values().map(|s| (**s).clone()).collect();
        v.sort_by(|a, b| a.filter_id.cmp(&b.filter_id));
        v
    }

    /// One `filter_id v i k` line per filter.
    pub fn write_to<W: Write>(&self, mut w: W) -> io::Result<()> {
        for s in self.all() {
            writeln!(w, "{} {:?} {} {:?}", s.filter_id, s.v, s.invocations, s.k)?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: R, k: f64) -> io::Result<Self> {
        let reg = SpeedRegistry::new(k);
        let bad = |line: &str| io::Error::new(io::ErrorKind::InvalidData, format!("bad speed record `{line}`"));
        for line in r.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 4 {
                return Err(bad(&line));
            }
            let stats = FilterSpeedStats {
                filter_id: f[0].to_string(),
                v: f[1].parse().map_err(|_| bad(&line))?,
                invocations: f[2].parse().map_err(|_| bad(&line))?,
                k: f[3].parse().map_err(|_| bad(&line))?,
            };
            reg.set(stats);
        }
        Ok(reg)
    }

    pub fn save(&self, path: &Path) -> io::Result<()> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        crate::codec::write_atomic(path, &buf)
    }

    pub fn load(path: &Path, k: f64) -> io::Result<Self> {
        match std::fs::File::open(path) {
            Ok(f) => Self::read_from(io::BufReader::new(f), k),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(SpeedRegistry::new(k)),
            Err(e) => Err(e),
        }
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn ema_examples() {
        let s = FilterSpeedStats::new("face~:", 4.0);
        let s = s.record_invocation(100.0, 100).unwrap();
        assert_eq!((s.v, s.invocations), (1.0, 1));
        let s = s.record_invocation(300.0, 100).unwrap();
        assert!((s.v - 2.6).abs() < 1e-12);
        assert_eq!(s.invocations, 2);
        assert_eq!(s.record_invocation(1.0, 0), Err(PlanError::ZeroRows));
    }

    #[test]
    fn expected_cost_examples() {
        let s = FilterSpeedStats::new("f", 4.0).record_invocation(1.0, 1).unwrap();
        assert_eq!(s.expected_cost(100.0, 0.1), 100.0);
        assert_eq!(s.expected_cost(0.0, 0.1), 0.0);
        let s = FilterSpeedStats::new("f", 4.0).record_invocation(100.0, 1).unwrap();
        assert_eq!(s.expected_cost(100.0, 0.1), 10000.0);
        assert_eq!(s.expected_cost(1.0, 0.1), 100.0);
        assert_eq!(FilterSpeedStats::new("f", 4.0).expected_cost(10.0, 0.1), 1.0);
    }

    #[test]
    fn registry_round_trip() {
        let reg = SpeedRegistry::new(2.0);
        reg.record("face~:", 0.5, 10).unwrap();
        reg.record("animal=", 3.0, 3).unwrap();
        reg.record("animal=", 1.0, 1).unwrap();
        let mut buf = Vec::new();
        reg.write_to(&mut buf).unwrap();
        let back = SpeedRegistry::read_from(&buf[..], 2.0).unwrap();
        assert_eq!(back.all(), reg.all());
        assert!(SpeedRegistry::read_from(&b"x 1 2"[..], 4.0).is_err());
    }

    proptest! {
        #[test]
        fn ema_stays_between_previous_and_sample(prev in 0.001f64..100.0, cost in 0.0f64..1e4, rows in 1u64..1000, k in 0.5f64..20.0) {
            let s = FilterSpeedStats { filter_id: "f".into(), v: prev, invocations: 3, k };
            let next = s.record_invocation(cost, rows).unwrap();
            let sample = cost / rows as f64;
            prop_assert!(next.v >= prev.min(sample) - 1e-12 && next.v <= prev.max(sample) + 1e-12);
            prop_assert_eq!(next.invocations, 4);
        }

        #[test]
        fn larger_k_tracks_sample_closer(prev in 0.001f64..100.0, cost in 0.0f64..1e4, rows in 1u64..1000, k in 0.5f64..20.0) {
            let s = |k| FilterSpeedStats { filter_id: "f".into(), v: prev, invocations: 1, k };
            let sample = cost / rows as f64;
            let lo = s(k).record_invocation(cost, rows).unwrap().v;
            let hi = s(k * 2.0).record_invocation(cost, rows).unwrap().v;
            prop_assert!((hi - sample).abs() <= (lo - sample).abs() + 1e-12);
        }
    }
}
