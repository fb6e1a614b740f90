//! Demo operations as plain Rust returning JSON text, so they run and are
//! tested on the host as well as in the browser.

use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use blobgraph::engine::{Config, Database, PlanChoice};
use blobgraph::exec::SimClock;
use blobgraph::graph::fixture::sports_graph;
use blobgraph::index::{brute_knn, BuildParams, SemanticSpace, VectorIndex};
use blobgraph::planner::FilterSpeedStats;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value as Json};

fn err(msg: impl ToString) -> String {
    json!({ "error": msg.to_string() }).to_string()
}

/// 2-D points in the unit square, a bucketed index over them, and the
/// approximate and exact neighbours of `(qx, qy)`.
pub fn knn(points: usize, buckets: u64, k: usize, nprobe: usize, seed: u64, qx: f32, qy: f32) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let items: Vec<(u64, Vec<f32>)> =
        (0..points as u64).map(|id| (id, vec![rng.random::<f32>(), rng.random::<f32>()])).collect();
    let run = || -> Result<Json, blobgraph::index::IndexError> {
        let space = SemanticSpace::from_vectors(2, items.clone())?;
        let index = VectorIndex::batch_build(&space, BuildParams::with_buckets(buckets.max(1), seed))?;
        let q = [qx, qy];
        let mut bucket_of = vec![0usize; points];
        for (b, bucket) in index.buckets().iter().enumerate() {
            for id in bucket.member_ids() {
                bucket_of[id as usize] = b;
            }
        }
        let hits: Vec<u64> = index.knn(&q, k, nprobe.max(1))?.into_iter().map(|(id, _)| id).collect();
        let truth: Vec<u64> = brute_knn(&space, &q, k)?.into_iter().map(|(id, _)| id).collect();
        let t: HashSet<u64> = truth.iter().copied().collect();
        let recall = if t.is_empty() { 1.0 } else { hits.iter().filter(|h| t.contains(h)).count() as f64 / t.len() as f64 };
        Ok(json!({
            "points": items.iter().map(|(_, v)| [v[0], v[1]]).collect::<Vec<_>>(),
            "bucket": bucket_of,
            "cores": index.buckets().iter().map(|b| [b.core[0], b.core[1]]).collect::<Vec<_>>(),
            "probed": index.buckets().len().min(nprobe.max(1)),
            "hits": hits,
            "truth": truth,
            "recall": recall,
        }))
    };
    run().map_or_else(err, |j| j.to_string())
}

/// Per-row speed estimate after each observed invocation. `samples` is a
/// comma-separated list of `cost/rows` pairs, e.g. `"1.0/10, 0.5/10"`.
pub fn ema(k: f64, samples: &str) -> String {
    let mut stats = FilterSpeedStats::new("demo", k);
    let mut curve = Vec::new();
    for s in samples.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let Some((c, r)) = s.split_once('/') else {
            return err(format!("`{s}` is not cost/rows"));
        };
        let (Ok(cost), Ok(rows)) = (c.trim().parse::<f64>(), r.trim().parse::<u64>()) else {
            return err(format!("`{s}` is not cost/rows"));
        };
        stats = match stats.record_invocation(cost, rows) {
            Ok(s) => s,
            Err(e) => return err(e),
        };
        curve.push(json!({ "sample": cost / rows as f64, "v": stats.v }));
    }
    json!({ "k": k, "curve": curve }).to_string()
}

/// In-memory database preloaded with the small sports graph.
pub struct Playground {
    db: Database,
}

impl Playground {
    pub fn new() -> Result<Self, String> {
        // wasm32-unknown-unknown has no monotonic clock
        let db = Database::in_memory(Config::default()).map_err(|e| e.to_string())?.with_clock(Arc::new(SimClock::new()));
        *db.graph_mut() = sports_graph();
        Ok(Playground { db })
    }

    /// Plans under every strategy with their estimated cost.
    pub fn explain(&self, query: &str) -> String {
        let mut plans = Vec::new();
        for (name, choice) in [("greedy", PlanChoice::Greedy), ("naive", PlanChoice::Naive), ("exhaustive", PlanChoice::Exhaustive)] {
            match self.db.plan(query, choice) {
                Ok(p) => plans.push(json!({ "strategy": name, "cost": p.cost, "rows": p.card, "tree": p.explain() })),
                Err(e) => return err(e),
            }
        }
        json!({ "plans": plans }).to_string()
    }

    pub fn query(&self, query: &str) -> String {
        match self.db.query(query, &HashMap::new()) {
            Ok(r) => json!({
                "columns": r.columns,
                "rows": r.rows.iter().map(|row| row.iter().map(|b| b.to_string()).collect::<Vec<_>>()).collect::<Vec<_>>(),
            })
            .to_string(),
            Err(e) => err(e),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Json {
        serde_json::from_str(s).unwrap()
    }

    #[test]
    fn full_probe_matches_brute_force() {
        let j = parse(&knn(300, 6, 5, 6, 1, 0.5, 0.5));
        assert_eq!(j["recall"], json!(1.0));
        assert_eq!(j["points"].as_array().unwrap().len(), 300);
        assert_eq!(j["cores"].as_array().unwrap().len(), 6);
        assert!(j["bucket"].as_array().unwrap().iter().all(|b| b.as_u64().unwrap() < 6));
    }

    #[test]
    fn ema_follows_update_rule() {
        let j = parse(&ema(1.0, "2/1, 4/2, 0/1"));
        let v: Vec<f64> = j["curve"].as_array().unwrap().iter().map(|p| p["v"].as_f64().unwrap()).collect();
        assert_eq!(v, [2.0, 2.0, 1.0]);
        assert!(parse(&ema(1.0, "3/0"))["error"].is_string());
        assert!(parse(&ema(1.0, "x"))["error"].is_string());
    }

    #[test]
    fn playground_plans_and_queries() {
        let p = Playground::new().unwrap();
        let j = parse(&p.explain("MATCH (a:Person)-[:workFor]->(t:Team)-[:belongTo]->(o) RETURN a.name"));
        let plans = j["plans"].as_array().unwrap();
        assert_eq!(plans.len(), 3);
        let cost = |i: usize| plans[i]["cost"].as_f64().unwrap();
        assert!(cost(2) <= cost(0) + 1e-9, "exhaustive is optimal");
        let r = parse(&p.query("MATCH (n:Pet) RETURN n.name"));
        assert_eq!(r["rows"], json!([["Mimi"]]));
        assert!(parse(&p.query("MATCH (n"))["error"].is_string());
    }
}
