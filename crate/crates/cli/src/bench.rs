//! Recall and latency of the vector index against brute force. Each k is
//! queried `repeats` times with fresh query vectors; min, max and average
//! recall are reported together with mean query latency.

use std::collections::HashSet;
use std::time::Instant;

use blobgraph::index::{brute_knn, bucket_count, BuildParams, IndexError, SemanticSpace, VectorIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

#[derive(Debug, Clone)]
pub struct BenchSpec {
    pub vectors: usize,
    pub dim: usize,
    /// Gaussian clusters to draw from; 0 draws uniformly from [-1, 1).
    pub clusters: usize,
    pub buckets: Option<u64>,
    pub bucket_divisor: u64,
    pub min_buckets: u64,
    /// Buckets probed per query; `None` probes all.
    pub nprobe: Option<usize>,
    pub repeats: usize,
    pub ks: Vec<usize>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub k: usize,
    pub nprobe: usize,
    pub min: f64,
    pub max: f64,
    pub avg: f64,
    pub avg_micros: f64,
}

struct Source {
    centers: Vec<Vec<f32>>,
    dim: usize,
    noise: Normal<f32>,
}

impl Source {
    fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<f32> {
        if self.centers.is_empty() {
            return (0..self.dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        }
        let c = &self.centers[rng.random_range(0..self.centers.len())];
        c.iter().map(|x| x + self.noise.sample(rng)).collect()
    }
}

pub fn run(spec: &BenchSpec) -> Result<(Vec<BenchRow>, usize), IndexError> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let src = Source {
        centers: (0..spec.clusters).map(|_| (0..spec.dim).map(|_| rng.random_range(-10.0..10.0)).collect()).collect(),
        dim: spec.dim,
        noise: Normal::new(0.0, 1.0).expect("unit normal"),
    };
    let items: Vec<(u64, Vec<f32>)> = (0..spec.vectors as u64).map(|id| (id, src.sample(&mut rng))).collect();
    let space = SemanticSpace::from_vectors(spec.dim, items)?;
    let params = BuildParams {
        bucket_divisor: spec.bucket_divisor,
        min_buckets: spec.min_buckets,
        buckets: spec.buckets,
        seed: spec.seed,
    };
    let buckets = bucket_count(spec.vectors as u64, params.bucket_divisor, params.min_buckets, params.buckets) as usize;
    let index = VectorIndex::batch_build(&space, params)?;
    let nprobe = spec.nprobe.unwrap_or(buckets).min(buckets).max(1);
    let mut rows = Vec::new();
    for &k in &spec.ks {
        let mut recalls = Vec::with_capacity(spec.repeats);
        let mut micros = 0.0;
        for _ in 0..spec.repeats {
            let q = src.sample(&mut rng);
            let t = Instant::now();
            let got = index.knn(&q, k, nprobe)?;
            micros += t.elapsed().as_secs_f64() * 1e6;
            let truth: HashSet<u64> = brute_knn(&space, &q, k)?.into_iter().map(|(id, _)| id).collect();
            let want = truth.len().max(1);
            recalls.push(got.iter().filter(|(id, _)| truth.contains(id)).count() as f64 / want as f64);
        }
        let n = recalls.len().max(1) as f64;
        rows.push(BenchRow {
            k,
            nprobe,
            min: recalls.iter().cloned().fold(f64::INFINITY, f64::min),
            max: recalls.iter().cloned().fold(0.0, f64::max),
            avg: recalls.iter().sum::<f64>() / n,
            avg_micros: micros / n,
        });
    }
    Ok((rows, buckets))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> BenchSpec {
        BenchSpec {
            vectors: 2000,
            dim: 16,
            clusters: 0,
            buckets: Some(20),
            bucket_divisor: 100_000,
            min_buckets: 1,
            nprobe: None,
            repeats: 20,
            ks: vec![1, 10, 100, 500],
            seed: 1,
        }
    }

    #[test]
    fn full_probe_has_perfect_recall() {
        let (rows, buckets) = run(&spec()).unwrap();
        assert_eq!(buckets, 20);
        assert_eq!(rows.len(), 4);
        for r in rows {
            assert_eq!((r.min, r.max, r.avg, r.nprobe), (1.0, 1.0, 1.0, 20));
        }
    }

    #[test]
    fn single_probe_is_bounded_and_seeded() {
        let s = BenchSpec { nprobe: Some(1), clusters: 5, ..spec() };
        let (a, _) = run(&s).unwrap();
        let (b, _) = run(&s).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!(x.min <= x.avg && x.avg <= x.max && x.max <= 1.0);
            assert_eq!((x.min, x.max, x.avg), (y.min, y.max, y.avg));
        }
    }
}
