use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::blob::{BlobConfig, DEFAULT_CHUNK_SIZE, DEFAULT_INLINE_THRESHOLD, DEFAULT_NUM_COLUMNS};
use crate::exec::{DEFAULT_BATCH_SIZE, DEFAULT_IN_FLIGHT};
use crate::index::{BuildParams, DEFAULT_BUCKET_DIVISOR};
use crate::planner::DEFAULT_K;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("`{key}`: {msg}")]
    Invalid { key: String, msg: String },
    #[error("reading config: {0}")]
    Io(String),
}

/// Engine settings, read from a `key = value` file. `#` starts a comment.
/// Per-space similarity thresholds use keys `threshold.<sub key>`.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub data_dir: Option<PathBuf>,
    pub inline_threshold: u64,
    pub chunk_size: u32,
    pub num_columns: u64,
    pub ema_k: f64,
    pub thresholds: BTreeMap<String, f64>,
    pub bucket_divisor: u64,
    pub min_buckets: u64,
    pub in_flight: usize,
    pub batch_size: usize,
    pub cluster_replicas: usize,
    pub cluster_drop_rate: f64,
    pub cluster_max_delay: u64,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            data_dir: None,
            inline_threshold: DEFAULT_INLINE_THRESHOLD,
            chunk_size: DEFAULT_CHUNK_SIZE,
            num_columns: DEFAULT_NUM_COLUMNS,
            ema_k: DEFAULT_K,
            thresholds: BTreeMap::new(),
            bucket_divisor: DEFAULT_BUCKET_DIVISOR,
            min_buckets: 1,
            in_flight: DEFAULT_IN_FLIGHT,
            batch_size: DEFAULT_BATCH_SIZE,
            cluster_replicas: 3,
            cluster_drop_rate: 0.0,
            cluster_max_delay: 10,
        }
    }
}

fn num<T: FromStr + PartialOrd + Default>(key: &str, v: &str) -> Result<T, ConfigError> {
    let x: T = v.parse().map_err(|_| ConfigError::Invalid { key: key.into(), msg: format!("not a number: {v}") })?;
    if x <= T::default() {
        return Err(ConfigError::Invalid { key: key.into(), msg: "must be positive".into() });
    }
    Ok(x)
}

impl Config {
    pub fn parse(text: &str) -> Result<Config, ConfigError> {
        let mut c = Config::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let Some((k, v)) = body.split_once('=') else {
                return Err(ConfigError::Syntax { line, msg: format!("expected `key = value`, got `{body}`") });
            };
            c.set(k.trim(), v.trim()).map_err(|e| match e {
                ConfigError::UnknownKey { key, .. } => ConfigError::UnknownKey { line, key },
                e => e,
            })?;
        }
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Config, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(format!("{}: {e}", path.display())))?;
        Config::parse(&text)
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<(), ConfigError> {
        match key {
            "data_dir" => self.data_dir = Some(PathBuf::from(v)),
            "inline_threshold" => self.inline_threshold = num(key, v)?,
            "chunk_size" => self.chunk_size = num(key, v)?,
            "num_columns" => self.num_columns = num(key, v)?,
            "ema_k" => self.ema_k = num(key, v)?,
            "bucket_divisor" => self.bucket_divisor = num(key, v)?,
            "min_buckets" => self.min_buckets = num(key, v)?,
            "in_flight" => self.in_flight = num(key, v)?,
            "batch_size" => self.batch_size = num(key, v)?,
            "cluster_replicas" => self.cluster_replicas = num(key, v)?,
            "cluster_max_delay" => self.cluster_max_delay = num(key, v)?,
            "cluster_drop_rate" => {
                // a probability, so zero is allowed
                let x: f64 = v.parse().map_err(|_| ConfigError::Invalid { key: key.into(), msg: format!("not a number: {v}") })?;
                if !(0.0..1.0).contains(&x) {
                    return Err(ConfigError::Invalid { key: key.into(), msg: "must be in [0, 1)".into() });
                }
                self.cluster_drop_rate = x;
            }
            k if k.starts_with("threshold.") && k.len() > "threshold.".len() => {
                let t: f64 = num(key, v)?;
                if t > 1.0 {
                    return Err(ConfigError::Invalid { key: key.into(), msg: "similarity thresholds lie in (0, 1]".into() });
                }
                self.thresholds.insert(k["threshold.".len()..].to_string(), t);
            }
            _ => return Err(ConfigError::UnknownKey { line: 0, key: key.into() }),
        }
        Ok(())
    }

    /// Inverse of [`Config::parse`].
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        if let Some(d) = &self.data_dir {
            let _ = writeln!(s, "data_dir = {}", d.display());
        }
        let _ = writeln!(s, "inline_threshold = {}", self.inline_threshold);
        let _ = writeln!(s, "chunk_size = {}", self.chunk_size);
        let _ = writeln!(s, "num_columns = {}", self.num_columns);
        let _ = writeln!(s, "ema_k = {}", self.ema_k);
        for (k, t) in &self.thresholds {
            let _ = writeln!(s, "threshold.{k} = {t}");
        }
        let _ = writeln!(s, "bucket_divisor = {}", self.bucket_divisor);
        let _ = writeln!(s, "min_buckets = {}", self.min_buckets);
        let _ = writeln!(s, "in_flight = {}", self.in_flight);
        let _ = writeln!(s, "batch_size = {}", self.batch_size);
        let _ = writeln!(s, "cluster_replicas = {}", self.cluster_replicas);
        let _ = writeln!(s, "cluster_drop_rate = {}", self.cluster_drop_rate);
        let _ = writeln!(s, "cluster_max_delay = {}", self.cluster_max_delay);
        s
    }

    pub fn blob_config(&self) -> BlobConfig {
        BlobConfig { inline_threshold: self.inline_threshold, chunk_size: self.chunk_size, num_columns: self.num_columns }
    }

    pub fn index_params(&self, seed: u64) -> BuildParams {
        BuildParams { bucket_divisor: self.bucket_divisor, min_buckets: self.min_buckets, buckets: None, seed }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut c = Config { data_dir: Some("/tmp/x".into()), ema_k: 2.5, cluster_drop_rate: 0.1, ..Config::default() };
        c.thresholds.insert("face".into(), 0.9);
        assert_eq!(Config::parse(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn rejects_unknown_and_nonpositive() {
        assert_eq!(
            Config::parse("# hi\n\nchunk_size = 10\nfoo = 1").unwrap_err(),
            ConfigError::UnknownKey { line: 4, key: "foo".into() }
        );
        assert!(matches!(Config::parse("ema_k = 0"), Err(ConfigError::Invalid { .. })));
        assert!(matches!(Config::parse("chunk_size = -3"), Err(ConfigError::Invalid { .. })));
        assert!(matches!(Config::parse("threshold.face = 1.5"), Err(ConfigError::Invalid { .. })));
        assert!(matches!(Config::parse("just words"), Err(ConfigError::Syntax { line: 1, .. })));
        assert_eq!(Config::parse("chunk_size = 4096 # small").unwrap().chunk_size, 4096);
    }
}
