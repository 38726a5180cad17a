//! Experiment configuration: `key = value` lines, `#` starts a comment.
//!
//! Keys: `instances_dir`, `pattern`, `set`, `methods`, `gammas`,
//! `time_limit_s`, `backend`, `workers`, `deviation_factor`, `seed`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use robust_mrcpsp::psplib::DeviationFactor;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Compact,
    Benders,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Compact => "compact",
            Method::Benders => "benders",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "compact" => Ok(Method::Compact),
            "benders" => Ok(Method::Benders),
            other => Err(format!("unknown method {other:?}")),
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key {key:?}")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key {key:?} given twice")]
    Duplicate { line: usize, key: String },
    #[error("invalid value for {key}: {message}")]
    Value { key: String, message: String },
    #[error("missing required key {0}")]
    Missing(&'static str),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub instances_dir: PathBuf,
    /// File name pattern, `*` and `?` wildcards. Default `*.mm`.
    pub pattern: String,
    /// Label for the instance set in result rows. Default: directory name.
    pub set: String,
    pub methods: Vec<Method>,
    pub gammas: Vec<u32>,
    pub time_limit: Duration,
    pub backend: String,
    pub workers: usize,
    pub deviation_factor: DeviationFactor,
    /// Recorded with the results; only used by synthetic sets.
    pub seed: Option<u64>,
}

const KEYS: [&str; 10] = [
    "instances_dir",
    "pattern",
    "set",
    "methods",
    "gammas",
    "time_limit_s",
    "backend",
    "workers",
    "deviation_factor",
    "seed",
];

fn list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, ConfigError>
where
    T::Err: fmt::Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|e| ConfigError::Value { key: key.into(), message: format!("{s:?}: {e}") }))
        .collect()
}

fn scalar<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    value.parse::<T>().map_err(|e| ConfigError::Value { key: key.into(), message: format!("{value:?}: {e}") })
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        let mut cfg = Self::parse(&text)?;
        if cfg.instances_dir.is_relative() {
            if let Some(parent) = path.parent() {
                cfg.instances_dir = parent.join(&cfg.instances_dir);
            }
        }
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut map = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(ConfigError::Syntax { line: idx + 1 })?;
            let key = key.trim();
            if !KEYS.contains(&key) {
                return Err(ConfigError::UnknownKey { line: idx + 1, key: key.into() });
            }
            if map.insert(key.to_string(), value.trim().to_string()).is_some() {
                return Err(ConfigError::Duplicate { line: idx + 1, key: key.into() });
            }
        }
        let get = |k: &str| map.get(k).map(String::as_str);
        let instances_dir = PathBuf::from(get("instances_dir").ok_or(ConfigError::Missing("instances_dir"))?);
        let methods: Vec<Method> = list("methods", get("methods").unwrap_or("compact,benders"))?;
        let gammas: Vec<u32> = list("gammas", get("gammas").ok_or(ConfigError::Missing("gammas"))?)?;
        if methods.is_empty() {
            return Err(ConfigError::Value { key: "methods".into(), message: "empty list".into() });
        }
        if gammas.is_empty() {
            return Err(ConfigError::Value { key: "gammas".into(), message: "empty list".into() });
        }
        let seconds: f64 = scalar("time_limit_s", get("time_limit_s").unwrap_or("7200"))?;
        if !(seconds.is_finite() && seconds > 0.0) {
            return Err(ConfigError::Value { key: "time_limit_s".into(), message: "must be positive".into() });
        }
        let workers: usize = scalar("workers", get("workers").unwrap_or("1"))?;
        if workers == 0 {
            return Err(ConfigError::Value { key: "workers".into(), message: "must be at least 1".into() });
        }
        let set = match get("set") {
            Some(s) => s.to_string(),
            None => instances_dir.file_name().map_or("instances".into(), |n| n.to_string_lossy().into_owned()),
        };
        Ok(Self {
            pattern: get("pattern").unwrap_or("*.mm").to_string(),
            set,
            methods,
            gammas,
            time_limit: Duration::from_secs_f64(seconds),
            backend: get("backend").unwrap_or("bundled").to_string(),
            workers,
            deviation_factor: scalar("deviation_factor", get("deviation_factor").unwrap_or("0.7"))?,
            seed: get("seed").map(|s| scalar("seed", s)).transpose()?,
            instances_dir,
        })
    }
}
