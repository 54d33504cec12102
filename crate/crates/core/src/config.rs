//! Flat `key=value` configuration files and parameter resolution.
//!
//! Precedence when resolving run parameters: explicit flag, then file, then
//! the era default.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::NaiveDate;
use thiserror::Error;

use crate::dataio::{parse_date, CountryCode};
use crate::release_current::{self, CurrentRunConfig};
use crate::release_historical::{self, era_preset, Era, HistoricalRunConfig};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("line {line}: expected key=value, found {text:?}")]
    Syntax { line: usize, text: String },
    #[error("duplicate key {0:?}")]
    DuplicateKey(String),
    #[error("unknown key {0:?}")]
    UnknownKey(String),
    #[error("key {key:?}: cannot parse {value:?} as {expected}")]
    TypeError {
        key: String,
        value: String,
        expected: &'static str,
    },
    #[error("missing required key {0:?}")]
    Missing(String),
    #[error("{0}")]
    Invalid(String),
}

/// Ordered `key=value` pairs. Blank lines and `#` comments are ignored.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KvMap {
    entries: BTreeMap<String, String>,
}

impl KvMap {
    pub fn new() -> Self {
        KvMap::default()
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut map = KvMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line: i + 1,
                    text: raw.to_string(),
                });
            };
            let key = k.trim();
            if key.is_empty() {
                return Err(ConfigError::Syntax {
                    line: i + 1,
                    text: raw.to_string(),
                });
            }
            if map
                .entries
                .insert(key.to_string(), v.trim().to_string())
                .is_some()
            {
                return Err(ConfigError::DuplicateKey(key.to_string()));
            }
        }
        Ok(map)
    }

    pub fn read(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        KvMap::parse(&text)
    }

    pub fn insert(&mut self, key: impl Into<String>, value: impl ToString) {
        self.entries.insert(key.into(), value.to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Fails on the first key (in sorted order) not in `allowed`.
    pub fn check_keys(&self, allowed: &[&str]) -> Result<(), ConfigError> {
        match self.entries.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(k) => Err(ConfigError::UnknownKey(k.clone())),
            None => Ok(()),
        }
    }

    pub fn parse_opt<T: FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|_| ConfigError::TypeError {
                key: key.to_string(),
                value: v.to_string(),
                expected: std::any::type_name::<T>(),
            }),
        }
    }

    pub fn parse_or<T: FromStr>(&self, key: &str, default: T) -> Result<T, ConfigError> {
        Ok(self.parse_opt(key)?.unwrap_or(default))
    }

    pub fn date_opt(&self, key: &str) -> Result<Option<NaiveDate>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => parse_date(v).map(Some).map_err(|_| ConfigError::TypeError {
                key: key.to_string(),
                value: v.to_string(),
                expected: "date YYYY-MM-DD",
            }),
        }
    }

    pub fn date_or(&self, key: &str, default: NaiveDate) -> Result<NaiveDate, ConfigError> {
        Ok(self.date_opt(key)?.unwrap_or(default))
    }

    /// `self` overridden by `over`.
    pub fn merged(&self, over: &KvMap) -> KvMap {
        let mut entries = self.entries.clone();
        entries.extend(over.entries.iter().map(|(k, v)| (k.clone(), v.clone())));
        KvMap { entries }
    }
}

impl fmt::Display for KvMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.entries {
            writeln!(f, "{k}={v}")?;
        }
        Ok(())
    }
}

pub const CURRENT_KEYS: [&str; 5] = ["k", "rho", "t", "tau", "seed"];
pub const HISTORICAL_KEYS: [&str; 5] = ["m", "epsilon", "t", "tau", "seed"];

pub fn allowed_keys(era: Era) -> &'static [&'static str] {
    match era {
        Era::Current => &CURRENT_KEYS,
        _ => &HISTORICAL_KEYS,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RegimeParams {
    Current { k: u64, rho: f64, t: i64, tau: i64 },
    Historical { m: u64, epsilon: f64, t: i64, tau: i64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolvedConfig {
    pub era: Era,
    pub params: RegimeParams,
    pub seed: u64,
}

/// Resolves parameters for `era`: `flags` over `file` over era defaults.
/// Keys belonging to the other regime are rejected.
pub fn resolve(era: Era, file: &KvMap, flags: &KvMap) -> Result<ResolvedConfig, ConfigError> {
    let keys = allowed_keys(era);
    file.check_keys(keys)?;
    flags.check_keys(keys)?;
    let kv = file.merged(flags);
    let seed = kv.parse_or("seed", 0u64)?;
    let params = match era_preset(era) {
        None => RegimeParams::Current {
            k: kv.parse_or("k", release_current::DEFAULT_K)?,
            rho: kv.parse_or("rho", release_current::DEFAULT_RHO)?,
            t: kv.parse_or("t", release_current::DEFAULT_INGESTION_THRESHOLD)?,
            tau: kv.parse_or("tau", release_current::DEFAULT_SUPPRESSION_THRESHOLD)?,
        },
        Some((m, tau)) => RegimeParams::Historical {
            m: kv.parse_or("m", m)?,
            epsilon: kv.parse_or("epsilon", release_historical::DEFAULT_EPSILON)?,
            t: kv.parse_or("t", release_historical::DEFAULT_INGESTION_THRESHOLD)?,
            tau: kv.parse_or("tau", tau)?,
        },
    };
    Ok(ResolvedConfig { era, params, seed })
}

/// Reads an optional config file and resolves it against `era` defaults.
pub fn load_config(path: Option<&Path>, era: Era) -> Result<ResolvedConfig, ConfigError> {
    let file = match path {
        Some(p) => KvMap::read(p)?,
        None => KvMap::new(),
    };
    resolve(era, &file, &KvMap::new())
}

impl ResolvedConfig {
    pub fn current(
        &self,
        date: NaiveDate,
        countries: BTreeSet<CountryCode>,
    ) -> Result<CurrentRunConfig, ConfigError> {
        let RegimeParams::Current { k, rho, t, tau } = self.params else {
            return Err(ConfigError::Invalid(format!(
                "{} parameters cannot drive a current-era release",
                self.era.name()
            )));
        };
        Ok(CurrentRunConfig {
            k,
            rho,
            ingestion_threshold: t,
            suppression_threshold: tau,
            seed: self.seed,
            ..CurrentRunConfig::new(date, countries)
        })
    }

    pub fn historical(
        &self,
        from: NaiveDate,
        to: NaiveDate,
        countries: BTreeSet<CountryCode>,
    ) -> Result<HistoricalRunConfig, ConfigError> {
        let RegimeParams::Historical { m, epsilon, t, tau } = self.params else {
            return Err(ConfigError::Invalid(
                "current-era parameters cannot drive a historical release".into(),
            ));
        };
        Ok(HistoricalRunConfig {
            era: self.era,
            m,
            epsilon,
            ingestion_threshold: t,
            suppression_threshold: tau,
            countries,
            from,
            to,
            seed: self.seed,
            add_noise: true,
        })
    }

    /// Resolved values as `(key, value)` pairs, in key order of the regime.
    pub fn pairs(&self) -> Vec<(&'static str, String)> {
        let mut out = match self.params {
            RegimeParams::Current { k, rho, t, tau } => vec![
                ("k", k.to_string()),
                ("rho", rho.to_string()),
                ("t", t.to_string()),
                ("tau", tau.to_string()),
            ],
            RegimeParams::Historical { m, epsilon, t, tau } => vec![
                ("m", m.to_string()),
                ("epsilon", epsilon.to_string()),
                ("t", t.to_string()),
                ("tau", tau.to_string()),
            ],
        };
        out.push(("seed", self.seed.to_string()));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_basics() {
        let kv = KvMap::parse("# comment\n\nk = 5\nrho=0.02\n").unwrap();
        assert_eq!(kv.get("k"), Some("5"));
        assert_eq!(kv.get("rho"), Some("0.02"));
        assert!(matches!(
            KvMap::parse("k\n"),
            Err(ConfigError::Syntax { line: 1, .. })
        ));
        assert!(matches!(
            KvMap::parse("k=1\nk=2\n"),
            Err(ConfigError::DuplicateKey(_))
        ));
    }

    #[test]
    fn unknown_key_rejected() {
        let kv = KvMap::parse("sigma=5\n").unwrap();
        assert!(matches!(
            resolve(Era::Current, &kv, &KvMap::new()),
            Err(ConfigError::UnknownKey(k)) if k == "sigma"
        ));
        let kv = KvMap::parse("m=30\n").unwrap();
        assert!(resolve(Era::Current, &kv, &KvMap::new()).is_err());
    }

    #[test]
    fn type_error() {
        let kv = KvMap::parse("k=ten\n").unwrap();
        assert!(matches!(
            resolve(Era::Current, &kv, &KvMap::new()),
            Err(ConfigError::TypeError { .. })
        ));
    }

    #[test]
    fn precedence() {
        let file = KvMap::parse("tau=120\nk=5\n").unwrap();
        let mut flags = KvMap::new();
        flags.insert("tau", 60);
        let r = resolve(Era::Current, &file, &flags).unwrap();
        assert_eq!(
            r.params,
            RegimeParams::Current {
                k: 5,
                rho: 0.015,
                t: 150,
                tau: 60
            }
        );
    }

    #[test]
    fn era_defaults() {
        let none = KvMap::new();
        assert_eq!(
            resolve(Era::Pre2017, &none, &none).unwrap().params,
            RegimeParams::Historical {
                m: 300,
                epsilon: 1.0,
                t: 150,
                tau: 3500
            }
        );
        assert_eq!(
            resolve(Era::Era2017To2023, &none, &none).unwrap().params,
            RegimeParams::Historical {
                m: 30,
                epsilon: 1.0,
                t: 150,
                tau: 450
            }
        );
    }
}
