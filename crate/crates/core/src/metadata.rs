//! Run metadata sidecar: a `key=value` file next to every output.
//!
//! Inputs are recorded by role and SHA-256 digest, never by path. The
//! `wall_time` entry is always last so that everything above it is
//! reproducible byte for byte.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use sha2::{Digest, Sha256};

use crate::dataio::{self, DataError};
use crate::groups::ReleaseStats;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunMetadata {
    entries: Vec<(String, String)>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest.iter() {
        write!(out, "{b:02x}").expect("writing to a String");
    }
    out
}

pub fn file_digest(path: &Path) -> Result<String, DataError> {
    let bytes = std::fs::read(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(sha256_hex(&bytes))
}

/// Sidecar location for an output file: `<out>.meta`.
pub fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".meta");
    PathBuf::from(name)
}

impl RunMetadata {
    pub fn new(subcommand: &str) -> Self {
        let mut m = RunMetadata::default();
        m.push("subcommand", subcommand);
        m
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl ToString) {
        self.entries.push((key.into(), value.to_string()));
    }

    pub fn input(&mut self, role: &str, path: &Path) -> Result<(), DataError> {
        let digest = file_digest(path)?;
        self.push(format!("input.{role}.sha256"), digest);
        Ok(())
    }

    pub fn release_stats(&mut self, stats: &ReleaseStats) {
        match stats.noise_scale {
            Some(s) => self.push("noise_scale", s),
            None => self.push("NOT_PRIVATE", "true"),
        }
        self.push("groups", stats.groups);
        self.push("rows_in", stats.rows_in);
        self.push("included", stats.included);
        self.push("discarded", stats.discarded);
        self.push("released", stats.released);
        self.push("suppressed", stats.suppressed);
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    /// Rendered text without the trailing `wall_time` line.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(out, "{k}={v}");
        }
        out
    }

    pub fn write(&self, out: &Path) -> Result<PathBuf, DataError> {
        let path = sidecar_path(out);
        let mut text = self.render();
        let _ = writeln!(
            text,
            "wall_time={}",
            Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true)
        );
        dataio::write_atomic(&path, |w| w.write_all(text.as_bytes()))?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_known_value() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn wall_time_last() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("release.tsv");
        let mut m = RunMetadata::new("release-current");
        m.push("seed", 7);
        m.release_stats(&ReleaseStats::default());
        let path = m.write(&out).unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "subcommand=release-current");
        assert!(lines.contains(&"NOT_PRIVATE=true"));
        assert!(lines.last().unwrap().starts_with("wall_time="));
    }
}
