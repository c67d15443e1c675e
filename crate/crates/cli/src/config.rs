//! Flat `key = value` configuration with a per-command key schema.
//!
//! Blank lines and lines starting with `#` are ignored. Unknown keys,
//! duplicate keys and out-of-range values are rejected before any work
//! starts.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

/// A problem with the command line or configuration; exits with status 2.
#[derive(Debug, Clone, PartialEq)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub type UsageResult<T> = std::result::Result<T, UsageError>;

fn usage<T>(msg: impl Into<String>) -> UsageResult<T> {
    Err(UsageError(msg.into()))
}

#[derive(Debug, Clone, Default)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    /// Parses configuration text, accepting only keys in `allowed`.
    pub fn parse(text: &str, allowed: &[&str]) -> UsageResult<Config> {
        let mut cfg = Config::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return usage(format!("config line {}: expected key = value", i + 1));
            };
            let key = k.trim();
            if cfg.values.contains_key(key) {
                return usage(format!("config line {}: duplicate key {key:?}", i + 1));
            }
            cfg.insert(key, v.trim(), allowed)
                .map_err(|e| UsageError(format!("config line {}: {}", i + 1, e.0)))?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path, allowed: &[&str]) -> UsageResult<Config> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
        Config::parse(&text, allowed)
    }

    /// Sets `key`, replacing any earlier value.
    pub fn insert(&mut self, key: &str, value: &str, allowed: &[&str]) -> UsageResult<()> {
        if !allowed.contains(&key) {
            return usage(format!(
                "unknown key {key:?}; expected one of: {}",
                allowed.join(", ")
            ));
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn set(&mut self, assignment: &str, allowed: &[&str]) -> UsageResult<()> {
        let Some((k, v)) = assignment.split_once('=') else {
            return usage(format!("override {assignment:?} is not key=value"));
        };
        self.insert(k.trim(), v.trim(), allowed)
    }

    pub fn has(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    pub fn str(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn require_str(&self, key: &str) -> UsageResult<&str> {
        self.str(key)
            .ok_or_else(|| UsageError(format!("missing required key {key:?}")))
    }

    pub fn parse_opt<T: FromStr>(&self, key: &str) -> UsageResult<Option<T>>
    where
        T::Err: fmt::Display,
    {
        match self.str(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|e| UsageError(format!("{key} = {v:?}: {e}"))),
        }
    }

    pub fn parse_or<T: FromStr>(&self, key: &str, default: T) -> UsageResult<T>
    where
        T::Err: fmt::Display,
    {
        Ok(self.parse_opt(key)?.unwrap_or(default))
    }

    pub fn require<T: FromStr>(&self, key: &str) -> UsageResult<T>
    where
        T::Err: fmt::Display,
    {
        self.parse_opt(key)?
            .ok_or_else(|| UsageError(format!("missing required key {key:?}")))
    }

    /// Comma-separated list.
    pub fn list<T: FromStr>(&self, key: &str) -> UsageResult<Option<Vec<T>>>
    where
        T::Err: fmt::Display,
    {
        let Some(v) = self.str(key) else {
            return Ok(None);
        };
        v.split(',')
            .map(|t| {
                let t = t.trim();
                t.parse()
                    .map_err(|e| UsageError(format!("{key}: entry {t:?}: {e}")))
            })
            .collect::<UsageResult<Vec<T>>>()
            .map(Some)
    }
}

/// Range checks used after parsing.
pub fn check(cond: bool, msg: impl FnOnce() -> String) -> UsageResult<()> {
    if cond {
        Ok(())
    } else {
        usage(msg())
    }
}

pub fn in_open_unit(key: &str, v: f64) -> UsageResult<f64> {
    check(v > 0.0 && v < 1.0, || {
        format!("{key} must lie in (0, 1), got {v}")
    })?;
    Ok(v)
}

pub fn in_half_open_unit(key: &str, v: f64) -> UsageResult<f64> {
    check(v > 0.0 && v <= 1.0, || {
        format!("{key} must lie in (0, 1], got {v}")
    })?;
    Ok(v)
}

pub fn positive(key: &str, v: f64) -> UsageResult<f64> {
    check(v > 0.0 && v.is_finite(), || {
        format!("{key} must be positive, got {v}")
    })?;
    Ok(v)
}

pub fn non_negative(key: &str, v: f64) -> UsageResult<f64> {
    check(v >= 0.0 && v.is_finite(), || {
        format!("{key} must be non-negative, got {v}")
    })?;
    Ok(v)
}

pub fn at_least(key: &str, v: usize, min: usize) -> UsageResult<usize> {
    check(v >= min, || {
        format!("{key} must be at least {min}, got {v}")
    })?;
    Ok(v)
}
