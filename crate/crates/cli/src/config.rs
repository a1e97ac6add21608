//! Flat `key=value` configuration files.
//!
//! Keys equal the long flag names of the subcommand (`dim=8`, `n-grid=30,50`).
//! Lines starting with `#` and blank lines are ignored. Explicit CLI flags
//! always win; values here fill unset flags; built-in defaults apply last.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, Context, Result};

#[derive(Debug, Default)]
pub struct ConfigMap {
    entries: BTreeMap<String, String>,
}

impl ConfigMap {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config file {}", path.display()))?;
        let mut entries = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!(
                    "config {}:{}: expected key=value, got {line:?}",
                    path.display(),
                    lineno + 1
                );
            };
            entries.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(Self { entries })
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.entries.get(key) {
            None => Ok(None),
            Some(raw) => match raw.parse::<T>() {
                Ok(v) => Ok(Some(v)),
                Err(e) => bail!("config key {key}={raw:?}: {e}"),
            },
        }
    }

    /// Flag value, then config value, then the built-in default.
    pub fn resolve<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        if let Some(v) = flag {
            return Ok(v);
        }
        Ok(self.get(key)?.unwrap_or(default))
    }

    /// Flag value or config value; an error if neither is present.
    pub fn resolve_required<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        if let Some(v) = flag {
            return Ok(v);
        }
        match self.get(key)? {
            Some(v) => Ok(v),
            None => bail!("missing required option --{key} (flag or config file)"),
        }
    }
}

/// Comma-separated list of positive reals (used for equivalent-size grids
/// and delta grids).
pub fn parse_grid(raw: &str) -> Result<Vec<f64>> {
    let mut grid = Vec::new();
    for part in raw.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let v: f64 = part
            .parse()
            .with_context(|| format!("grid entry {part:?}"))?;
        if !(v > 0.0) || !v.is_finite() {
            bail!("grid entries must be positive and finite, got {part}");
        }
        grid.push(v);
    }
    if grid.is_empty() {
        bail!("grid must contain at least one value");
    }
    Ok(grid)
}
