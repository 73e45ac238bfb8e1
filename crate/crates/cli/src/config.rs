//! Settings from flags layered over an optional `key=value` file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::CliError;

/// Parsed `key=value` file. Keys are normalised so `max_iter` and `max-iter`
/// name the same setting; each value remembers its line for error messages.
#[derive(Debug, Default)]
pub struct ConfigFile {
    path: String,
    entries: BTreeMap<String, (usize, String)>,
}

fn normalise(key: &str) -> String {
    key.trim().replace('_', "-").to_ascii_lowercase()
}

impl ConfigFile {
    pub fn parse(path: &str, text: &str) -> Result<Self, CliError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("{path}:{}: expected key=value", i + 1)))?;
            let key = normalise(k);
            if key.is_empty() {
                return Err(CliError::Config(format!("{path}:{}: empty key", i + 1)));
            }
            if entries
                .insert(key.clone(), (i + 1, v.trim().to_string()))
                .is_some()
            {
                return Err(CliError::Config(format!(
                    "{path}:{}: duplicate key `{key}`",
                    i + 1
                )));
            }
        }
        Ok(ConfigFile {
            path: path.to_string(),
            entries,
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&path.display().to_string(), &text)
    }

    /// Rejects keys the command does not understand, so typos surface.
    pub fn restrict(&self, allowed: &[&str]) -> Result<(), CliError> {
        for (key, (line, _)) in &self.entries {
            if !allowed.contains(&key.as_str()) {
                return Err(CliError::Config(format!(
                    "{}:{line}: unknown key `{key}` (expected one of: {})",
                    self.path,
                    allowed.join(", ")
                )));
            }
        }
        Ok(())
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        match self.entries.get(key) {
            None => Ok(None),
            Some((line, v)) => v.parse().map(Some).map_err(|_| {
                CliError::Config(format!("{}:{line}: cannot parse `{v}` for `{key}`", self.path))
            }),
        }
    }
}

/// Flag value, else file value, else `default`.
pub fn pick<T: FromStr>(flag: Option<T>, file: &ConfigFile, key: &str, default: T) -> Result<T, CliError> {
    Ok(pick_opt(flag, file, key)?.unwrap_or(default))
}

pub fn pick_opt<T: FromStr>(flag: Option<T>, file: &ConfigFile, key: &str) -> Result<Option<T>, CliError> {
    match flag {
        Some(v) => Ok(Some(v)),
        None => file.get(key),
    }
}

pub fn pick_path(flag: Option<PathBuf>, file: &ConfigFile, key: &str) -> Result<Option<PathBuf>, CliError> {
    Ok(flag.or(file.get::<String>(key)?.map(PathBuf::from)))
}
