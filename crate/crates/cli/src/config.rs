//! Key = value configuration files.
//!
//! Every long option of every subcommand can also be supplied through a
//! config file passed with `--config`. The format is one `key = value`
//! pair per line, keys spelled exactly like the long option names
//! (without the leading dashes), `#` starting a comment, blank lines
//! ignored. Precedence: an explicit command-line flag always wins over
//! the file; the file wins over built-in defaults.
//!
//! Keys are validated against the union of all known option names, so a
//! typo fails fast instead of being silently ignored; a key that belongs
//! to a different subcommand than the one running is legal and unused.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{io_err, CliError, Result};

/// Parsed config file: key to (line number, raw value).
#[derive(Debug, Default)]
pub struct Settings {
    path: String,
    entries: BTreeMap<String, (u64, String)>,
}

/// Reads and parses a config file.
pub fn load(path: &Path) -> Result<Settings> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut entries = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx as u64 + 1;
        let stripped = raw.split('#').next().unwrap_or("").trim();
        if stripped.is_empty() {
            continue;
        }
        let Some((key, value)) = stripped.split_once('=') else {
            return Err(CliError::Parse {
                path: path.display().to_string(),
                line: Some(line),
                msg: format!("expected key = value, got {stripped:?}"),
            });
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if key.is_empty() || value.is_empty() {
            return Err(CliError::Parse {
                path: path.display().to_string(),
                line: Some(line),
                msg: "key and value must both be non-empty".into(),
            });
        }
        entries.insert(key, (line, value));
    }
    Ok(Settings {
        path: path.display().to_string(),
        entries,
    })
}

impl Settings {
    /// Settings with no file behind them; every lookup misses.
    pub fn empty() -> Self {
        Self::default()
    }

    /// Rejects keys outside `known` so misspellings surface immediately.
    pub fn check_keys(&self, known: &[&str]) -> Result<()> {
        for (key, (line, _)) in &self.entries {
            if !known.contains(&key.as_str()) {
                return Err(CliError::Invalid(format!(
                    "{} line {line}: unknown config key {key:?}",
                    self.path
                )));
            }
        }
        Ok(())
    }

    /// Parses the value stored under `key`, if present.
    pub fn get<T>(&self, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        match self.entries.get(key) {
            None => Ok(None),
            Some((line, raw)) => raw.parse().map(Some).map_err(|e: T::Err| CliError::Parse {
                path: self.path.clone(),
                line: Some(*line),
                msg: format!("key {key}: could not parse {raw:?}: {e}"),
            }),
        }
    }
}

/// Flag value, else config value, else the built-in default.
pub fn resolve<T>(flag: Option<T>, cfg: &Settings, key: &str, default: T) -> Result<T>
where
    T: FromStr,
    T::Err: Display,
{
    match flag {
        Some(v) => Ok(v),
        None => Ok(cfg.get(key)?.unwrap_or(default)),
    }
}

/// Flag value, else config value, else an error naming the option.
pub fn require<T>(flag: Option<T>, cfg: &Settings, key: &str) -> Result<T>
where
    T: FromStr,
    T::Err: Display,
{
    match flag {
        Some(v) => Ok(v),
        None => cfg.get(key)?.ok_or_else(|| {
            CliError::Invalid(format!("missing required option --{key} (or config key {key})"))
        }),
    }
}

/// A presence flag: true when given on the command line, else the config
/// value, else false.
pub fn resolve_flag(flag: bool, cfg: &Settings, key: &str) -> Result<bool> {
    if flag {
        Ok(true)
    } else {
        Ok(cfg.get(key)?.unwrap_or(false))
    }
}
