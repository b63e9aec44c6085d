//! Plain-text `key = value` run configuration with flag overrides.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};

/// Settings read from a config file. Command-line flags take precedence.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    /// Parses `key = value` lines; blank lines and `#` comments are ignored.
    /// Keys may use `-` or `_`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::format(i + 1, format!("expected key=value, got '{line}'")))?;
            let key = k.trim().replace('-', "_");
            if values.insert(key.clone(), v.trim().to_string()).is_some() {
                return Err(Error::format(i + 1, format!("duplicate key '{key}'")));
            }
        }
        Ok(Settings { values })
    }

    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            Some(p) => Self::parse(&std::fs::read_to_string(p)?),
            None => Ok(Self::default()),
        }
    }

    /// Rejects keys the command does not understand.
    pub fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        match self.values.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(k) => Err(Error::Usage(format!("unknown config key '{k}'; allowed: {}", allowed.join(", ")))),
            None => Ok(()),
        }
    }

    /// The flag if given, else the config value, else `default`.
    pub fn pick<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T> {
        Ok(self.pick_opt(flag, key)?.unwrap_or(default))
    }

    pub fn pick_opt<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.values.get(key) {
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::Usage(format!("config key '{key}' has invalid value '{v}'"))),
            None => Ok(None),
        }
    }

    pub fn pick_path(&self, flag: Option<PathBuf>, key: &str) -> Option<PathBuf> {
        flag.or_else(|| self.values.get(key).map(PathBuf::from))
    }
}
