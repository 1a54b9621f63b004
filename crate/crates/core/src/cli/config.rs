//! TOML experiment manifests.
//!
//! Keys mirror the long flag names with `-` replaced by `_`. A key may sit at
//! the top level or inside a table named after the subcommand; the table
//! wins over the top level, and an explicit flag wins over both.
//!
//! ```toml
//! seed = 7
//! [eval]
//! reps = 200
//! prefilter = true
//! ```

use std::path::Path;

use serde::de::DeserializeOwned;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default)]
pub struct ConfigFile {
    table: toml::Table,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let body = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&body).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn parse(body: &str) -> Result<Self> {
        let table = body
            .parse::<toml::Table>()
            .map_err(|e| Error::Config(format!("invalid TOML: {e}")))?;
        Ok(ConfigFile { table })
    }

    /// Value for `key`, looked up under `[section]` first.
    pub fn get<T: DeserializeOwned>(&self, section: &str, key: &str) -> Result<Option<T>> {
        let scoped = self
            .table
            .get(section)
            .and_then(toml::Value::as_table)
            .and_then(|t| t.get(key));
        let Some(value) = scoped.or_else(|| self.table.get(key)) else {
            return Ok(None);
        };
        value
            .clone()
            .try_into()
            .map(Some)
            .map_err(|e| Error::Config(format!("config key {key:?}: {e}")))
    }

    /// Flag value, else config value, else `default`.
    pub fn pick<T: DeserializeOwned>(&self, flag: Option<T>, section: &str, key: &str, default: T) -> Result<T> {
        match flag {
            Some(v) => Ok(v),
            None => Ok(self.get(section, key)?.unwrap_or(default)),
        }
    }

    /// Like [`ConfigFile::pick`] without a default.
    pub fn pick_opt<T: DeserializeOwned>(&self, flag: Option<T>, section: &str, key: &str) -> Result<Option<T>> {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self.get(section, key),
        }
    }

    /// A boolean switch: set by the flag, or by a `true` config value.
    pub fn switch(&self, flag: bool, section: &str, key: &str) -> Result<bool> {
        Ok(flag || self.get(section, key)?.unwrap_or(false))
    }
}
