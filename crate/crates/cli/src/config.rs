//! Defaults from an optional TOML file. Command-line flags win over the
//! file, which wins over built-in defaults.

use std::path::Path;

use serde::de::DeserializeOwned;

use crate::failure::Failure;

#[derive(Debug, Default)]
pub struct FileConfig {
    table: toml::Table,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, Failure> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::validation(format!("{}: {e}", path.display())))?;
        let table = text
            .parse::<toml::Table>()
            .map_err(|e| Failure::validation(format!("{}: {}", path.display(), e.message())))?;
        Ok(Self { table })
    }

    /// Looks up `key` under the dotted `section` (e.g. `corpus.filter`).
    /// `seed` also falls back to a top-level `seed`.
    pub fn get<T: DeserializeOwned>(&self, section: &str, key: &str) -> Result<Option<T>, Failure> {
        let mut table = Some(&self.table);
        for part in section.split('.') {
            table = table.and_then(|t| t.get(part)).and_then(|v| v.as_table());
        }
        let value = table
            .and_then(|t| t.get(key))
            .or_else(|| (key == "seed").then(|| self.table.get("seed")).flatten());
        value
            .map(|v| {
                v.clone()
                    .try_into()
                    .map_err(|e| Failure::validation(format!("config {section}.{key}: {e}")))
            })
            .transpose()
    }

    /// Flag value, else config value, else `default`.
    pub fn pick<T: DeserializeOwned>(
        &self,
        flag: Option<T>,
        section: &str,
        key: &str,
        default: T,
    ) -> Result<T, Failure> {
        Ok(self.pick_opt(flag, section, key)?.unwrap_or(default))
    }

    pub fn pick_opt<T: DeserializeOwned>(
        &self,
        flag: Option<T>,
        section: &str,
        key: &str,
    ) -> Result<Option<T>, Failure> {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self.get(section, key),
        }
    }

    pub fn require<T: DeserializeOwned>(
        &self,
        flag: Option<T>,
        section: &str,
        key: &str,
    ) -> Result<T, Failure> {
        self.pick_opt(flag, section, key)?.ok_or_else(|| {
            Failure::validation(format!(
                "missing --{} (or `{key}` under [{section}] in the config file)",
                key.replace('_', "-")
            ))
        })
    }
}
