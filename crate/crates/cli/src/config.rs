use std::path::Path;

use serde::{Deserialize, Serialize};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Runtime(e)
    }
}

fn to_table<T: Serialize>(v: &T) -> Result<toml::Table, CliError> {
    match toml::Value::try_from(v) {
        Ok(toml::Value::Table(t)) => Ok(t),
        Ok(_) => Err(CliError::Runtime(anyhow::anyhow!("arguments did not serialize to a table"))),
        Err(e) => Err(CliError::Runtime(e.into())),
    }
}

/// Overlays the flags that were given onto the config file's table. Keys use
/// the flag spelling with `-` or `_`. Unknown keys are a usage error.
pub fn merge_config<A>(flags: &A, path: Option<&Path>) -> Result<A, CliError>
where
    A: Serialize + for<'de> Deserialize<'de>,
{
    let Some(path) = path else {
        return toml::Value::Table(to_table(flags)?)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Runtime(e.into()));
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let file: toml::Table =
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))?;
    let mut merged = toml::Table::new();
    for (k, v) in file {
        let key = k.replace('-', "_");
        if !known_key::<A>(&key) {
            return Err(CliError::Usage(format!("unknown key `{k}` in {}", path.display())));
        }
        merged.insert(key, v);
    }
    for (k, v) in to_table(flags)? {
        merged.insert(k, v);
    }
    toml::Value::Table(merged)
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Usage(format!("invalid config {}: {e}", path.display())))
}

fn known_key<A>(key: &str) -> bool
where
    A: for<'de> Deserialize<'de>,
{
    // Flattened args ignore unknown keys, so a known key is one that rejects a
    // value no flag accepts.
    let mut probe = toml::Table::new();
    probe.insert(key.to_string(), toml::Value::Table(toml::Table::new()));
    A::deserialize(toml::Value::Table(probe)).is_err()
}
