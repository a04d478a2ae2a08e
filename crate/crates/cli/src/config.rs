//! Scenario configuration files and `--set` overrides.

use std::fs;
use std::path::Path;

use detumble_core::sim::ScenarioConfig;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::CliError;

/// The Q-Li deployment scenario shipped with the crate.
pub const BUNDLED_BASELINE: &str = include_str!("../configs/qli-baseline.json");

/// Read `path`, apply `key=value` overrides and validate the result.
pub fn load_config(path: &Path, overrides: &[String]) -> Result<ScenarioConfig, CliError> {
    let text =
        fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text, overrides).map_err(|e| match e {
        CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Same as [`load_config`] for an in-memory document.
pub fn parse_config(text: &str, overrides: &[String]) -> Result<ScenarioConfig, CliError> {
    let mut de = serde_json::Deserializer::from_str(text);
    let cfg: ScenarioConfig = serde_path_to_error::deserialize(&mut de).map_err(schema_error)?;
    de.end().map_err(|e| CliError::Config(e.to_string()))?;

    let cfg = if overrides.is_empty() {
        cfg
    } else {
        // Round-trip through JSON so every defaulted field exists as a key.
        let mut tree = serde_json::to_value(&cfg).map_err(|e| CliError::Config(e.to_string()))?;
        for item in overrides {
            apply_override(&mut tree, item)?;
        }
        serde_path_to_error::deserialize(tree).map_err(schema_error)?
    };
    cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(cfg)
}

fn schema_error<E: std::fmt::Display>(err: serde_path_to_error::Error<E>) -> CliError {
    let path = err.path().to_string();
    CliError::Config(format!("{path}: {}", err.inner()))
}

/// Set the dotted key in `tree`. The value is read as JSON when it parses,
/// otherwise as a bare string, so `controller=mpc` works without quoting.
pub fn apply_override(tree: &mut Value, item: &str) -> Result<(), CliError> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("override `{item}` is not of the form key=value")))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(CliError::Usage(format!("override `{item}` has an empty key")));
    }
    let value = serde_json::from_str(raw.trim()).unwrap_or_else(|_| Value::String(raw.trim().to_string()));

    let mut node = tree;
    let mut parts = key.split('.').peekable();
    while let Some(part) = parts.next() {
        let slot = match node {
            Value::Object(map) => map.get_mut(part),
            Value::Array(items) => part.parse::<usize>().ok().and_then(|i| items.get_mut(i)),
            _ => None,
        };
        let slot = slot.ok_or_else(|| CliError::Config(format!("unknown override key `{key}`")))?;
        if parts.peek().is_none() {
            *slot = value;
            return Ok(());
        }
        node = slot;
    }
    unreachable!("split always yields at least one part")
}

/// SHA-256 of the canonical JSON form of the resolved config.
pub fn config_hash(cfg: &ScenarioConfig) -> String {
    let bytes = serde_json::to_vec(cfg).expect("scenario config is always serializable");
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}
