//! JSON config files mirroring the command-line flags.

use std::path::Path;

use anyhow::Context;
use serde::{de::DeserializeOwned, Serialize};
use serde_json::{Map, Value};

use crate::error::{usage, CliError, CliResult};

pub fn load(path: &Path) -> CliResult<Map<String, Value>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))
        .map_err(|e| usage(format!("{e:#}")))?;
    match serde_json::from_str::<Value>(&text) {
        Ok(Value::Object(map)) => Ok(map),
        Ok(_) => Err(usage(format!(
            "config {} must hold a JSON object",
            path.display()
        ))),
        Err(e) => Err(usage(format!("config {}: {e}", path.display()))),
    }
}

/// Overlays explicit flags on file values. A flag counts as explicit when
/// it is not null and not a `false` switch.
pub fn merge<T>(flags: &T, file: Option<&Map<String, Value>>) -> CliResult<T>
where
    T: Serialize + DeserializeOwned + Default,
{
    let Some(file) = file else {
        return Ok(reparse(flags));
    };
    let known = match serde_json::to_value(T::default()).expect("args serialize") {
        Value::Object(m) => m,
        _ => unreachable!("args are structs"),
    };
    if let Some(bad) = file.keys().find(|k| !known.contains_key(*k)) {
        let mut names: Vec<&str> = known.keys().map(String::as_str).collect();
        names.sort_unstable();
        return Err(usage(format!(
            "unknown config key '{bad}' (expected one of: {})",
            names.join(", ")
        )));
    }
    let mut merged = file.clone();
    if let Value::Object(given) = serde_json::to_value(flags).expect("args serialize") {
        for (k, v) in given {
            if !(v.is_null() || v == Value::Bool(false)) {
                merged.insert(k, v);
            }
        }
    }
    serde_json::from_value(Value::Object(merged))
        .map_err(|e| CliError::Usage(format!("config: {e}")))
}

fn reparse<T: Serialize + DeserializeOwned>(v: &T) -> T {
    serde_json::from_value(serde_json::to_value(v).expect("serialize")).expect("round trip")
}
