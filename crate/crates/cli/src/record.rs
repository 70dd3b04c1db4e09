//! Run records and number formatting.

use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const TOOL: &str = "hd-qkd-ratekit";

pub fn version() -> &'static str {
    env!("CARGO_PKG_VERSION")
}

/// `vMAJOR.MINOR`, used in CSV headers.
pub fn short_version() -> String {
    let mut parts = version().split('.');
    format!(
        "v{}.{}",
        parts.next().unwrap_or("0"),
        parts.next().unwrap_or("0")
    )
}

/// Everything needed to reproduce and audit one invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Flags and config values as given.
    pub input: Value,
    /// Parameters after defaults were filled in.
    pub resolved: Value,
    pub result: Value,
    pub wall_time_s: f64,
}

impl RunRecord {
    pub fn new(command: &str, input: Value, resolved: Value, result: Value) -> Self {
        Self {
            tool: TOOL.to_string(),
            version: version().to_string(),
            command: command.to_string(),
            input,
            resolved,
            result,
            wall_time_s: 0.0,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("record serializes")
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }
}

/// Twelve significant digits for terminal output.
pub fn sig12(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return "0".to_string();
    }
    let mag = x.abs().log10().floor() as i32;
    if (-4..12).contains(&mag) {
        let decimals = (11 - mag).max(0) as usize;
        let s = format!("{x:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        format!("{x:.11e}")
    }
}
