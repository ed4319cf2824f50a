//! Deterministic JSON rendering for reports and file headers.

use serde::Serialize;

use crate::error::{CliError, CliResult};

/// Rounds to six significant digits, the precision of every reported metric.
pub fn metric(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.5e}").parse().expect("formatted float parses")
}

/// Pretty JSON with object keys in sorted order.
pub fn to_sorted_json<T: Serialize>(value: &T) -> CliResult<String> {
    // serde_json's map is ordered by key, so the round trip through `Value`
    // sorts every object
    let v = serde_json::to_value(value).map_err(|e| CliError::Runtime(e.to_string()))?;
    let mut s = serde_json::to_string_pretty(&v).map_err(|e| CliError::Runtime(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// Compact sorted JSON, for headers embedded in binary files.
pub fn to_sorted_compact_json<T: Serialize>(value: &T) -> CliResult<Vec<u8>> {
    let v = serde_json::to_value(value).map_err(|e| CliError::Runtime(e.to_string()))?;
    serde_json::to_vec(&v).map_err(|e| CliError::Runtime(e.to_string()))
}
